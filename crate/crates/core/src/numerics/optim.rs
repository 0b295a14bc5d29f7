use super::param::ParamSet;
use crate::error::{Error, Result};

/// Global-norm threshold applied to gradients before every update.
pub const DEFAULT_CLIP_NORM: f64 = 5.0;

/// Plain stochastic gradient descent with optional global-norm clipping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sgd {
    learning_rate: f64,
    clip_norm: Option<f64>,
}

impl Sgd {
    pub fn new(learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0) || !learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {learning_rate}"
            )));
        }
        Ok(Sgd {
            learning_rate,
            clip_norm: Some(DEFAULT_CLIP_NORM),
        })
    }

    pub fn without_clipping(mut self) -> Self {
        self.clip_norm = None;
        self
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// `value ← value − lr · gradient`, then zeroes the gradients.
    pub fn step(&self, params: &mut ParamSet) {
        let mut scale = self.learning_rate;
        if let Some(max) = self.clip_norm {
            let norm = params.grad_norm();
            if norm > max {
                scale *= max / norm;
            }
        }
        for id in params.ids().collect::<Vec<_>>() {
            let p = params.get_mut(id);
            let grad = p.gradient.clone();
            for (v, g) in p.value.values_mut().iter_mut().zip(grad.values()) {
                *v -= scale * g;
            }
        }
        params.zero_grad();
    }
}

/// One clipped SGD update.
pub fn sgd_step(params: &mut ParamSet, learning_rate: f64) -> Result<()> {
    Sgd::new(learning_rate)?.step(params);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ComputationRecord, Tensor};

    fn single(v: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.register("w", Tensor::scalar(v)).unwrap();
        ps
    }

    #[test]
    fn rejects_non_positive_rate() {
        let mut ps = single(1.0);
        assert!(matches!(sgd_step(&mut ps, 0.0), Err(Error::Config(_))));
        assert!(matches!(sgd_step(&mut ps, -0.1), Err(Error::Config(_))));
    }

    #[test]
    fn tiny_rate_is_a_no_op() {
        let mut ps = single(1.0);
        let id = ps.lookup("w").unwrap();
        ps.get_mut(id).gradient = Tensor::scalar(0.5);
        sgd_step(&mut ps, 1e-12).unwrap();
        assert!((ps.get(id).value.item() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn update_arithmetic_and_zeroing() {
        let mut ps = single(1.0);
        let id = ps.lookup("w").unwrap();
        ps.get_mut(id).gradient = Tensor::scalar(0.5);
        sgd_step(&mut ps, 0.1).unwrap();
        assert!((ps.get(id).value.item() - 0.95).abs() < 1e-15);
        assert_eq!(ps.get(id).gradient.item(), 0.0);
    }

    #[test]
    fn clipping_caps_the_step() {
        let mut ps = single(0.0);
        let id = ps.lookup("w").unwrap();
        ps.get_mut(id).gradient = Tensor::scalar(-50.0);
        sgd_step(&mut ps, 1.0).unwrap();
        assert!((ps.get(id).value.item() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn minimizes_quadratic() {
        // f(w) = (w - 3)²
        let mut ps = single(0.0);
        let id = ps.lookup("w").unwrap();
        for _ in 0..100 {
            let mut rec = ComputationRecord::new();
            let w = rec.param(&ps, id);
            let three = rec.input(Tensor::scalar(3.0));
            let d = rec.sub(w, three).unwrap();
            let sq = rec.mul(d, d).unwrap();
            let g = rec.backward(sq).unwrap();
            ps.accumulate(&g);
            sgd_step(&mut ps, 0.1).unwrap();
        }
        assert!((ps.get(id).value.item() - 3.0).abs() < 1e-6);
    }
}
