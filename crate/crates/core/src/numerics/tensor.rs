use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Dense row-major `f64` array. The storage is shared and never mutated in
/// place once other handles exist, so cloning a tensor is cheap.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Arc<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!(
                "shape {shape:?} has a zero dimension"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape,
            data: Arc::new(data),
        })
    }

    /// Builds a tensor without validating the shape. Callers guarantee
    /// `product(shape) == data.len()`.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            shape,
            data: Arc::new(data),
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor::from_parts(shape.to_vec(), vec![0.0; n])
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::from_parts(vec![1], vec![v])
    }

    /// `1 × n` row vector.
    pub fn row(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Tensor::new(vec![1, n], values)
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    /// Rows and columns when viewed as a matrix; 1-D tensors are rows.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            _ => (1, self.data.len()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Mutable access, copying the storage first if it is shared.
    pub fn values_mut(&mut self) -> &mut [f64] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    pub fn into_vec(self) -> Vec<f64> {
        Arc::try_unwrap(self.data).unwrap_or_else(|shared| (*shared).clone())
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Tensor {
            shape,
            data: Arc::clone(&self.data),
        })
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("values", &self.data)
            .finish()
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`
pub(crate) fn gemm_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m×k] += g[m×n] · bᵀ` where `b` is `k×n`.
pub(crate) fn gemm_nt_acc(g: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            let dot: f64 = g_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            out[i * k + p] += dot;
        }
    }
}

/// `out[k×n] += aᵀ · g` where `a` is `m×k` and `g` is `m×n`.
pub(crate) fn gemm_tn_acc(a: &[f64], g: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let out_row = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in out_row.iter_mut().zip(g_row) {
                *o += av * gv;
            }
        }
    }
}

/// Plain matrix product of two 2-D tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2();
    let (k2, n) = b.dims2();
    if k != k2 {
        return Err(Error::Dimension(format!(
            "matmul inner dimensions disagree: {:?} × {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = vec![0.0; m * n];
    gemm_acc(a.values(), b.values(), &mut out, m, k, n);
    Ok(Tensor::from_parts(vec![m, n], out))
}

/// Numerically stable softmax over all elements, preserving shape.
pub fn softmax(v: &Tensor) -> Result<Tensor> {
    if v.is_empty() {
        return Err(Error::Dimension("softmax of an empty tensor".into()));
    }
    Ok(Tensor::from_parts(v.shape().to_vec(), softmax_slice(v.values())))
}

pub(crate) fn softmax_slice(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    out
}

pub(crate) fn log_softmax_slice(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

/// `-log softmax(logits)[target]` as a plain value.
pub fn cross_entropy(logits: &Tensor, target: usize) -> Result<Tensor> {
    if target >= logits.len() {
        return Err(Error::Index {
            index: target,
            len: logits.len(),
        });
    }
    let ls = log_softmax_slice(logits.values());
    Ok(Tensor::scalar(-ls[target]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += a[i * k + p] * b[p * n + j];
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn matmul_identity_and_zero() {
        let eye = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::matrix(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(matmul(&eye, &b).unwrap().values(), b.values());

        let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = Tensor::matrix(2, 1, vec![0.0, 0.0]).unwrap();
        let r = matmul(&a, &z).unwrap();
        assert_eq!(r.shape(), &[2, 1]);
        assert_eq!(r.values(), &[0.0, 0.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        for _ in 0..10 {
            let a: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let ta = Tensor::matrix(3, 4, a.clone()).unwrap();
            let tb = Tensor::matrix(4, 2, b.clone()).unwrap();
            let got = matmul(&ta, &tb).unwrap();
            for (g, w) in got.values().iter().zip(naive(&a, &b, 3, 4, 2)) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Tensor::matrix(2, 3, vec![0.0; 6]).unwrap();
        let b = Tensor::matrix(2, 3, vec![0.0; 6]).unwrap();
        let msg = matmul(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3] × [2, 3]"), "{msg}");
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&Tensor::row(vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(s.values(), &[0.5, 0.5]);

        let v = [1.0f64, 2.0, 3.0];
        let denom: f64 = v.iter().map(|x| x.exp()).sum();
        let s = softmax(&Tensor::row(v.to_vec()).unwrap()).unwrap();
        for (got, x) in s.values().iter().zip(v) {
            assert!((got - x.exp() / denom).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_tensor_rejected() {
        assert!(matches!(Tensor::row(vec![]), Err(Error::Dimension(_))));
    }

    #[test]
    fn cross_entropy_examples() {
        let ce = cross_entropy(&Tensor::row(vec![0.3; 4]).unwrap(), 2).unwrap();
        assert!((ce.item() - 4f64.ln()).abs() < 1e-15);

        let ce = cross_entropy(&Tensor::row(vec![-1e3, 1e3, -1e3]).unwrap(), 1).unwrap();
        assert!(ce.item().abs() < 1e-12);

        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let logits: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let denom: f64 = logits.iter().map(|x| x.exp()).sum();
        let want = -(logits[3].exp() / denom).ln();
        let got = cross_entropy(&Tensor::row(logits).unwrap(), 3).unwrap();
        assert!((got.item() - want).abs() < 1e-10);

        assert!(matches!(
            cross_entropy(&Tensor::row(vec![0.0; 3]).unwrap(), 3),
            Err(Error::Index { index: 3, len: 3 })
        ));
    }

    proptest! {
        #[test]
        fn softmax_normalizes_and_is_shift_invariant(
            v in prop::collection::vec(-50.0f64..50.0, 1..20),
            c in -100.0f64..100.0,
        ) {
            let s = softmax(&Tensor::row(v.clone()).unwrap()).unwrap();
            let total: f64 = s.values().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(s.values().iter().all(|&p| p > 0.0));
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let s2 = softmax(&Tensor::row(shifted).unwrap()).unwrap();
            for (a, b) in s.values().iter().zip(s2.values()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn cross_entropy_is_non_negative(
            v in prop::collection::vec(-1e3f64..1e3, 1..12),
            t in 0usize..12,
        ) {
            let t = t % v.len();
            let ce = cross_entropy(&Tensor::row(v).unwrap(), t).unwrap();
            prop_assert!(ce.item() >= 0.0);
        }
    }
}
