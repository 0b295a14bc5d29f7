use rand::distributions::{Distribution, Open01};

use super::config::{ModelConfig, MAX_SOURCE_TOKENS};
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, ComputationRecord, Gradients, ParamId, ParamSet, Tensor, Var};

/// Initial weights are drawn from `uniform(-INIT_SCALE, INIT_SCALE)`.
pub const INIT_SCALE: f64 = 0.08;

#[derive(Clone, Copy, Debug, PartialEq)]
struct GruIds {
    w_z: ParamId,
    w_r: ParamId,
    w_n: ParamId,
    u_z: ParamId,
    u_r: ParamId,
    u_n: ParamId,
    b_z: ParamId,
    b_r: ParamId,
    b_n: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layout {
    src_embed: ParamId,
    tgt_embed: ParamId,
    enc_fwd: GruIds,
    enc_bwd: GruIds,
    att_query: ParamId,
    att_key: ParamId,
    att_score: ParamId,
    init_w: ParamId,
    init_b: ParamId,
    dec: GruIds,
    out_w: ParamId,
    out_b: ParamId,
}

/// Every `(id, shape)` of a model with this configuration, in
/// registration order.
pub fn parameter_manifest(c: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (e, h, a) = (c.embed_dim, c.hidden_dim, c.attention_dim());
    let mut out = vec![
        ("src_embed".to_string(), vec![c.vocab_size_src, e]),
        ("tgt_embed".to_string(), vec![c.vocab_size_tgt, e]),
    ];
    let gru = |prefix: &str, input: usize, out: &mut Vec<(String, Vec<usize>)>| {
        for g in ["z", "r", "n"] {
            out.push((format!("{prefix}.w_{g}"), vec![input, h]));
        }
        for g in ["z", "r", "n"] {
            out.push((format!("{prefix}.u_{g}"), vec![h, h]));
        }
        for g in ["z", "r", "n"] {
            out.push((format!("{prefix}.b_{g}"), vec![1, h]));
        }
    };
    gru("enc_fwd", e, &mut out);
    gru("enc_bwd", e, &mut out);
    out.push(("att.w_query".into(), vec![h, a]));
    out.push(("att.w_key".into(), vec![2 * h, a]));
    out.push(("att.v".into(), vec![a, 1]));
    out.push(("dec_init.w".into(), vec![2 * h, h]));
    out.push(("dec_init.b".into(), vec![1, h]));
    gru("dec", e + 2 * h, &mut out);
    out.push(("out.w".into(), vec![h, c.vocab_size_tgt]));
    out.push(("out.b".into(), vec![1, c.vocab_size_tgt]));
    out
}

/// The encoder–decoder parameters together with their configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    params: ParamSet,
    layout: Layout,
}

/// Per-position bidirectional encoder states, plus the attention key
/// projection of those states (a cache derived from them).
#[derive(Clone, Debug, PartialEq)]
pub struct Annotations {
    pub states: Tensor,
    pub(crate) keys: Tensor,
}

impl Annotations {
    pub fn len(&self) -> usize {
        self.states.dims2().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub hidden: Tensor,
}

/// Result of one decoder step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: DecoderState,
    pub log_probs: Vec<f64>,
    pub attention: Vec<f64>,
}

pub fn init_model(config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed);
    let mut params = ParamSet::new();
    for (name, shape) in parameter_manifest(config) {
        let n = shape.iter().product();
        let values = (0..n)
            .map(|_| {
                let u: f64 = Open01.sample(&mut rng);
                INIT_SCALE * (2.0 * u - 1.0)
            })
            .collect();
        params.register(&name, Tensor::new(shape, values)?)?;
    }
    ModelParams::from_parts(config.clone(), params)
}

impl ModelParams {
    /// Reassembles a model from a parameter set whose ids and shapes match
    /// the manifest for `config`.
    pub fn from_parts(config: ModelConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let manifest = parameter_manifest(&config);
        if manifest.len() != params.len() {
            return Err(Error::Format(format!(
                "expected {} parameters, found {}",
                manifest.len(),
                params.len()
            )));
        }
        for ((name, shape), p) in manifest.iter().zip(params.iter()) {
            if &p.id != name || p.value.shape() != shape.as_slice() {
                return Err(Error::Format(format!(
                    "parameter {} {:?} does not match expected {name} {shape:?}",
                    p.id,
                    p.value.shape()
                )));
            }
        }
        let id = |n: &str| params.lookup(n).expect("manifest checked");
        let gru = |p: &str| GruIds {
            w_z: id(&format!("{p}.w_z")),
            w_r: id(&format!("{p}.w_r")),
            w_n: id(&format!("{p}.w_n")),
            u_z: id(&format!("{p}.u_z")),
            u_r: id(&format!("{p}.u_r")),
            u_n: id(&format!("{p}.u_n")),
            b_z: id(&format!("{p}.b_z")),
            b_r: id(&format!("{p}.b_r")),
            b_n: id(&format!("{p}.b_n")),
        };
        let layout = Layout {
            src_embed: id("src_embed"),
            tgt_embed: id("tgt_embed"),
            enc_fwd: gru("enc_fwd"),
            enc_bwd: gru("enc_bwd"),
            att_query: id("att.w_query"),
            att_key: id("att.w_key"),
            att_score: id("att.v"),
            init_w: id("dec_init.w"),
            init_b: id("dec_init.b"),
            dec: gru("dec"),
            out_w: id("out.w"),
            out_b: id("out.b"),
        };
        Ok(ModelParams { config, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    fn check_src(&self, ids: &[usize]) -> Result<()> {
        if ids.len() < 2 {
            return Err(Error::Contract("source needs at least BOS and EOS".into()));
        }
        if ids.len() > MAX_SOURCE_TOKENS {
            return Err(Error::SourceTooLong {
                tokens: ids.len(),
                limit: MAX_SOURCE_TOKENS,
            });
        }
        check_ids(ids, self.config.vocab_size_src)
    }

    fn gru_step(&self, rec: &mut ComputationRecord, g: &GruIds, xz: Var, xr: Var, xn: Var, h: Var) -> Result<Var> {
        let p = &self.params;
        let (u_z, u_r, u_n) = (rec.param(p, g.u_z), rec.param(p, g.u_r), rec.param(p, g.u_n));
        let hz = rec.matmul(h, u_z)?;
        let z_pre = rec.add(xz, hz)?;
        let z = rec.sigmoid(z_pre);
        let hr = rec.matmul(h, u_r)?;
        let r_pre = rec.add(xr, hr)?;
        let r = rec.sigmoid(r_pre);
        let rh = rec.mul(r, h)?;
        let hn = rec.matmul(rh, u_n)?;
        let n_pre = rec.add(xn, hn)?;
        let n = rec.tanh(n_pre);
        let keep = rec.mul(z, h)?;
        let one_minus_z = rec.one_minus(z);
        let fresh = rec.mul(one_minus_z, n)?;
        rec.add(fresh, keep)
    }

    /// Input projections `X·W + b` for all gates at once; `x` is `T×in`.
    fn gru_inputs(&self, rec: &mut ComputationRecord, g: &GruIds, x: Var) -> Result<[Var; 3]> {
        let p = &self.params;
        let mut out = [x; 3];
        for (slot, (w, b)) in out.iter_mut().zip([(g.w_z, g.b_z), (g.w_r, g.b_r), (g.w_n, g.b_n)]) {
            let w = rec.param(p, w);
            let b = rec.param(p, b);
            let xw = rec.matmul(x, w)?;
            *slot = rec.add_row(xw, b)?;
        }
        Ok(out)
    }

    /// Records the encoder; returns the `T × 2h` annotation matrix.
    pub fn encode_in(&self, rec: &mut ComputationRecord, source_ids: &[usize]) -> Result<Var> {
        self.check_src(source_ids)?;
        let emb = rec.param(&self.params, self.layout.src_embed);
        let rows = source_ids
            .iter()
            .map(|&i| rec.row(emb, i))
            .collect::<Result<Vec<_>>>()?;
        let x = rec.stack_rows(&rows)?;
        let t_len = source_ids.len();
        let h = self.config.hidden_dim;

        let run = |rec: &mut ComputationRecord, g: &GruIds, order: &mut dyn Iterator<Item = usize>| -> Result<Vec<(usize, Var)>> {
            let [xz, xr, xn] = self.gru_inputs(rec, g, x)?;
            let mut state = rec.input(Tensor::zeros(&[1, h]));
            let mut out = Vec::with_capacity(t_len);
            for t in order {
                let (a, b, c) = (rec.row(xz, t)?, rec.row(xr, t)?, rec.row(xn, t)?);
                state = self.gru_step(rec, g, a, b, c, state)?;
                out.push((t, state));
            }
            Ok(out)
        };
        let fwd = run(rec, &self.layout.enc_fwd, &mut (0..t_len))?;
        let mut bwd = run(rec, &self.layout.enc_bwd, &mut (0..t_len).rev())?;
        bwd.reverse();
        let mut rows = Vec::with_capacity(t_len);
        for ((_, f), (_, b)) in fwd.into_iter().zip(bwd) {
            rows.push(rec.concat(&[f, b])?);
        }
        rec.stack_rows(&rows)
    }

    /// Attention keys `H · W_key`, computed once per source.
    pub fn attention_keys_in(&self, rec: &mut ComputationRecord, annotations: Var) -> Result<Var> {
        let w = rec.param(&self.params, self.layout.att_key);
        rec.matmul(annotations, w)
    }

    /// `tanh(mean(H) · W_init + b_init)`
    pub fn decoder_start_in(&self, rec: &mut ComputationRecord, annotations: Var) -> Result<Var> {
        let mean = rec.mean_rows(annotations);
        let w = rec.param(&self.params, self.layout.init_w);
        let b = rec.param(&self.params, self.layout.init_b);
        let proj = rec.matmul(mean, w)?;
        let pre = rec.add(proj, b)?;
        Ok(rec.tanh(pre))
    }

    /// One decoder step: additive attention from the previous state, GRU
    /// update on `[embed(prev); context]`, then the output projection.
    /// Returns `(new_state, logits, attention_weights)`.
    pub fn decoder_step_in(
        &self,
        rec: &mut ComputationRecord,
        state: Var,
        prev_id: usize,
        annotations: Var,
        keys: Var,
    ) -> Result<(Var, Var, Var)> {
        if prev_id >= self.config.vocab_size_tgt {
            return Err(Error::Index {
                index: prev_id,
                len: self.config.vocab_size_tgt,
            });
        }
        let p = &self.params;
        let l = &self.layout;
        let t_len = rec.value(annotations).dims2().0;

        let w_q = rec.param(p, l.att_query);
        let query = rec.matmul(state, w_q)?;
        let mixed = rec.add_row(keys, query)?;
        let act = rec.tanh(mixed);
        let v = rec.param(p, l.att_score);
        let scores = rec.matmul(act, v)?;
        let scores = rec.reshape(scores, vec![1, t_len])?;
        let alpha = rec.softmax(scores)?;
        let context = rec.matmul(alpha, annotations)?;

        let emb = rec.param(p, l.tgt_embed);
        let y = rec.row(emb, prev_id)?;
        let x = rec.concat(&[y, context])?;
        let [xz, xr, xn] = self.gru_inputs(rec, &l.dec, x)?;
        let next = self.gru_step(rec, &l.dec, xz, xr, xn, state)?;

        let w_o = rec.param(p, l.out_w);
        let b_o = rec.param(p, l.out_b);
        let proj = rec.matmul(next, w_o)?;
        let logits = rec.add(proj, b_o)?;
        Ok((next, logits, alpha))
    }

    /// Records the teacher-forced loss: the sum over target positions
    /// `1..len` of the cross-entropy of each step's logits.
    pub fn sequence_nll_in(&self, rec: &mut ComputationRecord, source_ids: &[usize], target_ids: &[usize]) -> Result<Var> {
        if target_ids.len() < 2 {
            return Err(Error::Contract("target needs at least BOS and EOS".into()));
        }
        check_ids(target_ids, self.config.vocab_size_tgt)?;
        let ann = self.encode_in(rec, source_ids)?;
        let keys = self.attention_keys_in(rec, ann)?;
        let mut state = self.decoder_start_in(rec, ann)?;
        let mut terms = Vec::with_capacity(target_ids.len() - 1);
        for w in target_ids.windows(2) {
            let (next, logits, _) = self.decoder_step_in(rec, state, w[0], ann, keys)?;
            terms.push(rec.cross_entropy(logits, w[1])?);
            state = next;
        }
        rec.sum(&terms)
    }

    pub fn encode(&self, source_ids: &[usize]) -> Result<Annotations> {
        let mut rec = ComputationRecord::new();
        let ann = self.encode_in(&mut rec, source_ids)?;
        let keys = self.attention_keys_in(&mut rec, ann)?;
        Ok(Annotations {
            states: rec.value(ann).clone(),
            keys: rec.value(keys).clone(),
        })
    }

    pub fn decoder_start(&self, annotations: &Annotations) -> Result<DecoderState> {
        let mut rec = ComputationRecord::new();
        let ann = rec.input(annotations.states.clone());
        let s = self.decoder_start_in(&mut rec, ann)?;
        Ok(DecoderState {
            hidden: rec.value(s).clone(),
        })
    }

    pub fn decoder_step(&self, state: &DecoderState, prev_id: usize, annotations: &Annotations) -> Result<StepOutput> {
        let mut rec = ComputationRecord::new();
        let s = rec.input(state.hidden.clone());
        let ann = rec.input(annotations.states.clone());
        let keys = rec.input(annotations.keys.clone());
        let (next, logits, alpha) = self.decoder_step_in(&mut rec, s, prev_id, ann, keys)?;
        let log_probs = crate::numerics::log_softmax_slice(rec.value(logits).values());
        Ok(StepOutput {
            state: DecoderState {
                hidden: rec.value(next).clone(),
            },
            log_probs,
            attention: rec.value(alpha).values().to_vec(),
        })
    }

    pub fn sequence_nll(&self, source_ids: &[usize], target_ids: &[usize]) -> Result<f64> {
        let mut rec = ComputationRecord::new();
        let loss = self.sequence_nll_in(&mut rec, source_ids, target_ids)?;
        Ok(rec.value(loss).item())
    }

    /// Loss value and gradients for one pair.
    pub fn loss_and_gradients(&self, source_ids: &[usize], target_ids: &[usize]) -> Result<(f64, Gradients)> {
        let mut rec = ComputationRecord::new();
        let loss = self.sequence_nll_in(&mut rec, source_ids, target_ids)?;
        let grads = rec.backward(loss)?;
        Ok((rec.value(loss).item(), grads))
    }
}

fn check_ids(ids: &[usize], vocab: usize) -> Result<()> {
    match ids.iter().find(|&&i| i >= vocab) {
        Some(&bad) => Err(Error::Index { index: bad, len: vocab }),
        None => Ok(()),
    }
}
