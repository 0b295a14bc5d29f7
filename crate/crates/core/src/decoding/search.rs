use super::hypothesis::{rank, Hypothesis};
use crate::error::Result;
use crate::seq2seq::{Annotations, DecoderState, ModelParams};
use crate::textdata::{BOS, EOS};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamConfig {
    pub beam_width: usize,
    /// Maximum number of content tokens; EOS is forced once it is reached.
    pub max_len: usize,
    pub length_norm: bool,
}

impl BeamConfig {
    pub const DEFAULT_WIDTH: usize = 6;

    /// Default search settings for a source of `source_tokens` ids
    /// (BOS/EOS included).
    pub fn for_source(source_tokens: usize) -> Self {
        BeamConfig {
            beam_width: Self::DEFAULT_WIDTH,
            max_len: default_max_len(source_tokens),
            length_norm: true,
        }
    }
}

/// `2 · content length + 5`
pub fn default_max_len(source_tokens: usize) -> usize {
    2 * source_tokens.saturating_sub(2) + 5
}

#[derive(Clone, Debug)]
pub(crate) struct Partial {
    pub ids: Vec<usize>,
    pub score: f64,
    pub prefix_score: f64,
    pub state: DecoderState,
}

impl Partial {
    fn content_len(&self) -> usize {
        self.ids.len() - 1
    }
}

pub(crate) fn start(model: &ModelParams, ann: &Annotations) -> Result<Partial> {
    Ok(Partial {
        ids: vec![BOS],
        score: 0.0,
        prefix_score: 0.0,
        state: model.decoder_start(ann)?,
    })
}

/// Picks the argmax token at each step (lowest id on ties) until EOS or
/// `max_len` content tokens.
pub fn greedy_decode(model: &ModelParams, source_ids: &[usize], max_len: usize) -> Result<Hypothesis> {
    let ann = model.encode(source_ids)?;
    let mut cur = start(model, &ann)?;
    loop {
        let out = model.decoder_step(&cur.state, *cur.ids.last().unwrap(), &ann)?;
        let token = if cur.content_len() >= max_len {
            EOS
        } else {
            let mut best = 0;
            for (i, &lp) in out.log_probs.iter().enumerate() {
                if lp > out.log_probs[best] {
                    best = i;
                }
            }
            best
        };
        cur.score += out.log_probs[token];
        cur.ids.push(token);
        cur.state = out.state;
        if token == EOS {
            return Ok(Hypothesis::new(cur.ids, cur.score, 0.0));
        }
    }
}

/// Free beam search. Returns finished hypotheses, best first.
pub fn beam_search(model: &ModelParams, source_ids: &[usize], config: &BeamConfig) -> Result<Vec<Hypothesis>> {
    let ann = model.encode(source_ids)?;
    let init = start(model, &ann)?;
    run_beam(model, &ann, init, None, config)
}

/// Beam expansion from one partial hypothesis. `first_allowed`, when
/// given, restricts the first expansion to the listed token ids.
/// Finished hypotheses leave the beam, which shrinks accordingly.
pub(crate) fn run_beam(
    model: &ModelParams,
    ann: &Annotations,
    init: Partial,
    first_allowed: Option<&[usize]>,
    config: &BeamConfig,
) -> Result<Vec<Hypothesis>> {
    let width = config.beam_width.max(1);
    let vocab = model.config().vocab_size_tgt;
    let mut live = vec![init];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut first = true;

    while !live.is_empty() && finished.len() < width {
        // (parent, token, score)
        let mut cands: Vec<(usize, usize, f64)> = Vec::new();
        let mut outputs = Vec::with_capacity(live.len());
        for (pi, p) in live.iter().enumerate() {
            let out = model.decoder_step(&p.state, *p.ids.last().unwrap(), ann)?;
            let at_limit = p.content_len() >= config.max_len;
            match (first, first_allowed) {
                (true, Some(allowed)) => {
                    for &t in allowed {
                        cands.push((pi, t, p.score + out.log_probs[t]));
                    }
                }
                _ if at_limit => cands.push((pi, EOS, p.score + out.log_probs[EOS])),
                _ => {
                    for (t, lp) in out.log_probs.iter().enumerate().take(vocab) {
                        cands.push((pi, t, p.score + lp));
                    }
                }
            }
            outputs.push(out.state);
        }
        first = false;

        cands.sort_by(|a, b| {
            b.2.total_cmp(&a.2)
                .then_with(|| live[a.0].ids.cmp(&live[b.0].ids))
                .then_with(|| a.1.cmp(&b.1))
        });
        cands.truncate(width - finished.len());

        let mut next = Vec::with_capacity(cands.len());
        for (pi, t, score) in cands {
            let parent = &live[pi];
            let mut ids = Vec::with_capacity(parent.ids.len() + 1);
            ids.extend_from_slice(&parent.ids);
            ids.push(t);
            if t == EOS {
                finished.push(Hypothesis::new(ids, score, parent.prefix_score));
            } else {
                next.push(Partial {
                    ids,
                    score,
                    prefix_score: parent.prefix_score,
                    state: outputs[pi].clone(),
                });
            }
        }
        live = next;
    }

    finished.sort_by(|a, b| {
        rank(
            a.ranking_score(config.length_norm),
            &a.ids,
            b.ranking_score(config.length_norm),
            &b.ids,
        )
    });
    Ok(finished)
}
