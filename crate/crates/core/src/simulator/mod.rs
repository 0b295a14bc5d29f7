//! Simulated-user evaluation of the correction loop.
//!
//! The simulated user knows the reference. In interactive mode it validates
//! the longest correct prefix of each hypothesis plus one typed character
//! and asks for a new hypothesis; in static mode it post-edits the first
//! hypothesis by overwriting it left to right.

mod engine;
mod remote;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textdata::ParallelCorpus;

pub use engine::{InteractiveEngine, LocalEngine};
pub use remote::RemoteEngine;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Interactive,
    Static,
}

impl FromStr for SimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interactive" => Ok(SimMode::Interactive),
            "static" => Ok(SimMode::Static),
            other => Err(Error::Config(format!("unknown simulation mode {other:?}"))),
        }
    }
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimMode::Interactive => "interactive",
            SimMode::Static => "static",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionTrace {
    /// Hypotheses shown, the first one included.
    pub rounds: usize,
    pub keystrokes: usize,
    pub mouse_actions: usize,
    pub final_hypothesis: String,
    pub reference_chars: usize,
}

fn common_prefix(a: &[char], b: &[char]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Runs one sentence. Neither mode validates into the engine; that is left
/// to [`run_mode`].
pub fn simulate_sentence<E: InteractiveEngine + ?Sized>(
    engine: &mut E,
    source: &str,
    reference: &str,
    mode: SimMode,
) -> Result<InteractionTrace> {
    let reference_chars: Vec<char> = reference.chars().collect();
    if reference_chars.is_empty() {
        return Err(Error::Sample("empty reference".into()));
    }
    let mut hyp = engine.translate(source)?;
    let mut trace = InteractionTrace {
        rounds: 1,
        keystrokes: 0,
        mouse_actions: 0,
        final_hypothesis: String::new(),
        reference_chars: reference_chars.len(),
    };

    match mode {
        SimMode::Static => {
            let h: Vec<char> = hyp.chars().collect();
            let lcp = common_prefix(&h, &reference_chars);
            trace.keystrokes = (reference_chars.len() - lcp) + h.len().saturating_sub(reference_chars.len());
            trace.mouse_actions = usize::from(trace.keystrokes > 0) + 1;
        }
        SimMode::Interactive => loop {
            let h: Vec<char> = hyp.chars().collect();
            if h == reference_chars {
                trace.mouse_actions += 1;
                break;
            }
            let lcp = common_prefix(&h, &reference_chars);
            if lcp == reference_chars.len() {
                // The reference is a proper prefix: delete the tail, validate.
                trace.keystrokes += h.len() - lcp;
                trace.mouse_actions += 2;
                break;
            }
            let prefix: String = reference_chars[..=lcp].iter().collect();
            trace.keystrokes += 1;
            trace.mouse_actions += 1;
            let next = engine.correct(source, &prefix)?;
            trace.rounds += 1;
            // The typed prefix stays on screen whatever the engine returns.
            hyp = if next.starts_with(&prefix) { next } else { prefix };
        },
    }
    trace.final_hypothesis = reference.to_string();
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceResult {
    pub index: usize,
    #[serde(flatten)]
    pub trace: Option<InteractionTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub sentences: usize,
    pub failures: usize,
    pub rounds: usize,
    pub keystrokes: usize,
    pub mouse_actions: usize,
    pub reference_chars: usize,
    pub ksmr: f64,
    pub mean_keystrokes: f64,
}

impl ModeSummary {
    fn from_results(results: &[SentenceResult]) -> Self {
        let mut s = ModeSummary {
            sentences: results.len(),
            ..Default::default()
        };
        for t in results.iter().filter_map(|r| r.trace.as_ref()) {
            s.rounds += t.rounds;
            s.keystrokes += t.keystrokes;
            s.mouse_actions += t.mouse_actions;
            s.reference_chars += t.reference_chars;
        }
        s.failures = results.iter().filter(|r| r.error.is_some()).count();
        let ok = s.sentences - s.failures;
        if s.reference_chars > 0 {
            s.ksmr = (s.keystrokes + s.mouse_actions) as f64 / s.reference_chars as f64;
        }
        if ok > 0 {
            s.mean_keystrokes = s.keystrokes as f64 / ok as f64;
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub summary: ModeSummary,
    pub sentences: Vec<SentenceResult>,
}

/// Processes the corpus in order. After each finished sentence the
/// reference is validated into the engine, with learning iff `adapt`.
/// Engine failures are recorded per sentence and the run continues.
pub fn run_mode<E: InteractiveEngine + ?Sized>(
    engine: &mut E,
    corpus: &ParallelCorpus,
    mode: SimMode,
    adapt: bool,
) -> Result<ModeReport> {
    if corpus.is_empty() {
        return Err(Error::Corpus("empty_corpus".into()));
    }
    let mut sentences = Vec::with_capacity(corpus.len());
    for (index, (source, reference)) in corpus.pairs().iter().enumerate() {
        let outcome = simulate_sentence(engine, source, reference, mode)
            .and_then(|trace| engine.validate(source, reference, adapt).map(|()| trace));
        sentences.push(match outcome {
            Ok(trace) => SentenceResult {
                index,
                trace: Some(trace),
                error: None,
            },
            Err(e) => SentenceResult {
                index,
                trace: None,
                error: Some(Error::Engine { index, message: e.to_string() }.to_string()),
            },
        });
    }
    Ok(ModeReport {
        summary: ModeSummary::from_results(&sentences),
        sentences,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EffortReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_post_edit: Option<ModeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interactive: Option<ModeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interactive_adaptive: Option<ModeReport>,
}

/// Runs each requested mode on a fresh engine from `make_engine`. With
/// `adapt`, interactive mode learns from every validated sentence and is
/// reported as `interactive_adaptive`; static post-editing never learns.
pub fn run_benchmark<E, F>(mut make_engine: F, corpus: &ParallelCorpus, modes: &[SimMode], adapt: bool) -> Result<EffortReport>
where
    E: InteractiveEngine,
    F: FnMut() -> Result<E>,
{
    if corpus.is_empty() {
        return Err(Error::Corpus("empty_corpus".into()));
    }
    let mut report = EffortReport::default();
    for &mode in modes {
        let mut engine = make_engine()?;
        match mode {
            SimMode::Static => report.static_post_edit = Some(run_mode(&mut engine, corpus, mode, false)?),
            SimMode::Interactive if adapt => {
                report.interactive_adaptive = Some(run_mode(&mut engine, corpus, mode, true)?)
            }
            SimMode::Interactive => report.interactive = Some(run_mode(&mut engine, corpus, mode, false)?),
        }
    }
    Ok(report)
}
