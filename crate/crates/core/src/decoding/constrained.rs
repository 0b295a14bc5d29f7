use super::hypothesis::{ConstrainedHypothesis, Feedback};
use super::search::{run_beam, start, BeamConfig};
use crate::error::{Error, Result};
use crate::seq2seq::ModelParams;
use crate::textdata::{TokenMode, Vocabulary, UNK};

/// Splits feedback into teacher-forced ids and a trailing partial-token
/// fragment. Character feedback forces every character; word feedback
/// forces complete whitespace-terminated words and leaves the last,
/// unterminated word as the fragment.
pub fn segment_feedback(feedback: &Feedback, vocab: &Vocabulary) -> (Vec<usize>, String) {
    let prefix = feedback.prefix_chars.as_str();
    match vocab.mode() {
        TokenMode::Char => {
            let ids = vocab.tokenize(prefix);
            (ids[1..ids.len() - 1].to_vec(), String::new())
        }
        TokenMode::Word => {
            let ends_clean = prefix.chars().next_back().map_or(true, char::is_whitespace);
            let mut words: Vec<&str> = prefix.split_whitespace().collect();
            let fragment = if ends_clean { "" } else { words.pop().unwrap_or("") };
            let forced = words.iter().map(|w| vocab.id_or_unk(w)).collect();
            (forced, fragment.to_string())
        }
    }
}

/// Token ids whose string starts with `fragment` (reserved ids never
/// match), or just UNK when nothing does.
pub fn compatible_tokens(fragment: &str, vocab: &Vocabulary) -> Vec<usize> {
    let live: Vec<usize> = vocab
        .tokens()
        .iter()
        .enumerate()
        .filter(|(id, tok)| !Vocabulary::is_reserved(*id) && tok.starts_with(fragment))
        .map(|(id, _)| id)
        .collect();
    if live.is_empty() {
        vec![UNK]
    } else {
        live
    }
}

/// Masks a next-token log-probability vector to the tokens compatible
/// with `fragment`; everything else becomes `-inf`.
pub fn constrained_next_distribution(log_probs: &[f64], fragment: &str, vocab: &Vocabulary) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; log_probs.len()];
    for id in compatible_tokens(fragment, vocab) {
        if id < out.len() {
            out[id] = log_probs[id];
        }
    }
    out
}

/// Best hypothesis whose text starts with the feedback. Forced tokens are
/// teacher-forced (their true log-probs are accumulated), a fragment
/// restricts the next token, then search continues freely.
pub fn prefix_constrained_search(
    model: &ModelParams,
    vocab: &Vocabulary,
    source_ids: &[usize],
    feedback: &Feedback,
    config: &BeamConfig,
) -> Result<ConstrainedHypothesis> {
    if vocab.len() != model.config().vocab_size_tgt {
        return Err(Error::Contract(format!(
            "target vocabulary has {} tokens but the model outputs {}",
            vocab.len(),
            model.config().vocab_size_tgt
        )));
    }
    let (forced, fragment) = segment_feedback(feedback, vocab);
    let needed = forced.len() + usize::from(!fragment.is_empty());
    if needed > config.max_len {
        return Err(Error::ConstraintTooLong {
            tokens: needed,
            max_len: config.max_len,
        });
    }

    let ann = model.encode(source_ids)?;
    let mut cur = start(model, &ann)?;
    for &t in &forced {
        let out = model.decoder_step(&cur.state, *cur.ids.last().unwrap(), &ann)?;
        cur.score += out.log_probs[t];
        cur.ids.push(t);
        cur.state = out.state;
    }
    cur.prefix_score = cur.score;

    let allowed = (!fragment.is_empty()).then(|| compatible_tokens(&fragment, vocab));
    let results = run_beam(model, &ann, cur, allowed.as_deref(), config)?;
    let best = results
        .into_iter()
        .next()
        .ok_or_else(|| Error::Contract("search produced no hypothesis".into()))?;

    let text = render(vocab, &feedback.prefix_chars, &fragment, &best.ids[1 + forced.len()..])?;
    Ok(ConstrainedHypothesis {
        hypothesis: best,
        text,
        forced_len: forced.len(),
    })
}

/// Feedback verbatim, then the remaining tokens. When a fragment was
/// completed, the first token contributes only the part after the
/// fragment (nothing for UNK).
fn render(vocab: &Vocabulary, prefix: &str, fragment: &str, tail: &[usize]) -> Result<String> {
    let mut text = prefix.to_string();
    let mut rest = tail;
    if !fragment.is_empty() {
        if let Some((&first, more)) = tail.split_first() {
            if first != UNK {
                text.push_str(&vocab.token(first)?[fragment.len()..]);
            }
            rest = more;
        }
    }
    let words = vocab.detokenize(rest)?;
    if words.is_empty() {
        return Ok(text);
    }
    let glue = vocab.mode() == TokenMode::Word && !text.is_empty() && !text.ends_with(char::is_whitespace);
    if glue {
        text.push(' ');
    }
    text.push_str(&words);
    Ok(text)
}
