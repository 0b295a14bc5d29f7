use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Token granularity. Normalization uses characters, modernization words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenMode {
    Char,
    Word,
}

impl fmt::Display for TokenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenMode::Char => "char",
            TokenMode::Word => "word",
        })
    }
}

impl TokenMode {
    /// Splits text into token strings: Unicode scalar values or
    /// whitespace-separated words.
    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self {
            TokenMode::Char => text
                .char_indices()
                .map(|(i, c)| &text[i..i + c.len_utf8()])
                .collect(),
            TokenMode::Word => text.split_whitespace().collect(),
        }
    }
}

/// Bijection between token strings and ids. Ids 0..=3 are PAD, BOS, EOS, UNK.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    mode: TokenMode,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from one side of a corpus. Tokens are ordered by
    /// frequency (descending) then lexicographically.
    pub fn build<'a, I>(lines: I, mode: TokenMode, min_freq: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let min_freq = min_freq.max(1);
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for line in lines {
            for tok in mode.split(line) {
                if tok == "\n" || tok == "\r" || RESERVED.contains(&tok) {
                    continue;
                }
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_freq).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Self::from_tokens(mode, tokens).expect("built vocabulary is well formed")
    }

    /// Rebuilds a vocabulary from its ordered token list (reserved first).
    pub fn from_tokens(mode: TokenMode, tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..4].iter().zip(RESERVED).any(|(a, b)| a != b) {
            return Err(Error::Format("vocabulary must start with <pad>, <s>, </s>, <unk>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.contains('\n') {
                return Err(Error::Format(format!("invalid vocabulary token {t:?}")));
            }
            if mode == TokenMode::Char && i >= 4 && t.chars().count() != 1 {
                return Err(Error::Format(format!("char vocabulary token {t:?} is not one character")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { mode, tokens, index })
    }

    pub fn mode(&self) -> TokenMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Result<&str> {
        self.tokens
            .get(id)
            .map(String::as_str)
            .ok_or(Error::Index { index: id, len: self.tokens.len() })
    }

    pub fn is_reserved(id: usize) -> bool {
        id < RESERVED.len()
    }

    /// `BOS + ids + EOS`; unknown tokens become UNK.
    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        let mut ids = Vec::with_capacity(text.len() + 2);
        ids.push(BOS);
        ids.extend(self.mode.split(text).into_iter().map(|t| self.id_or_unk(t)));
        ids.push(EOS);
        ids
    }

    /// Renders ids to text, dropping PAD/BOS/EOS. Word tokens are joined by
    /// single spaces.
    pub fn detokenize(&self, ids: &[usize]) -> Result<String> {
        let mut parts = Vec::with_capacity(ids.len());
        for &id in ids {
            let tok = self.token(id)?;
            if matches!(id, PAD | BOS | EOS) {
                continue;
            }
            parts.push(tok);
        }
        Ok(match self.mode {
            TokenMode::Char => parts.concat(),
            TokenMode::Word => parts.join(" "),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    mode: TokenMode,
    tokens: Vec<String>,
}

impl Serialize for Vocabulary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VocabRepr {
            mode: self.mode,
            tokens: self.tokens.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = VocabRepr::deserialize(d)?;
        Vocabulary::from_tokens(repr.mode, repr.tokens).map_err(serde::de::Error::custom)
    }
}
