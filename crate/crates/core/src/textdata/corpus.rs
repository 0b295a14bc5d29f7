use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Sentence-aligned pairs: `(source, target)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    pairs: Vec<(String, String)>,
}

impl ParallelCorpus {
    /// Pairs with an empty side are dropped.
    pub fn new(pairs: Vec<(String, String)>) -> Self {
        let pairs = pairs
            .into_iter()
            .filter(|(s, t)| !s.trim().is_empty() && !t.trim().is_empty())
            .collect();
        ParallelCorpus { pairs }
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(s, _)| s.as_str())
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(_, t)| t.as_str())
    }

    /// Splits off the last `n` pairs.
    pub fn split_tail(&self, n: usize) -> (ParallelCorpus, ParallelCorpus) {
        let cut = self.pairs.len().saturating_sub(n);
        (
            ParallelCorpus { pairs: self.pairs[..cut].to_vec() },
            ParallelCorpus { pairs: self.pairs[cut..].to_vec() },
        )
    }

    /// Loads two line-aligned UTF-8 files.
    pub fn load(source: &Path, target: &Path) -> Result<Self> {
        let src = read_lines(source)?;
        let tgt = read_lines(target)?;
        if src.len() != tgt.len() {
            return Err(Error::Corpus(format!(
                "{} has {} lines but {} has {}",
                source.display(),
                src.len(),
                target.display(),
                tgt.len()
            )));
        }
        Ok(ParallelCorpus::new(src.into_iter().zip(tgt).collect()))
    }

    pub fn save(&self, source: &Path, target: &Path) -> Result<()> {
        write_lines(source, self.sources())?;
        write_lines(target, self.targets())
    }
}

/// Reads a UTF-8 file as lines, tolerating CRLF endings.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect())
}

pub fn write_lines<'a>(path: &Path, lines: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(l);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_preserves_order_and_drops_empty_pairs() {
        let dir = tempdir();
        let (s, t) = (dir.join("s.txt"), dir.join("t.txt"));
        fs::write(&s, "vno\n\ndixo\r\n").unwrap();
        fs::write(&t, "uno\nx\ndijo\n").unwrap();
        let c = ParallelCorpus::load(&s, &t).unwrap();
        assert_eq!(
            c.pairs(),
            &[("vno".to_string(), "uno".to_string()), ("dixo".into(), "dijo".into())]
        );

        c.save(&s, &t).unwrap();
        assert_eq!(ParallelCorpus::load(&s, &t).unwrap(), c);
    }

    #[test]
    fn mismatched_line_counts_rejected() {
        let dir = tempdir();
        let (s, t) = (dir.join("s.txt"), dir.join("t.txt"));
        fs::write(&s, "a\nb\n").unwrap();
        fs::write(&t, "a\n").unwrap();
        assert!(matches!(ParallelCorpus::load(&s, &t), Err(Error::Corpus(_))));
    }

    #[test]
    fn missing_file_names_path() {
        let err = ParallelCorpus::load(Path::new("/nonexistent/s"), Path::new("/nonexistent/t")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/s"));
    }

    fn tempdir() -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("mthd-corpus-{}-{:?}", std::process::id(), std::thread::current().id()));
        fs::create_dir_all(&d).unwrap();
        d
    }
}
