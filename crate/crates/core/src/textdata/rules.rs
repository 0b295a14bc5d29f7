//! Character rewrite rules that turn modern text into an old-spelling
//! variant, and the synthetic corpus generator built on them.

use std::path::Path;

use rand::Rng as _;

use super::corpus::ParallelCorpus;
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Rng};

/// The shipped early-modern Spanish rule set.
pub const DEFAULT_RULES: &str = include_str!("../../assets/rules/early_modern_es.v1.tsv");

#[derive(Clone, Debug, PartialEq)]
pub struct Pattern {
    pub literal: String,
    pub word_start: bool,
    pub word_end: bool,
}

impl Pattern {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let (word_start, rest) = match text.strip_prefix('^') {
            Some(r) => (true, r),
            None => (false, text),
        };
        let (word_end, literal) = match rest.strip_suffix('$') {
            Some(r) => (true, r),
            None => (false, rest),
        };
        if literal.is_empty() {
            return Err(format!("pattern {text:?} has no literal part"));
        }
        if literal.contains(['^', '$']) {
            return Err(format!("pattern {text:?}: anchors are only allowed at the ends"));
        }
        if literal.chars().any(char::is_whitespace) {
            return Err(format!("pattern {text:?} contains whitespace"));
        }
        Ok(Pattern {
            literal: literal.to_string(),
            word_start,
            word_end,
        })
    }

    /// Whether the pattern matches `text` at byte offset `at`.
    fn matches_at(&self, text: &str, at: usize) -> bool {
        if !text[at..].starts_with(&self.literal) {
            return false;
        }
        if self.word_start && text[..at].chars().next_back().is_some_and(char::is_alphanumeric) {
            return false;
        }
        let end = at + self.literal.len();
        if self.word_end && text[end..].chars().next().is_some_and(char::is_alphanumeric) {
            return false;
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub pattern: Pattern,
    pub replacement: String,
    pub probability: f64,
}

/// Ordered rewrite rules. Each rule is applied over the whole string,
/// left to right and non-overlapping, before the next rule runs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AntiquationRules {
    rules: Vec<Rule>,
}

impl AntiquationRules {
    pub fn new(rules: Vec<Rule>) -> Result<Self> {
        for (i, r) in rules.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.probability) {
                return Err(Error::RuleParse {
                    line: i + 1,
                    message: format!("probability {} outside [0, 1]", r.probability),
                });
            }
        }
        Ok(AntiquationRules { rules })
    }

    pub fn default_set() -> Self {
        Self::parse(DEFAULT_RULES).expect("shipped rule file parses")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Parses `pattern TAB replacement TAB probability` lines; blank lines
    /// and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| Error::RuleParse { line: line_no, message };
            let fields: Vec<&str> = line.split('\t').collect();
            let [pat, rep, prob] = fields.as_slice() else {
                return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let pattern = Pattern::parse(pat).map_err(err)?;
            let probability: f64 = prob
                .trim()
                .parse()
                .map_err(|_| err(format!("bad probability {prob:?}")))?;
            if !(0.0..=1.0).contains(&probability) {
                return Err(err(format!("probability {probability} outside [0, 1]")));
            }
            rules.push(Rule {
                pattern,
                replacement: rep.to_string(),
                probability,
            });
        }
        Ok(AntiquationRules { rules })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Rewrites one line. Probabilistic rules draw once per match; rules
    /// with probability 0 or 1 never draw.
    pub fn apply(&self, text: &str, rng: &mut Rng) -> String {
        let mut current = text.to_string();
        for rule in &self.rules {
            let mut out = String::with_capacity(current.len());
            let mut at = 0;
            while at < current.len() {
                if rule.pattern.matches_at(&current, at) && fires(rule.probability, rng) {
                    out.push_str(&rule.replacement);
                    at += rule.pattern.literal.len();
                } else {
                    let c = current[at..].chars().next().expect("in bounds");
                    out.push(c);
                    at += c.len_utf8();
                }
            }
            current = out;
        }
        current
    }
}

fn fires(p: f64, rng: &mut Rng) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.gen::<f64>() < p
    }
}

/// Pairs each non-empty modern line (target) with its rewritten form (source).
pub fn gen_synthetic_corpus(modern_lines: &[String], rules: &AntiquationRules, seed: u64) -> ParallelCorpus {
    let mut rng = seeded_rng(seed);
    let pairs = modern_lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| (rules.apply(l, &mut rng), l.clone()))
        .collect();
    ParallelCorpus::new(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(rule: &str) -> AntiquationRules {
        AntiquationRules::parse(rule).unwrap()
    }

    #[test]
    fn identity_rules() {
        let lines = vec!["uno dos".to_string(), "tres".to_string()];
        let c = gen_synthetic_corpus(&lines, &AntiquationRules::default(), 1);
        assert!(c.pairs().iter().all(|(s, t)| s == t));
    }

    #[test]
    fn forced_word_initial_rule() {
        let r = one("^u\tv\t1.0\n");
        let c = gen_synthetic_corpus(&["uno".to_string()], &r, 0);
        assert_eq!(c.pairs()[0], ("vno".to_string(), "uno".to_string()));
        let mut rng = seeded_rng(0);
        assert_eq!(r.apply("un uno mundo", &mut rng), "vn vno mundo");
    }

    #[test]
    fn word_end_anchor() {
        let r = one("y$\ti\t1\n");
        let mut rng = seeded_rng(0);
        assert_eq!(r.apply("muy yo rey", &mut rng), "mui yo rei");
    }

    #[test]
    fn rules_apply_in_order_without_overlap() {
        let r = one("v\tu\t1\n^u\tv\t1\n");
        let mut rng = seeded_rng(0);
        assert_eq!(r.apply("uva nueva vida", &mut rng), "vua nueua vida");
        let r = one("aa\tb\t1\n");
        assert_eq!(r.apply("aaa", &mut rng), "ba");
    }

    #[test]
    fn empty_replacement_deletes() {
        let r = one("^h\t\t1\n");
        let mut rng = seeded_rng(0);
        assert_eq!(r.apply("hombre ahora", &mut rng), "ombre ahora");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let r = one("s\tſ\t0.5\nb\tv\t0.5\n");
        let lines: Vec<String> = (0..100).map(|i| format!("sabes {i} besos libros")).collect();
        let a = gen_synthetic_corpus(&lines, &r, 42);
        let b = gen_synthetic_corpus(&lines, &r, 42);
        assert_eq!(a, b);
        assert!(a.pairs().iter().any(|(s, _)| s.contains('ſ')));
        assert!(a.pairs().iter().any(|(s, _)| s.contains("sabes")));
    }

    #[test]
    fn targets_equal_inputs() {
        let lines: Vec<String> = ["la vida es buena", "", "cuando hay ceniza"].iter().map(|s| s.to_string()).collect();
        let c = gen_synthetic_corpus(&lines, &AntiquationRules::default_set(), 3);
        let targets: Vec<&str> = c.targets().collect();
        assert_eq!(targets, vec!["la vida es buena", "cuando hay ceniza"]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = AntiquationRules::parse("# header\nu\tv\n").unwrap_err();
        assert!(matches!(e, Error::RuleParse { line: 2, .. }), "{e}");
        let e = AntiquationRules::parse("u\tv\t1.5\n").unwrap_err();
        assert!(matches!(e, Error::RuleParse { line: 1, .. }));
        let e = AntiquationRules::parse("\n\na^b\tv\t1\n").unwrap_err();
        assert!(matches!(e, Error::RuleParse { line: 3, .. }));
        let e = AntiquationRules::parse("^$\tv\t1\n").unwrap_err();
        assert!(matches!(e, Error::RuleParse { line: 1, .. }));
    }

    #[test]
    fn shipped_rule_set_size() {
        let r = AntiquationRules::default_set();
        assert!((8..=12).contains(&r.len()), "{}", r.len());
    }
}
