//! Character trigram language model with additive smoothing that backs off
//! to bigram and unigram estimates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Padding symbol for positions before the first character.
pub const BOS: char = '^';

pub const DEFAULT_ALPHA: f64 = 0.1;

pub type TrigramCounts = BTreeMap<[char; 3], u64>;

#[derive(Clone, Debug)]
pub struct LanguageModel {
    alpha: f64,
    vocab: BTreeSet<char>,
    tri: HashMap<[char; 3], f64>,
    ctx2: HashMap<[char; 2], f64>,
    bi: HashMap<[char; 2], f64>,
    ctx1: HashMap<char, f64>,
    uni: HashMap<char, f64>,
    total: f64,
}

/// Trigrams of `word` padded with two [`BOS`] symbols.
pub fn word_trigrams(word: &str) -> Vec<[char; 3]> {
    let mut chars = vec![BOS, BOS];
    chars.extend(word.chars());
    chars.windows(3).map(|w| [w[0], w[1], w[2]]).collect()
}

pub fn count_words<'a>(words: impl IntoIterator<Item = &'a str>) -> TrigramCounts {
    let mut counts = TrigramCounts::new();
    for w in words {
        for t in word_trigrams(w) {
            *counts.entry(t).or_default() += 1;
        }
    }
    counts
}

impl LanguageModel {
    /// Model over `vocab` plus every character predicted in `counts`.
    pub fn new(counts: &TrigramCounts, vocab: impl IntoIterator<Item = char>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "smoothing constant must be positive, got {alpha}"
            )));
        }
        let mut v: BTreeSet<char> = vocab.into_iter().collect();
        let mut lm = Self {
            alpha,
            vocab: BTreeSet::new(),
            tri: HashMap::new(),
            ctx2: HashMap::new(),
            bi: HashMap::new(),
            ctx1: HashMap::new(),
            uni: HashMap::new(),
            total: 0.0,
        };
        for (&[a, b, c], &n) in counts {
            if c == BOS {
                return Err(Error::InvalidInput(format!(
                    "padding symbol predicted in trigram {a}{b}{c}"
                )));
            }
            let n = n as f64;
            v.insert(c);
            *lm.tri.entry([a, b, c]).or_default() += n;
            *lm.ctx2.entry([a, b]).or_default() += n;
            *lm.bi.entry([b, c]).or_default() += n;
            *lm.ctx1.entry(b).or_default() += n;
            *lm.uni.entry(c).or_default() += n;
            lm.total += n;
        }
        v.remove(&BOS);
        if v.is_empty() {
            return Err(Error::InvalidInput("language model vocabulary is empty".into()));
        }
        lm.vocab = v;
        Ok(lm)
    }

    /// A model with no observations: uniform over `vocab`.
    pub fn uniform(vocab: impl IntoIterator<Item = char>) -> Result<Self> {
        Self::new(&TrigramCounts::new(), vocab, DEFAULT_ALPHA)
    }

    pub fn vocab(&self) -> &BTreeSet<char> {
        &self.vocab
    }

    fn unigram(&self, c: char) -> f64 {
        let v = self.vocab.len() as f64;
        (self.uni.get(&c).copied().unwrap_or(0.0) + self.alpha) / (self.total + self.alpha * v)
    }

    fn bigram(&self, b: char, c: char) -> f64 {
        let av = self.alpha * self.vocab.len() as f64;
        let n = self.bi.get(&[b, c]).copied().unwrap_or(0.0);
        let ctx = self.ctx1.get(&b).copied().unwrap_or(0.0);
        (n + av * self.unigram(c)) / (ctx + av)
    }

    /// p(c | a, b) where `a`, `b` are the two preceding characters.
    pub fn probability(&self, a: char, b: char, c: char) -> f64 {
        let av = self.alpha * self.vocab.len() as f64;
        let n = self.tri.get(&[a, b, c]).copied().unwrap_or(0.0);
        let ctx = self.ctx2.get(&[a, b]).copied().unwrap_or(0.0);
        (n + av * self.bigram(b, c)) / (ctx + av)
    }

    /// −ln p(c | a, b).
    pub fn cost(&self, a: char, b: char, c: char) -> f64 {
        -self.probability(a, b, c).ln()
    }

    /// Parse `trigram<TAB>count` lines; blank lines and `#` comments are skipped.
    pub fn parse_counts(text: &str, path: &Path) -> Result<TrigramCounts> {
        let mut counts = TrigramCounts::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::Parse {
                what: "trigram counts",
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (gram, count) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected trigram<TAB>count".into()))?;
            let chars: Vec<char> = gram.chars().collect();
            let key: [char; 3] = chars
                .try_into()
                .map_err(|_| bad(format!("{gram:?} is not three characters")))?;
            let n: u64 = count.trim().parse().map_err(|e| bad(format!("count {count:?}: {e}")))?;
            *counts.entry(key).or_default() += n;
        }
        Ok(counts)
    }

    pub fn format_counts(counts: &TrigramCounts) -> String {
        let mut s = String::new();
        for (k, n) in counts {
            s.extend(k.iter());
            s.push('\t');
            s.push_str(&n.to_string());
            s.push('\n');
        }
        s
    }

    pub fn load(path: &Path, vocab: impl IntoIterator<Item = char>, alpha: f64) -> Result<Self> {
        let counts = Self::parse_counts(&fs::read_to_string(path)?, path)?;
        Self::new(&counts, vocab, alpha)
    }
}
