//! Bag-of-words counts and log-odds ratios with informative Dirichlet
//! priors.
//!
//! For a word `w`, target class `i` and comparison class `j`:
//!
//! ```text
//! delta = ln((y_i + a_w) / (n_i + a_0 - y_i + a_w)) - ln((y_j + a_w) / (n_j + a_0 - y_j + a_w))
//! ```
//!
//! where `a_w` is the pooled count of `w` over all classes and `a_0` the
//! pooled total. [`LogOddsForm::Conventional`] subtracts `a_w` in the
//! denominators instead.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::str::FromStr;
use std::sync::LazyLock;

static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").expect("url regex"));

fn stopword_set(list: &'static str) -> HashSet<&'static str> {
    list.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

static STOPWORDS: LazyLock<BTreeMap<&'static str, HashSet<&'static str>>> = LazyLock::new(|| {
    BTreeMap::from([
        ("de", stopword_set(include_str!("stopwords/de.txt"))),
        ("en", stopword_set(include_str!("stopwords/en.txt"))),
        ("es", stopword_set(include_str!("stopwords/es.txt"))),
        ("fr", stopword_set(include_str!("stopwords/fr.txt"))),
        ("pt", stopword_set(include_str!("stopwords/pt.txt"))),
    ])
});

/// Lowercased word tokens of at least two characters. URLs are removed,
/// `#` is treated as a separator so hashtags count as plain words, purely
/// numeric tokens are dropped, and stopwords are dropped when the language
/// has a bundled list.
pub fn tokenize(text: &str, lang: Option<&str>) -> Vec<String> {
    let stripped = URL.replace_all(text, " ");
    let stop = lang.and_then(|l| STOPWORDS.get(l));
    stripped
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .filter(|t| !t.chars().all(|c| c.is_numeric()))
        .map(str::to_lowercase)
        .filter(|t| stop.is_none_or(|s| !s.contains(t.as_str())))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCounts {
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl WordCounts {
    pub fn from_counts<S: Into<String>>(counts: impl IntoIterator<Item = (S, u64)>) -> Self {
        let mut out = WordCounts::default();
        for (w, n) in counts {
            out.add(w.into(), n);
        }
        out
    }

    pub fn add(&mut self, word: String, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(word).or_default() += n;
        self.total += n;
    }

    pub fn add_tokens(&mut self, tokens: impl IntoIterator<Item = String>) {
        for t in tokens {
            self.add(t, 1);
        }
    }

    pub fn merge(&mut self, other: &WordCounts) {
        for (w, &n) in &other.counts {
            self.add(w.clone(), n);
        }
    }

    pub fn get(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogOddsForm {
    /// `n + a_0 - y + a_w` denominators.
    #[default]
    AsPrinted,
    /// `n + a_0 - y - a_w` denominators.
    Conventional,
}

impl FromStr for LogOddsForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as_printed" => Ok(LogOddsForm::AsPrinted),
            "conventional" => Ok(LogOddsForm::Conventional),
            other => Err(format!("log-odds form must be as_printed or conventional, got {other:?}")),
        }
    }
}

/// Raw delta for one word. Not variance-normalised.
pub fn log_odds_delta(y_i: f64, n_i: f64, y_j: f64, n_j: f64, a_w: f64, a_0: f64, form: LogOddsForm) -> f64 {
    let side = |y: f64, n: f64| match form {
        LogOddsForm::AsPrinted => ((y + a_w) / (n + a_0 - y + a_w)).ln(),
        LogOddsForm::Conventional => ((y + a_w) / (n + a_0 - y - a_w)).ln(),
    };
    side(y_i, n_i) - side(y_j, n_j)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordDelta {
    pub word: String,
    pub delta: f64,
    /// Occurrences in the target corpus.
    pub count: u64,
}

/// Delta for every word present in `target` or `rest`, sorted by delta
/// descending, ties by word. `prior` supplies `a_w` and `a_0`.
pub fn log_odds(target: &WordCounts, rest: &WordCounts, prior: &WordCounts, form: LogOddsForm) -> Vec<WordDelta> {
    let a_0 = prior.total as f64;
    let words: std::collections::BTreeSet<&String> = target.counts.keys().chain(rest.counts.keys()).collect();
    let mut out: Vec<WordDelta> = words
        .into_iter()
        .map(|w| {
            let y_i = target.get(w);
            let delta = log_odds_delta(
                y_i as f64,
                target.total as f64,
                rest.get(w) as f64,
                rest.total as f64,
                prior.get(w) as f64,
                a_0,
                form,
            );
            WordDelta { word: w.clone(), delta, count: y_i }
        })
        .collect();
    out.sort_by(|a, b| b.delta.total_cmp(&a.delta).then_with(|| a.word.cmp(&b.word)));
    out
}

pub fn write_lexicon_csv<'a, W: std::io::Write>(
    rows: impl IntoIterator<Item = (usize, &'a [WordDelta])>,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["community", "word", "delta", "count"])?;
    for (community, deltas) in rows {
        for d in deltas {
            w.write_record([community.to_string(), d.word.clone(), d.delta.to_string(), d.count.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_rules() {
        let toks = tokenize("The #Election results: https://x.com/a?b=1 are IN, 2024 a b c'd", Some("en"));
        assert_eq!(toks, vec!["election", "results"]);
        let toks = tokenize("The results", None);
        assert_eq!(toks, vec!["the", "results"]);
        assert_eq!(tokenize("Überraschung für alle", Some("de")), vec!["überraschung", "alle"]);
    }

    #[test]
    fn worked_example() {
        let delta = log_odds_delta(3.0, 10.0, 1.0, 10.0, 4.0, 20.0, LogOddsForm::AsPrinted);
        let oracle = (7.0f64 / 31.0).ln() - (5.0f64 / 33.0).ln();
        assert!((delta - oracle).abs() < 1e-12);
        let conventional = log_odds_delta(3.0, 10.0, 1.0, 10.0, 4.0, 20.0, LogOddsForm::Conventional);
        assert!((conventional - ((7.0f64 / 23.0).ln() - (5.0f64 / 25.0).ln())).abs() < 1e-12);
    }

    #[test]
    fn identical_corpora_give_zero() {
        let c = WordCounts::from_counts([("news", 4), ("vote", 2)]);
        let mut prior = c.clone();
        prior.merge(&c);
        assert!(log_odds(&c, &c, &prior, LogOddsForm::AsPrinted).iter().all(|d| d.delta == 0.0));
    }

    #[test]
    fn target_only_word_is_positive_and_first() {
        let target = WordCounts::from_counts([("mine", 3), ("shared", 2)]);
        let rest = WordCounts::from_counts([("shared", 2), ("theirs", 3)]);
        let mut prior = target.clone();
        prior.merge(&rest);
        let out = log_odds(&target, &rest, &prior, LogOddsForm::AsPrinted);
        assert_eq!(out[0].word, "mine");
        assert!(out[0].delta > 0.0);
        assert_eq!(out.last().unwrap().word, "theirs");
    }
}
