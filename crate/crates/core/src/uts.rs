//! Unsupervised text similarity: a distribution over target states from a
//! record's free-text descriptions.
//!
//! Descriptions are tokenized into word n-grams, each n-gram weighted by the
//! fraction of descriptions containing it. Each state label is matched to
//! its most similar n-gram by Jaro-Winkler similarity, the similarity is
//! scaled by that n-gram's frequency, and the scores go through a softmax.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::GlobalAttributeSpec;

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Tokenized, space-joined form used to compare labels with n-grams.
pub fn normalize_label(label: &str) -> String {
    tokenize(label).join(" ")
}

/// Word n-grams of one record with their description frequencies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NgramIndex {
    description_count: usize,
    counts: BTreeMap<String, usize>,
}

impl NgramIndex {
    /// Number of descriptions the index was built from (`r_l`).
    pub fn description_count(&self) -> usize {
        self.description_count
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Fraction of descriptions containing `ngram`; 0 when absent.
    pub fn frequency(&self, ngram: &str) -> f64 {
        self.counts
            .get(ngram)
            .map_or(0.0, |&c| c as f64 / self.description_count as f64)
    }

    /// `(ngram, frequency)` pairs in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        let r = self.description_count as f64;
        self.counts
            .iter()
            .map(move |(g, &c)| (g.as_str(), c as f64 / r))
    }
}

/// Collects every contiguous token sequence of length `1..=n_max` from each
/// description. An empty description list gives an empty index.
pub fn extract_ngrams<S: AsRef<str>>(descriptions: &[S], n_max: usize) -> Result<NgramIndex> {
    if n_max == 0 {
        return Err(Error::invalid("n-gram length must be at least 1"));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for d in descriptions {
        let tokens = tokenize(d.as_ref());
        let mut grams = BTreeSet::new();
        for start in 0..tokens.len() {
            for len in 1..=n_max.min(tokens.len() - start) {
                grams.insert(tokens[start..start + len].join(" "));
            }
        }
        for g in grams {
            *counts.entry(g).or_default() += 1;
        }
    }
    Ok(NgramIndex {
        description_count: descriptions.len(),
        counts,
    })
}

/// Winkler prefix scale.
pub const PREFIX_SCALE: f64 = 0.1;
/// Longest common prefix rewarded by the Winkler boost.
pub const PREFIX_CAP: usize = 4;

fn jaro_chars(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut b_used = vec![false; b.len()];
    let mut a_matched = Vec::with_capacity(a.len());
    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_used[j] && b[j] == *ca {
                b_used[j] = true;
                a_matched.push(*ca);
                break;
            }
        }
    }
    let m = a_matched.len();
    if m == 0 {
        return 0.0;
    }
    let b_matched = b.iter().zip(&b_used).filter(|(_, &u)| u).map(|(c, _)| c);
    let half_transpositions = a_matched
        .iter()
        .zip(b_matched)
        .filter(|(x, y)| x != y)
        .count();
    let m = m as f64;
    let t = half_transpositions as f64 / 2.0;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

fn jaro_winkler_chars(a: &[char], b: &[char]) -> f64 {
    // Greedy matching depends on argument order, so fix the order.
    let (a, b) = if (a.len(), a) <= (b.len(), b) {
        (a, b)
    } else {
        (b, a)
    };
    let jaro = jaro_chars(a, b);
    let prefix = a
        .iter()
        .zip(b)
        .take(PREFIX_CAP)
        .take_while(|(x, y)| x == y)
        .count();
    (jaro + prefix as f64 * PREFIX_SCALE * (1.0 - jaro)).clamp(0.0, 1.0)
}

/// Jaro similarity over Unicode scalar values.
pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (a, b) = if (a.len(), &a) <= (b.len(), &b) {
        (a, b)
    } else {
        (b, a)
    };
    jaro_chars(&a, &b)
}

/// Jaro-Winkler similarity in `[0, 1]`: Jaro plus a common-prefix boost of
/// [`PREFIX_SCALE`] per character, up to [`PREFIX_CAP`] characters.
///
/// ```
/// let s = attrfuse::uts::jaro_winkler("martha", "marhta");
/// assert!((s - 0.9611).abs() < 1e-4);
/// ```
pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    jaro_winkler_chars(&a, &b)
}

/// Best-matching n-gram for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatch {
    pub state: usize,
    pub ngram: Option<String>,
    /// Jaro-Winkler similarity of the best n-gram.
    pub similarity: f64,
    /// `similarity` times the best n-gram's frequency.
    pub score: f64,
}

/// Scores every state of `spec` against the index. Among n-grams with the
/// highest similarity, the most frequent wins, then the lexicographically
/// smallest.
pub fn score_states(index: &NgramIndex, spec: &GlobalAttributeSpec) -> Vec<StateMatch> {
    let grams: Vec<(Vec<char>, &str, f64)> = index
        .iter()
        .map(|(g, f)| (g.chars().collect(), g, f))
        .collect();
    spec.states
        .iter()
        .enumerate()
        .map(|(t, label)| {
            let label: Vec<char> = normalize_label(label).chars().collect();
            let mut best: Option<(f64, f64, &str)> = None;
            for (chars, g, f) in &grams {
                let s = jaro_winkler_chars(&label, chars);
                let better = match best {
                    None => true,
                    Some((bs, bf, bg)) => s > bs || (s == bs && (*f > bf || (*f == bf && *g < bg))),
                };
                if better {
                    best = Some((s, *f, g));
                }
            }
            match best {
                Some((s, f, g)) => StateMatch {
                    state: t,
                    ngram: Some(g.to_owned()),
                    similarity: s,
                    score: s * f,
                },
                None => StateMatch {
                    state: t,
                    ngram: None,
                    similarity: 0.0,
                    score: 0.0,
                },
            }
        })
        .collect()
}

/// `exp(s / T)` normalized over states.
pub fn softmax_scale(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if scores.is_empty() {
        return Ok(Vec::new());
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores
        .iter()
        .map(|s| ((s - max) / temperature).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Parameters of the text model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextModel {
    pub ngram_max: usize,
    pub temperature: f64,
}

impl Default for TextModel {
    fn default() -> Self {
        TextModel {
            ngram_max: 3,
            temperature: 1.0,
        }
    }
}

impl TextModel {
    pub fn distribution<S: AsRef<str>>(
        &self,
        descriptions: &[S],
        spec: &GlobalAttributeSpec,
    ) -> Result<Vec<f64>> {
        let index = extract_ngrams(descriptions, self.ngram_max)?;
        let scores: Vec<f64> = score_states(&index, spec).iter().map(|m| m.score).collect();
        softmax_scale(&scores, self.temperature)
    }
}
