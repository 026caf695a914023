//! Class-conditional tf-idf: each class corpus is one document, so a word's
//! idf is `ln(2 / df)` with `df` the number of classes using it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzyindex::EditDistanceIndex;
use crate::textprep::TokenizedText;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WordScores {
    pub abuse: f64,
    pub nonabuse: f64,
    /// Number of class corpora (1 or 2) containing the word.
    pub df: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    pub words: BTreeMap<String, WordScores>,
    pub abuse_tokens: usize,
    pub nonabuse_tokens: usize,
}

impl TfIdfModel {
    pub fn train(abuse: &[&TokenizedText], nonabuse: &[&TokenizedText]) -> Result<Self> {
        fn count<'a>(docs: &[&'a TokenizedText]) -> (BTreeMap<&'a str, usize>, usize) {
            let mut counts: BTreeMap<&'a str, usize> = BTreeMap::new();
            let mut total = 0;
            for d in docs {
                for t in &d.tokens {
                    *counts.entry(t.as_str()).or_default() += 1;
                    total += 1;
                }
            }
            (counts, total)
        }
        let (abuse_counts, abuse_total) = count(abuse);
        let (non_counts, non_total) = count(nonabuse);
        if abuse_total == 0 || non_total == 0 {
            return Err(Error::InsufficientData(
                "tf-idf needs tokens in both the abuse and non-abuse corpora".into(),
            ));
        }

        let mut words = BTreeMap::new();
        for w in abuse_counts.keys().chain(non_counts.keys()) {
            if words.contains_key(*w) {
                continue;
            }
            let a = abuse_counts.get(w).copied().unwrap_or(0);
            let n = non_counts.get(w).copied().unwrap_or(0);
            let df = u8::from(a > 0) + u8::from(n > 0);
            let idf = (2.0 / f64::from(df)).ln();
            words.insert(
                w.to_string(),
                WordScores {
                    abuse: a as f64 / abuse_total as f64 * idf,
                    nonabuse: n as f64 / non_total as f64 * idf,
                    df,
                },
            );
        }
        Ok(Self {
            words,
            abuse_tokens: abuse_total,
            nonabuse_tokens: non_total,
        })
    }

    pub fn get(&self, word: &str) -> Option<&WordScores> {
        self.words.get(word)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.words.keys().map(String::as_str)
    }

    pub fn build_index(&self) -> EditDistanceIndex {
        EditDistanceIndex::build(self.vocabulary())
    }

    /// Scores of a word, falling back to the unweighted mean over known words
    /// within `dmax` edits when it is out of vocabulary.
    pub fn lookup(&self, word: &str, index: &EditDistanceIndex, dmax: usize) -> (f64, f64) {
        if let Some(s) = self.words.get(word) {
            return (s.abuse, s.nonabuse);
        }
        let neighbors = index.query_within(word, dmax);
        if neighbors.is_empty() {
            return (0.0, 0.0);
        }
        let (a, n) = neighbors.iter().fold((0.0, 0.0), |(a, n), (w, _)| {
            let s = &self.words[w];
            (a + s.abuse, n + s.nonabuse)
        });
        let k = neighbors.len() as f64;
        (a / k, n / k)
    }

    /// (abuse sum, non-abuse sum) over the tokens of one message.
    pub fn sums(&self, tokens: &TokenizedText, index: &EditDistanceIndex, dmax: usize) -> (f64, f64) {
        tokens.tokens.iter().fold((0.0, 0.0), |(a, n), t| {
            let (ta, tn) = self.lookup(t, index, dmax);
            (a + ta, n + tn)
        })
    }
}

/// Trained tf-idf tables with the edit-distance index over their vocabulary.
#[derive(Debug, Clone)]
pub struct TfIdfScorer {
    pub model: TfIdfModel,
    pub index: EditDistanceIndex,
    pub dmax: usize,
}

impl TfIdfScorer {
    pub fn new(model: TfIdfModel, dmax: usize) -> Self {
        let index = model.build_index();
        Self { model, index, dmax }
    }

    pub fn sums(&self, tokens: &TokenizedText) -> (f64, f64) {
        self.model.sums(tokens, &self.index, self.dmax)
    }
}
