//! Bag-of-words Bernoulli Naive Bayes stage and the linear SVM stage with
//! Platt calibration.

mod bundle;
mod platt;
mod svm;

pub use bundle::{load_model, save_model, ModelScorer, PipelineModel, Scored, FORMAT_VERSION};
pub use platt::{fit_platt, PlattParams};
pub use svm::{svm_decision, train_svm, train_svm_traced, Standardizer, SvmModel, SvmParams};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::textprep::TokenizedText;

/// Sorted distinct training tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(mut words: Vec<String>) -> Self {
        words.sort();
        words.dedup();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

impl Vocabulary {
    pub fn build(train: &[&TokenizedText]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InsufficientData("vocabulary needs at least one training message".into()));
        }
        let words: Vec<String> = train.iter().flat_map(|t| t.tokens.iter().cloned()).collect();
        Ok(words.into())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Presence vector; out-of-vocabulary tokens are dropped.
    pub fn bow(&self, tokens: &TokenizedText) -> BowVector {
        let mut idx: Vec<usize> = tokens.tokens.iter().filter_map(|t| self.index_of(t)).collect();
        idx.sort_unstable();
        idx.dedup();
        BowVector(idx)
    }
}

/// Sorted column indices of the words present in a message.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BowVector(pub Vec<usize>);

/// Bernoulli Naive Bayes with Laplace smoothing. Stores document counts;
/// the log tables are derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "NbCounts", into = "NbCounts")]
pub struct NbModel {
    counts: NbCounts,
    log_prior: [f64; 2],
    /// Per word and class: ln p - ln(1 - p).
    log_odds: Vec<[f64; 2]>,
    /// Per class: sum over the vocabulary of ln(1 - p).
    absent_base: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NbCounts {
    /// Documents per class, abuse first.
    docs: [u64; 2],
    /// Documents containing each word, per class.
    word_docs: Vec<[u64; 2]>,
}

impl From<NbCounts> for NbModel {
    fn from(counts: NbCounts) -> Self {
        let total = (counts.docs[0] + counts.docs[1]) as f64;
        let log_prior = [
            (counts.docs[0] as f64 / total).ln(),
            (counts.docs[1] as f64 / total).ln(),
        ];
        let mut absent_base = [0.0; 2];
        let log_odds = counts
            .word_docs
            .iter()
            .map(|wd| {
                let mut lo = [0.0; 2];
                for c in 0..2 {
                    let p = (wd[c] + 1) as f64 / (counts.docs[c] + 2) as f64;
                    let absent = (1.0 - p).ln();
                    absent_base[c] += absent;
                    lo[c] = p.ln() - absent;
                }
                lo
            })
            .collect();
        Self {
            counts,
            log_prior,
            log_odds,
            absent_base,
        }
    }
}

impl From<NbModel> for NbCounts {
    fn from(m: NbModel) -> Self {
        m.counts
    }
}

fn class_slot(label: Label) -> usize {
    usize::from(!label.is_abuse())
}

impl NbModel {
    pub fn vocabulary_size(&self) -> usize {
        self.counts.word_docs.len()
    }

    /// `P(w | c)` for a vocabulary column.
    pub fn conditional(&self, column: usize, label: Label) -> f64 {
        let c = class_slot(label);
        (self.counts.word_docs[column][c] + 1) as f64 / (self.counts.docs[c] + 2) as f64
    }

    pub fn prior(&self, label: Label) -> f64 {
        self.log_prior[class_slot(label)].exp()
    }

    /// Joint log-likelihood `ln P(c) + sum ln P(x_w | c)` per class.
    pub fn log_joint(&self, x: &BowVector) -> [f64; 2] {
        let mut lj = [0.0; 2];
        for c in 0..2 {
            lj[c] = self.log_prior[c] + self.absent_base[c];
            for &w in &x.0 {
                lj[c] += self.log_odds[w][c];
            }
        }
        lj
    }
}

pub fn train_nb(vocab_size: usize, train: &[(BowVector, Label)]) -> Result<NbModel> {
    let mut docs = [0u64; 2];
    let mut word_docs = vec![[0u64; 2]; vocab_size];
    for (x, label) in train {
        let c = class_slot(*label);
        docs[c] += 1;
        for &w in &x.0 {
            let slot = word_docs.get_mut(w).ok_or(Error::DimensionMismatch {
                expected: vocab_size,
                actual: w + 1,
            })?;
            slot[c] += 1;
        }
    }
    if docs[0] == 0 || docs[1] == 0 {
        return Err(Error::InsufficientData("Naive Bayes needs both labels in the training data".into()));
    }
    Ok(NbCounts { docs, word_docs }.into())
}

/// Posterior probability of abuse, normalized over the two classes.
pub fn nb_posterior(model: &NbModel, x: &BowVector) -> f64 {
    let [a, n] = model.log_joint(x);
    1.0 / (1.0 + (n - a).exp())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NbOutput {
    /// Posterior probability of abuse.
    #[default]
    Posterior,
    /// 1 if the posterior exceeds 0.5, else 0.
    HardLabel,
}

/// Vocabulary plus Naive Bayes model, producing the `nb_posterior` feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbStage {
    pub vocabulary: Vocabulary,
    pub model: NbModel,
    pub output: NbOutput,
}

impl NbStage {
    pub fn train(train: &[(&TokenizedText, Label)], output: NbOutput) -> Result<Self> {
        let texts: Vec<&TokenizedText> = train.iter().map(|(t, _)| *t).collect();
        let vocabulary = Vocabulary::build(&texts)?;
        let rows: Vec<(BowVector, Label)> = train.iter().map(|(t, l)| (vocabulary.bow(t), *l)).collect();
        let model = train_nb(vocabulary.len(), &rows)?;
        Ok(Self {
            vocabulary,
            model,
            output,
        })
    }

    pub fn feature(&self, tokens: &TokenizedText) -> f64 {
        let p = nb_posterior(&self.model, &self.vocabulary.bow(tokens));
        match self.output {
            NbOutput::Posterior => p,
            NbOutput::HardLabel => f64::from(u8::from(p > 0.5)),
        }
    }
}
