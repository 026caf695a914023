//! Glue between the stages: dataset preparation, per-split stage training,
//! feature matrices and the calibrated SVM.

use crate::classify::{fit_platt, svm_decision, train_svm, NbStage, PlattParams, SvmModel, SvmParams};
use crate::config::RunConfig;
use crate::corpus::{kfold_labels, sample_dataset, Corpus, Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::{
    fill_context_features, fill_text_features, fill_trained_features, Lexicons, ModeLexicons, TfIdfModel,
    TfIdfScorer, NUM_FEATURES,
};
use crate::textprep::TokenizedText;
use crate::usermodel::{ContextFeaturizer, ContextFeatures};

/// Corpus restricted to the configured kinds and the labeled dataset drawn
/// from it.
pub fn load_dataset(corpus: &Corpus, cfg: &RunConfig) -> Result<(Corpus, LabeledDataset)> {
    let filtered = corpus.filter_kinds(&cfg.kinds.kinds());
    let ds = sample_dataset(&filtered, cfg.balance, cfg.seed)?;
    Ok((filtered, ds))
}

/// Context features of every dataset item, in dataset order.
pub fn context_features(corpus: &Corpus, ds: &LabeledDataset, cfg: &RunConfig) -> Result<Vec<ContextFeatures>> {
    let featurizer = ContextFeaturizer::new(corpus, cfg.pne, cfg.window_after);
    ds.items.iter().map(|(m, _)| featurizer.features(&m.id)).collect()
}

struct Override {
    item: usize,
    tokens: TokenizedText,
    row: Vec<f64>,
}

/// Everything about a dataset that does not depend on a train split:
/// tokens, text and context features.
pub struct Prepared {
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub lexicons: ModeLexicons,
    contexts: Vec<ContextFeatures>,
    tokens: Vec<TokenizedText>,
    base_rows: Vec<Vec<f64>>,
    test_override: Option<Override>,
}

fn base_row(text: &str, tokens: &TokenizedText, ctx: &ContextFeatures, lex: &ModeLexicons) -> Vec<f64> {
    let mut row = vec![0.0; NUM_FEATURES];
    fill_text_features(text, tokens, lex, &mut row);
    fill_context_features(ctx, &mut row);
    row
}

impl Prepared {
    pub fn new(ds: &LabeledDataset, contexts: &[ContextFeatures], lexicons: ModeLexicons) -> Result<Self> {
        if contexts.len() != ds.len() {
            return Err(Error::DimensionMismatch {
                expected: ds.len(),
                actual: contexts.len(),
            });
        }
        let tokens: Vec<TokenizedText> = ds.items.iter().map(|(m, _)| lexicons.tokenize(&m.text)).collect();
        let base_rows = ds
            .items
            .iter()
            .zip(&tokens)
            .zip(contexts)
            .map(|(((m, _), t), c)| base_row(&m.text, t, c, &lexicons))
            .collect();
        Ok(Self {
            ids: ds.items.iter().map(|(m, _)| m.id.clone()).collect(),
            labels: ds.labels(),
            lexicons,
            contexts: contexts.to_vec(),
            tokens,
            base_rows,
            test_override: None,
        })
    }

    /// Loads the dataset for `cfg` and prepares it in `cfg.prep_mode`.
    pub fn from_corpus(corpus: &Corpus, cfg: &RunConfig, lexicons: &Lexicons) -> Result<Self> {
        let (filtered, ds) = load_dataset(corpus, cfg)?;
        let contexts = context_features(&filtered, &ds, cfg)?;
        Self::new(&ds, &contexts, lexicons.for_mode(cfg.prep_mode))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Replaces the text of `item` whenever it is scored as a test message.
    /// Training always sees the original text.
    pub fn with_test_text(mut self, item: usize, text: &str) -> Self {
        let tokens = self.lexicons.tokenize(text);
        let row = base_row(text, &tokens, &self.contexts[item], &self.lexicons);
        self.test_override = Some(Override { item, tokens, row });
        self
    }

    pub fn context(&self, item: usize) -> &ContextFeatures {
        &self.contexts[item]
    }

    pub fn tokens(&self, item: usize) -> &TokenizedText {
        &self.tokens[item]
    }

    fn test_view(&self, item: usize) -> (&TokenizedText, &[f64]) {
        match &self.test_override {
            Some(o) if o.item == item => (&o.tokens, &o.row),
            _ => (&self.tokens[item], &self.base_rows[item]),
        }
    }

    /// Full registry rows for `items`, filled with `stages`.
    pub fn rows(&self, stages: &Stages, items: &[usize], as_test: bool) -> Vec<Vec<f64>> {
        items
            .iter()
            .map(|&i| {
                let (tokens, base) = if as_test {
                    self.test_view(i)
                } else {
                    (&self.tokens[i], self.base_rows[i].as_slice())
                };
                let mut row = base.to_vec();
                fill_trained_features(tokens, &stages.nb, &stages.tfidf, &mut row);
                row
            })
            .collect()
    }

    pub fn labels_of(&self, items: &[usize]) -> Vec<Label> {
        items.iter().map(|&i| self.labels[i]).collect()
    }
}

/// Stages trained on a split: the vocabulary with its Naive Bayes model and
/// the tf-idf tables.
#[derive(Debug, Clone)]
pub struct Stages {
    pub nb: NbStage,
    pub tfidf: TfIdfScorer,
}

impl Stages {
    pub fn train(prepared: &Prepared, train: &[usize], cfg: &RunConfig) -> Result<Self> {
        let pairs: Vec<(&TokenizedText, Label)> =
            train.iter().map(|&i| (&prepared.tokens[i], prepared.labels[i])).collect();
        let nb = NbStage::train(&pairs, cfg.nb_output)?;
        let of_class = |abuse: bool| -> Vec<&TokenizedText> {
            pairs.iter().filter(|(_, l)| l.is_abuse() == abuse).map(|(t, _)| *t).collect()
        };
        let (abuse, nonabuse) = (of_class(true), of_class(false));
        let tfidf = TfIdfScorer::new(TfIdfModel::train(&abuse, &nonabuse)?, cfg.fuzzy_dmax);
        Ok(Self { nb, tfidf })
    }
}

/// Inner folds used to produce out-of-sample scores for Platt fitting.
pub const PLATT_FOLDS: usize = 3;

/// Linear SVM over a subset of registry columns, optionally calibrated.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Classifier {
    pub features: Vec<usize>,
    pub svm: SvmModel,
    pub platt: Option<PlattParams>,
}

pub fn select(row: &[f64], features: &[usize]) -> Vec<f64> {
    features.iter().map(|&j| row[j]).collect()
}

impl Classifier {
    /// Trains on full registry rows. With `calibrate`, Platt parameters are
    /// fitted on decision scores from an inner cross-validation.
    pub fn train(x: &[Vec<f64>], y: &[Label], features: &[usize], cfg: &RunConfig, calibrate: bool) -> Result<Self> {
        let params = SvmParams {
            c: cfg.svm_c,
            seed: cfg.seed,
            ..SvmParams::default()
        };
        let sub: Vec<Vec<f64>> = x.iter().map(|r| select(r, features)).collect();
        let svm = train_svm(&sub, y, &params)?;
        let platt = if calibrate {
            let mut scores = vec![0.0; y.len()];
            for fold in kfold_labels(y, PLATT_FOLDS, cfg.seed)? {
                let xt: Vec<Vec<f64>> = fold.train.iter().map(|&i| sub[i].clone()).collect();
                let yt: Vec<Label> = fold.train.iter().map(|&i| y[i]).collect();
                let inner = train_svm(&xt, &yt, &params)?;
                for &i in &fold.test {
                    scores[i] = svm_decision(&inner, &sub[i])?;
                }
            }
            Some(fit_platt(&scores, y)?)
        } else {
            None
        };
        Ok(Self {
            features: features.to_vec(),
            svm,
            platt,
        })
    }

    /// Decision score of a full registry row.
    pub fn decision(&self, row: &[f64]) -> Result<f64> {
        if row.len() != NUM_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: NUM_FEATURES,
                actual: row.len(),
            });
        }
        svm_decision(&self.svm, &select(row, &self.features))
    }

    pub fn probability(&self, score: f64) -> Option<f64> {
        self.platt.map(|p| p.probability(score))
    }
}
