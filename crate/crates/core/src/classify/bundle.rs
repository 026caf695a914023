//! Versioned JSON model file.
//!
//! The file is one JSON object. `format_version` and `registry_version` are
//! checked before anything else is decoded, so files written by other
//! versions fail with a version error rather than a decoding error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NbStage;
use crate::config::{LexiconSpec, RunConfig};
use crate::error::{Error, Result};
use crate::features::{
    fill_context_features, fill_text_features, fill_trained_features, FeatureVector, ModeLexicons, TfIdfModel,
    TfIdfScorer, NUM_FEATURES, REGISTRY_VERSION,
};
use crate::pipeline::{Classifier, Prepared, Stages};
use crate::usermodel::ContextFeatures;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub format_version: u64,
    pub registry_version: u64,
    pub config: RunConfig,
    pub lexicons: LexiconSpec,
    pub nb: NbStage,
    pub tfidf: TfIdfModel,
    pub classifier: Classifier,
}

impl PipelineModel {
    /// Trains every stage on the `train` items of `prepared`, with a
    /// calibrated classifier over the configured arm.
    pub fn train(prepared: &Prepared, train: &[usize], cfg: &RunConfig, lexicons: LexiconSpec) -> Result<Self> {
        let stages = Stages::train(prepared, train, cfg)?;
        let x = prepared.rows(&stages, train, false);
        let y = prepared.labels_of(train);
        let classifier = Classifier::train(&x, &y, &cfg.arm.feature_indices(), cfg, true)?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            registry_version: REGISTRY_VERSION,
            config: cfg.clone(),
            lexicons,
            nb: stages.nb,
            tfidf: stages.tfidf.model,
            classifier,
        })
    }

    /// The trained text stages, with the tf-idf index rebuilt.
    pub fn stages(&self) -> Stages {
        Stages {
            nb: self.nb.clone(),
            tfidf: TfIdfScorer::new(self.tfidf.clone(), self.lexicons.fuzzy_dmax),
        }
    }

    pub fn scorer(&self) -> Result<ModelScorer<'_>> {
        let lexicons = self.lexicons.compile()?.for_mode(self.config.prep_mode);
        Ok(ModelScorer {
            model: self,
            lexicons,
            stages: self.stages(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub decision: f64,
    pub probability: f64,
}

/// A loaded model with its lexicons and indexes built.
pub struct ModelScorer<'m> {
    model: &'m PipelineModel,
    lexicons: ModeLexicons,
    stages: Stages,
}

impl ModelScorer<'_> {
    pub fn features(&self, text: &str, context: &ContextFeatures) -> Result<FeatureVector> {
        let tokens = self.lexicons.tokenize(text);
        let mut row = vec![0.0; NUM_FEATURES];
        fill_text_features(text, &tokens, &self.lexicons, &mut row);
        fill_context_features(context, &mut row);
        fill_trained_features(&tokens, &self.stages.nb, &self.stages.tfidf, &mut row);
        FeatureVector::new(row)
    }

    pub fn score(&self, text: &str, context: &ContextFeatures) -> Result<Scored> {
        let fv = self.features(text, context)?;
        let clf = &self.model.classifier;
        let decision = clf.decision(fv.values())?;
        let probability = clf
            .probability(decision)
            .ok_or_else(|| Error::Corrupt("model has no calibration parameters".into()))?;
        Ok(Scored { decision, probability })
    }
}

pub fn save_model(model: &PipelineModel, path: &Path) -> Result<()> {
    let json = serde_json::to_string(model).map_err(|e| Error::Validation(format!("model serialization: {e}")))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn version_field(value: &serde_json::Value, key: &str) -> Result<u64> {
    value
        .get(key)
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Corrupt(format!("missing integer field '{key}'")))
}

pub fn load_model(path: &Path) -> Result<PipelineModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))?;
    let found = version_field(&value, "format_version")?;
    if found != FORMAT_VERSION {
        return Err(Error::Version {
            found,
            expected: FORMAT_VERSION,
        });
    }
    let registry = version_field(&value, "registry_version")?;
    if registry != REGISTRY_VERSION {
        return Err(Error::Version {
            found: registry,
            expected: REGISTRY_VERSION,
        });
    }
    let model: PipelineModel =
        serde_json::from_value(value).map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))?;
    if model.classifier.svm.dim() != model.classifier.features.len()
        || model.classifier.features.iter().any(|&j| j >= NUM_FEATURES)
    {
        return Err(Error::Corrupt("classifier columns do not match the feature registry".into()));
    }
    Ok(model)
}
