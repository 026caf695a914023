//! Abusive message detection for game chat: text preprocessing, message
//! features, per-user Markov context models, a Naive Bayes then linear SVM
//! classifier, and cross-validated evaluation.

pub mod classify;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod fuzzyindex;
pub mod pipeline;
pub mod textprep;
pub mod usermodel;

pub use config::RunConfig;
pub use corpus::{Corpus, Label, LabeledDataset, Message, MessageKind};
pub use error::{Error, Result};
pub use features::{FeatureVector, FEATURE_NAMES, REGISTRY_VERSION};
pub use textprep::{PrepMode, TokenizedText};
