//! Run configuration shared by the library entry points and the CLI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::NbOutput;
use crate::corpus::{BalanceMode, MessageKind};
use crate::error::{Error, Result};
use crate::eval::ForestParams;
use crate::features::lexicon::{default_badwords, default_business_specs, default_sentiment};
use crate::features::{
    feature_index, BadWordList, BusinessPatterns, Lexicons, PatternSpec, SentimentLexicon, SentimentMode,
    FEATURE_NAMES,
};
use crate::textprep::{ElisionTable, HostList, PrepMode, Preprocessor};
use crate::usermodel::PneConfig;

/// Which message kinds enter the dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum KindSelection {
    #[serde(rename = "iM")]
    InGame,
    #[serde(rename = "cM")]
    Chat,
    #[default]
    #[serde(rename = "both")]
    Both,
}

impl KindSelection {
    pub fn kinds(self) -> Vec<MessageKind> {
        match self {
            KindSelection::InGame => vec![MessageKind::InGame],
            KindSelection::Chat => vec![MessageKind::Chat],
            KindSelection::Both => vec![MessageKind::InGame, MessageKind::Chat],
        }
    }
}

impl std::str::FromStr for KindSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iM" | "im" => Ok(KindSelection::InGame),
            "cM" | "cm" => Ok(KindSelection::Chat),
            "both" => Ok(KindSelection::Both),
            other => Err(Error::Config(format!("unknown message kinds '{other}' (iM, cM, both)"))),
        }
    }
}

/// Feature set of an experiment arm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// Registry without the community-specific features.
    Classic,
    #[default]
    Full,
}

/// Features absent from the classic arm.
pub const CLASSIC_EXCLUDED: [&str; 3] = ["business_score", "pne_score", "pne_applicable"];

impl Arm {
    /// Registry indices of the arm's features, in registry order.
    pub fn feature_indices(self) -> Vec<usize> {
        FEATURE_NAMES
            .iter()
            .enumerate()
            .filter(|(_, n)| self == Arm::Full || !CLASSIC_EXCLUDED.contains(n))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn feature_names(self) -> Vec<String> {
        self.feature_indices().iter().map(|&i| FEATURE_NAMES[i].to_string()).collect()
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(Arm::Classic),
            "full" => Ok(Arm::Full),
            other => Err(Error::Config(format!("unknown arm '{other}' (classic, full)"))),
        }
    }
}

/// Optional resource files; `None` selects the bundled default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourcePaths {
    pub badwords: Option<PathBuf>,
    pub sentiment: Option<PathBuf>,
    pub business_patterns: Option<PathBuf>,
    pub elisions: Option<PathBuf>,
    pub internal_hosts: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub prep_mode: PrepMode,
    pub balance: BalanceMode,
    pub kinds: KindSelection,
    pub arm: Arm,
    pub k_folds: usize,
    pub seed: u64,
    pub window_before: usize,
    pub window_after: usize,
    pub pne: PneConfig,
    pub svm_c: f64,
    pub fuzzy_dmax: usize,
    pub nb_output: NbOutput,
    pub sentiment_mode: SentimentMode,
    pub importance_runs: usize,
    pub forest: ForestParams,
    pub threshold: f64,
    pub resources: ResourcePaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            prep_mode: PrepMode::Advanced,
            balance: BalanceMode::Unbalanced,
            kinds: KindSelection::Both,
            arm: Arm::Full,
            k_folds: 10,
            seed: 1,
            window_before: 10,
            window_after: 10,
            pne: PneConfig::default(),
            svm_c: 1.0,
            fuzzy_dmax: 2,
            nb_output: NbOutput::Posterior,
            sentiment_mode: SentimentMode::Weight,
            importance_runs: 200,
            forest: ForestParams::default(),
            threshold: 0.5,
            resources: ResourcePaths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::Config(format!("k_folds must be >= 2, got {}", self.k_folds)));
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return Err(Error::Config(format!("svm_c must be positive, got {}", self.svm_c)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        let p = &self.pne;
        if p.window == 0 || p.n == 0 || p.min_bigrams == 0 || !(p.alpha > 0.0 && p.alpha.is_finite()) {
            return Err(Error::Config("PNE needs window, n, min_bigrams >= 1 and alpha > 0".into()));
        }
        if self.forest.n_trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        Ok(())
    }

    /// Single-line JSON used as the header comment of every report.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn lexicon_spec(&self) -> Result<LexiconSpec> {
        let r = &self.resources;
        Ok(LexiconSpec {
            elisions: match &r.elisions {
                Some(p) => ElisionTable::load(p)?,
                None => ElisionTable::default(),
            },
            internal_hosts: match &r.internal_hosts {
                Some(p) => HostList::load(p)?,
                None => HostList::default(),
            },
            badwords: match &r.badwords {
                Some(p) => BadWordList::load(p)?,
                None => default_badwords(),
            },
            sentiment: match &r.sentiment {
                Some(p) => SentimentLexicon::load(p)?,
                None => default_sentiment(),
            },
            business_patterns: match &r.business_patterns {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    BusinessPatterns::parse_specs(&text)?
                }
                None => default_business_specs(),
            },
            sentiment_mode: self.sentiment_mode,
            fuzzy_dmax: self.fuzzy_dmax,
        })
    }
}

/// Lexical resources in serializable form, embedded in saved models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconSpec {
    pub elisions: ElisionTable,
    pub internal_hosts: HostList,
    pub badwords: BadWordList,
    pub sentiment: SentimentLexicon,
    pub business_patterns: Vec<PatternSpec>,
    pub sentiment_mode: SentimentMode,
    pub fuzzy_dmax: usize,
}

impl LexiconSpec {
    pub fn compile(&self) -> Result<Lexicons> {
        Ok(Lexicons {
            preprocessor: Preprocessor::new(self.elisions.clone(), self.internal_hosts.clone()),
            badwords: self.badwords.clone(),
            sentiment: self.sentiment.clone(),
            business: BusinessPatterns::compile(&self.business_patterns)?,
            sentiment_mode: self.sentiment_mode,
            fuzzy_dmax: self.fuzzy_dmax,
        })
    }
}

/// Registry indices for a list of feature names.
pub fn indices_of(names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| feature_index(n).ok_or_else(|| Error::Config(format!("unknown feature '{n}'"))))
        .collect()
}
