//! Per-message feature extraction and the ordered feature registry.

pub mod lexicon;
pub mod morph;
pub mod tfidf;

use serde::{Deserialize, Serialize};

use crate::classify::NbStage;
use crate::corpus::{ContextWindow, Message};
use crate::error::{Error, Result};
use crate::textprep::{PrepMode, Preprocessor, TokenizedText};
use crate::usermodel::{num_respondents, ContextFeaturizer, ContextFeatures};

pub use lexicon::{
    sentiment_scores, BadWordCounts, BadWordList, BadWordMatcher, BusinessPatterns, PatternSpec, SentimentLexicon,
    SentimentMode,
};
pub use morph::{
    char_class_profile, collapsed_delta, compression_ratio, length_features, unique_chars, word_stats,
    CharClassProfile,
};
pub use tfidf::{TfIdfModel, TfIdfScorer, WordScores};

/// Bumped whenever names or order below change.
pub const REGISTRY_VERSION: u64 = 1;

pub const FEATURE_NAMES: [&str; 31] = [
    "len_chars",
    "len_words",
    "count_letters",
    "count_digits",
    "count_punct",
    "count_spaces",
    "count_other",
    "ratio_letters",
    "ratio_digits",
    "ratio_punct",
    "ratio_spaces",
    "ratio_other",
    "caps_count",
    "caps_ratio",
    "compression_ratio",
    "unique_chars",
    "collapsed_delta",
    "nb_posterior",
    "avg_word_length",
    "unique_words",
    "tfidf_abuse_sum",
    "tfidf_nonabuse_sum",
    "sentiment_pos",
    "sentiment_neg",
    "badwords_exact",
    "badwords_fuzzy",
    "badwords_collapsed",
    "business_score",
    "num_respondents",
    "pne_score",
    "pne_applicable",
];

pub const NUM_FEATURES: usize = FEATURE_NAMES.len();

/// Features computed on the unprocessed text.
pub const RAW_FEATURES: [&str; 17] = [
    "len_chars",
    "len_words",
    "count_letters",
    "count_digits",
    "count_punct",
    "count_spaces",
    "count_other",
    "ratio_letters",
    "ratio_digits",
    "ratio_punct",
    "ratio_spaces",
    "ratio_other",
    "caps_count",
    "caps_ratio",
    "compression_ratio",
    "unique_chars",
    "collapsed_delta",
];

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

fn idx(name: &str) -> usize {
    feature_index(name).expect("registry name")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    /// Checks registry length and finiteness.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != NUM_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: NUM_FEATURES,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature {} = {}", FEATURE_NAMES[i], values[i])));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        FEATURE_NAMES.iter().copied().zip(self.values.iter().copied())
    }
}

/// Lexical resources as loaded from files, independent of preprocessing.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub preprocessor: Preprocessor,
    pub badwords: BadWordList,
    pub sentiment: SentimentLexicon,
    pub business: BusinessPatterns,
    pub sentiment_mode: SentimentMode,
    pub fuzzy_dmax: usize,
}

impl Default for Lexicons {
    fn default() -> Self {
        Self {
            preprocessor: Preprocessor::default(),
            badwords: lexicon::default_badwords(),
            sentiment: lexicon::default_sentiment(),
            business: BusinessPatterns::compile(&lexicon::default_business_specs())
                .expect("shipped business patterns compile"),
            sentiment_mode: SentimentMode::default(),
            fuzzy_dmax: 2,
        }
    }
}

impl Lexicons {
    pub fn for_mode(&self, mode: PrepMode) -> ModeLexicons {
        ModeLexicons {
            mode,
            preprocessor: self.preprocessor.clone(),
            matcher: BadWordMatcher::new(self.badwords.for_mode(mode), self.fuzzy_dmax),
            sentiment: self.sentiment.for_mode(mode),
            sentiment_mode: self.sentiment_mode,
            business: self.business.clone(),
            fuzzy_dmax: self.fuzzy_dmax,
        }
    }
}

/// Lexicons moved into the token space of one preprocessing mode.
#[derive(Debug, Clone)]
pub struct ModeLexicons {
    pub mode: PrepMode,
    pub preprocessor: Preprocessor,
    pub matcher: BadWordMatcher,
    pub sentiment: SentimentLexicon,
    pub sentiment_mode: SentimentMode,
    pub business: BusinessPatterns,
    pub fuzzy_dmax: usize,
}

impl ModeLexicons {
    pub fn tokenize(&self, raw: &str) -> TokenizedText {
        self.preprocessor.run(raw, self.mode)
    }
}

/// Fills every slot that depends only on the message text and the lexicons:
/// all but `nb_posterior`, the tf-idf sums and the context features, which
/// are left untouched.
pub fn fill_text_features(raw: &str, tokens: &TokenizedText, lex: &ModeLexicons, out: &mut [f64]) {
    let (chars, words) = length_features(raw);
    let profile = char_class_profile(raw);
    let ratios = profile.ratios();
    let (avg_len, unique_words) = word_stats(tokens);
    let (pos, neg) = sentiment_scores(tokens, &lex.sentiment, lex.sentiment_mode);
    let bad = lex.matcher.counts(raw, tokens, &lex.preprocessor, lex.mode);
    let values: [(&str, f64); 25] = [
        ("len_chars", chars as f64),
        ("len_words", words as f64),
        ("count_letters", profile.letters as f64),
        ("count_digits", profile.digits as f64),
        ("count_punct", profile.punctuation as f64),
        ("count_spaces", profile.spaces as f64),
        ("count_other", profile.other as f64),
        ("ratio_letters", ratios[0]),
        ("ratio_digits", ratios[1]),
        ("ratio_punct", ratios[2]),
        ("ratio_spaces", ratios[3]),
        ("ratio_other", ratios[4]),
        ("caps_count", profile.caps as f64),
        ("caps_ratio", profile.caps_ratio()),
        ("compression_ratio", compression_ratio(raw)),
        ("unique_chars", unique_chars(raw) as f64),
        ("collapsed_delta", collapsed_delta(raw) as f64),
        ("avg_word_length", avg_len),
        ("unique_words", unique_words as f64),
        ("sentiment_pos", pos),
        ("sentiment_neg", neg),
        ("badwords_exact", bad.exact as f64),
        ("badwords_fuzzy", bad.fuzzy as f64),
        ("badwords_collapsed", bad.collapsed as f64),
        ("business_score", lex.business.score(raw)),
    ];
    for (name, v) in values {
        out[idx(name)] = v;
    }
}

pub fn fill_context_features(ctx: &ContextFeatures, out: &mut [f64]) {
    out[idx("num_respondents")] = ctx.num_respondents as f64;
    out[idx("pne_score")] = ctx.pne_score;
    out[idx("pne_applicable")] = f64::from(u8::from(ctx.pne_applicable));
}

pub fn fill_trained_features(tokens: &TokenizedText, nb: &NbStage, tfidf: &TfIdfScorer, out: &mut [f64]) {
    out[idx("nb_posterior")] = nb.feature(tokens);
    let (a, n) = tfidf.sums(tokens);
    out[idx("tfidf_abuse_sum")] = a;
    out[idx("tfidf_nonabuse_sum")] = n;
}

/// Trained resources needed to assemble a feature vector.
#[derive(Clone, Copy, Default)]
pub struct FeatureModels<'a> {
    pub lexicons: Option<&'a ModeLexicons>,
    pub nb: Option<&'a NbStage>,
    pub tfidf: Option<&'a TfIdfScorer>,
    pub context: Option<&'a ContextFeaturizer<'a>>,
}

fn require<'a, T>(r: Option<&'a T>, name: &str) -> Result<&'a T> {
    r.ok_or_else(|| Error::MissingResource(name.to_string()))
}

/// Full registry vector for one message. Raw-text features use the text as
/// written; token features use `mode`.
pub fn assemble_features(
    msg: &Message,
    ctx: &ContextWindow,
    mode: PrepMode,
    models: &FeatureModels<'_>,
) -> Result<FeatureVector> {
    let lex = require(models.lexicons, "lexicons")?;
    if lex.mode != mode {
        return Err(Error::Config(format!(
            "lexicons prepared for {} preprocessing, features requested for {mode}",
            lex.mode
        )));
    }
    let nb = require(models.nb, "naive bayes stage")?;
    let tfidf = require(models.tfidf, "tf-idf model")?;
    let user_model = require(models.context, "user model")?;

    let tokens = lex.tokenize(&msg.text);
    let mut out = vec![0.0; NUM_FEATURES];
    fill_text_features(&msg.text, &tokens, lex, &mut out);
    fill_trained_features(&tokens, nb, tfidf, &mut out);
    let pne = user_model.pne(ctx);
    let context = ContextFeatures {
        num_respondents: num_respondents(ctx),
        pne_score: pne.score,
        pne_applicable: pne.applicable,
    };
    fill_context_features(&context, &mut out);
    FeatureVector::new(out)
}
