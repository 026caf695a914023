//! Sentiment lexicon, bad-word list and community business patterns.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzyindex::EditDistanceIndex;
use crate::textprep::{collapse_repeats, stem_word, PrepMode, Preprocessor, TokenizedText};

const DEFAULT_BADWORDS: &str = include_str!("../../resources/badwords.txt");
const DEFAULT_SENTIMENT: &str = include_str!("../../resources/sentiment.tsv");
const DEFAULT_BUSINESS: &str = include_str!("../../resources/business_patterns.tsv");

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim_end();
        (!line.trim().is_empty()).then_some((i + 1, line))
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentMode {
    /// Sum of matched weights.
    #[default]
    Weight,
    /// Number of matched words.
    Count,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SentimentLexicon {
    weights: BTreeMap<String, f64>,
}

impl SentimentLexicon {
    pub fn new<I: IntoIterator<Item = (String, f64)>>(entries: I) -> Result<Self> {
        let mut weights = BTreeMap::new();
        for (word, w) in entries {
            if !w.is_finite() {
                return Err(Error::Config(format!("non-finite sentiment weight for '{word}'")));
            }
            weights.insert(word.to_lowercase(), w);
        }
        Ok(Self { weights })
    }

    /// `word<TAB>weight` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (line_no, line) in content_lines(text) {
            let (word, weight) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected word<TAB>weight".into(),
            })?;
            let weight: f64 = weight.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid weight '{}'", weight.trim()),
            })?;
            entries.push((word.trim().to_string(), weight));
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?)
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.weights.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Lexicon keyed in the token space of `mode`: under advanced
    /// preprocessing the stems are added, words sharing a stem get their
    /// mean weight.
    pub fn for_mode(&self, mode: PrepMode) -> Self {
        match mode {
            PrepMode::Basic => self.clone(),
            PrepMode::Advanced => {
                let mut grouped: BTreeMap<String, (f64, usize)> = BTreeMap::new();
                for (word, &w) in &self.weights {
                    let e = grouped.entry(stem_word(word)).or_default();
                    e.0 += w;
                    e.1 += 1;
                }
                let mut weights = self.weights.clone();
                for (stem, (sum, n)) in grouped {
                    weights.entry(stem).or_insert(sum / n as f64);
                }
                Self { weights }
            }
        }
    }
}

/// (positive, negative) sentiment of the matched tokens; negative is reported
/// as a magnitude.
pub fn sentiment_scores(tokens: &TokenizedText, lex: &SentimentLexicon, mode: SentimentMode) -> (f64, f64) {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for t in &tokens.tokens {
        if let Some(w) = lex.get(t) {
            let v = match mode {
                SentimentMode::Weight => w.abs(),
                SentimentMode::Count => 1.0,
            };
            if w > 0.0 {
                pos += v;
            } else if w < 0.0 {
                neg += v;
            }
        }
    }
    (pos, neg)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadWordList {
    entries: BTreeSet<String>,
}

impl BadWordList {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            entries: entries
                .into_iter()
                .map(|s| s.as_ref().trim().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Self {
        // `#` only starts a comment at the beginning of a line: entries may
        // themselves be symbol strings
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::parse(&read(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains(word)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in the token space of `mode` (stems added for advanced).
    pub fn for_mode(&self, mode: PrepMode) -> Self {
        match mode {
            PrepMode::Basic => self.clone(),
            PrepMode::Advanced => {
                let mut entries = self.entries.clone();
                entries.extend(self.entries.iter().map(|e| stem_word(e)));
                Self { entries }
            }
        }
    }
}

/// Bad-word list plus its edit-distance index, both in one token space.
#[derive(Debug, Clone)]
pub struct BadWordMatcher {
    list: BadWordList,
    index: EditDistanceIndex,
    fuzzy_dmax: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BadWordCounts {
    pub exact: usize,
    pub fuzzy: usize,
    pub collapsed: usize,
}

impl BadWordMatcher {
    pub fn new(list: BadWordList, fuzzy_dmax: usize) -> Self {
        let index = EditDistanceIndex::build(list.iter());
        Self {
            list,
            index,
            fuzzy_dmax,
        }
    }

    pub fn list(&self) -> &BadWordList {
        &self.list
    }

    /// Fuzzy radius for a token: never more than `len - 1`, so one or two
    /// letter tokens cannot match by substitution alone.
    fn radius(&self, token: &str) -> usize {
        self.fuzzy_dmax.min(token.chars().count().saturating_sub(1))
    }

    pub fn exact_count(&self, tokens: &TokenizedText) -> usize {
        tokens.tokens.iter().filter(|t| self.list.contains(t)).count()
    }

    pub fn fuzzy_count(&self, tokens: &TokenizedText) -> usize {
        tokens
            .tokens
            .iter()
            .filter(|t| !self.list.contains(t))
            .filter(|t| {
                let r = self.radius(t);
                r > 0 && !self.index.query_within(t, r).is_empty()
            })
            .count()
    }

    /// Exact and fuzzy counts on `tokens`, plus the exact count on the
    /// collapsed lowercase message re-run through the same preprocessing.
    pub fn counts(&self, raw: &str, tokens: &TokenizedText, prep: &Preprocessor, mode: PrepMode) -> BadWordCounts {
        let collapsed = prep.run(&collapse_repeats(&raw.to_lowercase()), mode);
        BadWordCounts {
            exact: self.exact_count(tokens),
            fuzzy: self.fuzzy_count(tokens),
            collapsed: self.exact_count(&collapsed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BusinessPattern {
    pub name: String,
    pub weight: f64,
    pub regex: Regex,
}

/// Serializable `(name, weight, expression)` triples; compiled on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub name: String,
    pub weight: f64,
    pub expression: String,
}

#[derive(Debug, Clone, Default)]
pub struct BusinessPatterns {
    patterns: Vec<BusinessPattern>,
}

impl BusinessPatterns {
    pub fn compile(specs: &[PatternSpec]) -> Result<Self> {
        let patterns = specs
            .iter()
            .map(|s| {
                if !(s.weight.is_finite() && s.weight >= 0.0) {
                    return Err(Error::Config(format!("pattern '{}' has invalid weight {}", s.name, s.weight)));
                }
                let regex = Regex::new(&s.expression)
                    .map_err(|e| Error::Config(format!("pattern '{}' does not compile: {e}", s.name)))?;
                Ok(BusinessPattern {
                    name: s.name.clone(),
                    weight: s.weight,
                    regex,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { patterns })
    }

    /// `name<TAB>weight<TAB>regular-expression` lines.
    pub fn parse_specs(text: &str) -> Result<Vec<PatternSpec>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, line)| {
                let mut parts = line.splitn(3, '\t');
                let (Some(name), Some(weight), Some(expr)) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: "expected name<TAB>weight<TAB>regex".into(),
                    });
                };
                let weight = weight.trim().parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("invalid weight '{weight}'"),
                })?;
                Ok(PatternSpec {
                    name: name.trim().to_string(),
                    weight,
                    expression: expr.trim().to_string(),
                })
            })
            .collect()
    }

    pub fn specs(&self) -> Vec<PatternSpec> {
        self.patterns
            .iter()
            .map(|p| PatternSpec {
                name: p.name.clone(),
                weight: p.weight,
                expression: p.regex.as_str().to_string(),
            })
            .collect()
    }

    pub fn patterns(&self) -> &[BusinessPattern] {
        &self.patterns
    }

    /// Weighted sum of non-overlapping matches over the lowercased text.
    pub fn score(&self, raw: &str) -> f64 {
        let lowered = raw.to_lowercase();
        self.patterns
            .iter()
            .map(|p| p.weight * p.regex.find_iter(&lowered).count() as f64)
            .sum()
    }
}

pub fn default_badwords() -> BadWordList {
    BadWordList::parse(DEFAULT_BADWORDS)
}

pub fn default_sentiment() -> SentimentLexicon {
    SentimentLexicon::parse(DEFAULT_SENTIMENT).expect("bundled sentiment lexicon is valid")
}

pub fn default_business_specs() -> Vec<PatternSpec> {
    BusinessPatterns::parse_specs(DEFAULT_BUSINESS).expect("bundled business patterns are valid")
}
