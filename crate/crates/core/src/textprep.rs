//! Text normalization: the basic phase (lowercase, whitespace tokens,
//! punctuation stripping) and the advanced phase (elision reversal,
//! hex/binary deobfuscation, URL tokenization, French stemming).

use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};

pub const URL_INTERNAL: &str = "__url_internal";
pub const URL_EXTERNAL: &str = "__url_external";

const DEFAULT_ELISIONS: &str = include_str!("../resources/elisions.tsv");
const DEFAULT_HOSTS: &str = include_str!("../resources/internal_hosts.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepMode {
    Basic,
    Advanced,
}

impl std::fmt::Display for PrepMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrepMode::Basic => f.write_str("basic"),
            PrepMode::Advanced => f.write_str("advanced"),
        }
    }
}

impl std::str::FromStr for PrepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(PrepMode::Basic),
            "advanced" => Ok(PrepMode::Advanced),
            other => Err(Error::Config(format!("unknown preprocessing mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedText {
    pub tokens: Vec<String>,
    pub source_len_chars: usize,
}

impl TokenizedText {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Punctuation (P*) or symbol (S*) character.
pub fn is_punct_or_symbol(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

fn is_marker(token: &str) -> bool {
    token == URL_INTERNAL || token == URL_EXTERNAL
}

/// Lowercase, split on whitespace runs, strip leading and trailing
/// punctuation/symbols from every token and drop the tokens left empty.
pub fn basic_preprocess(text: &str) -> TokenizedText {
    TokenizedText {
        tokens: basic_tokens(&text.to_lowercase()),
        source_len_chars: text.chars().count(),
    }
}

fn basic_tokens(lowered: &str) -> Vec<String> {
    lowered
        .split_whitespace()
        .filter_map(|raw| {
            if is_marker(raw) {
                return Some(raw.to_string());
            }
            let stripped = raw.trim_matches(is_punct_or_symbol);
            (!stripped.is_empty()).then(|| stripped.to_string())
        })
        .collect()
}

/// Every run of three or more identical characters becomes two.
pub fn collapse_repeats(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev: Option<char> = None;
    let mut run = 0usize;
    for c in text.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= 2 {
            out.push(c);
        }
    }
    out
}

/// Elided clitic and its long form, e.g. `j'` / `je`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Elision {
    /// Clitic without its apostrophe.
    pub stem: String,
    pub long: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElisionTable {
    entries: Vec<Elision>,
}

impl ElisionTable {
    /// Parses `short<TAB>long` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (short, long) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected short<TAB>long".into(),
            })?;
            let stem = short
                .trim()
                .trim_end_matches(['\'', '\u{2019}'])
                .to_lowercase();
            let long = long.trim().to_lowercase();
            if stem.is_empty() || long.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "empty elision entry".into(),
                });
            }
            entries.push(Elision { stem, long });
        }
        // longest clitic first so `qu'` is tried before shorter forms
        entries.sort_by(|a, b| {
            b.stem
                .chars()
                .count()
                .cmp(&a.stem.chars().count())
                .then_with(|| a.stem.cmp(&b.stem))
        });
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn entries(&self) -> &[Elision] {
        &self.entries
    }
}

impl Default for ElisionTable {
    fn default() -> Self {
        Self::parse(DEFAULT_ELISIONS).expect("bundled elision table is valid")
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Replaces `j'arrive` with `je arrive` for every clitic of the table that
/// starts a word and is followed by a letter.
pub fn revert_elision(text: &str, table: &ElisionTable) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        let at_word_start = i == 0 || !chars[i - 1].is_alphanumeric();
        if at_word_start {
            if let Some((entry, consumed)) = match_elision(&chars[i..], table) {
                out.push_str(&entry.long);
                out.push(' ');
                i += consumed;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn match_elision<'t>(rest: &[char], table: &'t ElisionTable) -> Option<(&'t Elision, usize)> {
    table.entries.iter().find_map(|entry| {
        let n = entry.stem.chars().count();
        if rest.len() < n + 2 {
            return None;
        }
        let stem_matches = entry.stem.chars().zip(rest).all(|(a, &b)| a == b);
        (stem_matches && is_apostrophe(rest[n]) && rest[n + 1].is_alphabetic())
            .then_some((entry, n + 1))
    })
}

fn decode_printable(bytes: impl Iterator<Item = Option<u8>>) -> Option<String> {
    let mut out = String::new();
    for b in bytes {
        let b = b?;
        if !(0x20..=0x7e).contains(&b) {
            return None;
        }
        out.push(b as char);
    }
    Some(out)
}

fn decode_binary(run: &str) -> Option<String> {
    if run.len() < 16 || run.len() % 8 != 0 || !run.bytes().all(|b| b == b'0' || b == b'1') {
        return None;
    }
    decode_printable(
        run.as_bytes()
            .chunks(8)
            .map(|chunk| u8::from_str_radix(std::str::from_utf8(chunk).ok()?, 2).ok()),
    )
}

fn decode_hex(run: &str) -> Option<String> {
    if run.len() < 6 || run.len() % 2 != 0 || !run.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    decode_printable(
        run.as_bytes()
            .chunks(2)
            .map(|chunk| u8::from_str_radix(std::str::from_utf8(chunk).ok()?, 16).ok()),
    )
}

/// Decodes word-aligned binary or hexadecimal runs back to ASCII. A run is
/// a maximal alphanumeric segment; binary is tried before hex, and a run
/// stays untouched unless every decoded byte is printable ASCII.
pub fn deobfuscate_encodings(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut segment_start: Option<usize> = None;
    let flush = |out: &mut String, seg: &str| match decode_binary(seg).or_else(|| decode_hex(seg)) {
        Some(decoded) => out.push_str(&decoded),
        None => out.push_str(seg),
    };
    for (idx, c) in text.char_indices() {
        if c.is_alphanumeric() {
            segment_start.get_or_insert(idx);
        } else {
            if let Some(start) = segment_start.take() {
                flush(&mut out, &text[start..idx]);
            }
            out.push(c);
        }
    }
    if let Some(start) = segment_start {
        flush(&mut out, &text[start..]);
    }
    out
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(?:https?://|www\.)[^\s]+").expect("url regex compiles")
    })
}

/// Community host list used to tell internal links from external ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostList {
    hosts: Vec<String>,
}

impl HostList {
    pub fn new<I, S>(hosts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut hosts: Vec<String> = hosts
            .into_iter()
            .map(|h| h.as_ref().trim().to_lowercase())
            .filter(|h| !h.is_empty())
            .collect();
        hosts.sort();
        hosts.dedup();
        Self { hosts }
    }

    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// Exact host or any subdomain of a listed host.
    pub fn is_internal(&self, host: &str) -> bool {
        self.hosts
            .iter()
            .any(|h| host == h || host.strip_suffix(h.as_str()).is_some_and(|p| p.ends_with('.')))
    }
}

impl Default for HostList {
    fn default() -> Self {
        Self::parse(DEFAULT_HOSTS)
    }
}

fn url_words(pieces: &str) -> impl Iterator<Item = &str> {
    pieces
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty() && *w != "www" && !w.chars().all(|c| c.is_ascii_digit()))
}

/// Token sequence for one URL: internal/external marker, then the words of
/// the registered domain (external links only) and of the path.
fn url_to_tokens(url: &str, hosts: &HostList) -> String {
    let lowered = url.to_lowercase();
    let rest = lowered
        .split_once("://")
        .map(|(_, r)| r)
        .unwrap_or(&lowered);
    let host_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let (authority, path) = rest.split_at(host_end);
    let host = authority
        .rsplit('@')
        .next()
        .unwrap_or(authority)
        .split(':')
        .next()
        .unwrap_or("")
        .trim_end_matches('.');

    let internal = hosts.is_internal(host);
    let mut words: Vec<&str> = vec![if internal { URL_INTERNAL } else { URL_EXTERNAL }];
    if !internal {
        // registered domain only: subdomains such as `edition.` are dropped
        let labels: Vec<&str> = host.split('.').filter(|l| !l.is_empty()).collect();
        let keep_from = labels.len().saturating_sub(2);
        for label in &labels[keep_from..] {
            words.extend(url_words(label));
        }
    }
    words.extend(url_words(strip_extension(path)));
    words.join(" ")
}

/// Drops a short file extension (`index.html` -> `index`) from the last path
/// segment.
fn strip_extension(path: &str) -> &str {
    let path_only = &path[..path.find(['?', '#']).unwrap_or(path.len())];
    let trimmed = path_only.trim_end_matches(|c: char| !c.is_alphanumeric());
    let last_seg_start = trimmed.rfind('/').map(|i| i + 1).unwrap_or(0);
    if let Some(dot) = trimmed[last_seg_start..].rfind('.') {
        let ext = &trimmed[last_seg_start + dot + 1..];
        if dot > 0 && (1..=5).contains(&ext.len()) && ext.chars().all(|c| c.is_ascii_alphabetic()) {
            return &path[..last_seg_start + dot];
        }
    }
    path
}

/// Replaces every http(s):// or www. URL by its token sequence.
pub fn tokenize_urls(text: &str, hosts: &HostList) -> String {
    url_regex()
        .replace_all(text, |caps: &regex::Captures<'_>| url_to_tokens(&caps[0], hosts))
        .into_owned()
}

/// French Snowball stems; `__url_*` markers pass through.
pub fn stem_tokens(tokens: &[String]) -> Vec<String> {
    let stemmer = french_stemmer();
    tokens
        .iter()
        .map(|t| {
            if t.starts_with("__") {
                t.clone()
            } else {
                stemmer.stem(t).into_owned()
            }
        })
        .collect()
}

fn french_stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::French))
}

pub fn stem_word(word: &str) -> String {
    french_stemmer().stem(word).into_owned()
}

/// Immutable preprocessing configuration shared by every phase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub elisions: ElisionTable,
    pub hosts: HostList,
}

impl Preprocessor {
    pub fn new(elisions: ElisionTable, hosts: HostList) -> Self {
        Self { elisions, hosts }
    }

    pub fn basic(&self, text: &str) -> TokenizedText {
        basic_preprocess(text)
    }

    /// lowercase -> elision -> deobfuscation -> URLs -> basic -> stemming
    pub fn advanced(&self, text: &str) -> TokenizedText {
        let lowered = text.to_lowercase();
        let unelided = revert_elision(&lowered, &self.elisions);
        let decoded = deobfuscate_encodings(&unelided);
        let with_urls = tokenize_urls(&decoded, &self.hosts);
        let tokens = basic_tokens(&with_urls.to_lowercase());
        TokenizedText {
            tokens: stem_tokens(&tokens),
            source_len_chars: text.chars().count(),
        }
    }

    pub fn run(&self, text: &str, mode: PrepMode) -> TokenizedText {
        match mode {
            PrepMode::Basic => self.basic(text),
            PrepMode::Advanced => self.advanced(text),
        }
    }
}
