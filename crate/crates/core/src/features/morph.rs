//! Features computed on the raw message, before any preprocessing.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::textprep::{collapse_repeats, TokenizedText};

/// (characters, whitespace-delimited words) of the raw text.
pub fn length_features(raw: &str) -> (usize, usize) {
    (raw.chars().count(), raw.split_whitespace().count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharClass {
    Letter,
    Digit,
    Punctuation,
    Space,
    Other,
}

pub fn char_class(c: char) -> CharClass {
    use GeneralCategory::*;
    if c.is_whitespace() {
        return CharClass::Space;
    }
    match get_general_category(c) {
        UppercaseLetter | LowercaseLetter | TitlecaseLetter | ModifierLetter | OtherLetter => {
            CharClass::Letter
        }
        DecimalNumber => CharClass::Digit,
        ConnectorPunctuation | DashPunctuation | OpenPunctuation | ClosePunctuation
        | InitialPunctuation | FinalPunctuation | OtherPunctuation => CharClass::Punctuation,
        _ => CharClass::Other,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CharClassProfile {
    pub letters: usize,
    pub digits: usize,
    pub punctuation: usize,
    pub spaces: usize,
    pub other: usize,
    pub caps: usize,
}

impl CharClassProfile {
    pub fn total(&self) -> usize {
        self.letters + self.digits + self.punctuation + self.spaces + self.other
    }

    fn ratio(&self, count: usize) -> f64 {
        match self.total() {
            0 => 0.0,
            n => count as f64 / n as f64,
        }
    }

    /// Ratios in letters, digits, punctuation, spaces, other order.
    pub fn ratios(&self) -> [f64; 5] {
        [
            self.ratio(self.letters),
            self.ratio(self.digits),
            self.ratio(self.punctuation),
            self.ratio(self.spaces),
            self.ratio(self.other),
        ]
    }

    pub fn caps_ratio(&self) -> f64 {
        self.caps as f64 / self.letters.max(1) as f64
    }
}

pub fn char_class_profile(raw: &str) -> CharClassProfile {
    let mut p = CharClassProfile::default();
    for c in raw.chars() {
        match char_class(c) {
            CharClass::Letter => {
                p.letters += 1;
                if c.is_uppercase() {
                    p.caps += 1;
                }
            }
            CharClass::Digit => p.digits += 1,
            CharClass::Punctuation => p.punctuation += 1,
            CharClass::Space => p.spaces += 1,
            CharClass::Other => p.other += 1,
        }
    }
    p
}

/// Number of LZW codes emitted for `bytes`, starting from the 256 single-byte
/// entries with an unbounded dictionary.
pub fn lzw_code_count(bytes: &[u8]) -> usize {
    let Some((&first, rest)) = bytes.split_first() else {
        return 0;
    };
    let mut dict: HashMap<(u32, u8), u32> = HashMap::new();
    let mut next_code = 256u32;
    let mut current = u32::from(first);
    let mut emitted = 0;
    for &b in rest {
        match dict.get(&(current, b)) {
            Some(&code) => current = code,
            None => {
                emitted += 1;
                dict.insert((current, b), next_code);
                next_code += 1;
                current = u32::from(b);
            }
        }
    }
    emitted + 1
}

/// LZW codes over UTF-8 bytes; 1.0 for the empty message.
pub fn compression_ratio(raw: &str) -> f64 {
    if raw.is_empty() {
        return 1.0;
    }
    lzw_code_count(raw.as_bytes()) as f64 / raw.len() as f64
}

pub fn unique_chars(raw: &str) -> usize {
    raw.chars().collect::<HashSet<_>>().len()
}

pub fn collapsed_delta(raw: &str) -> usize {
    let lowered = raw.to_lowercase();
    lowered.chars().count() - collapse_repeats(&lowered).chars().count()
}

/// (mean token length in characters, distinct tokens).
pub fn word_stats(tokens: &TokenizedText) -> (f64, usize) {
    if tokens.is_empty() {
        return (0.0, 0);
    }
    let total: usize = tokens.tokens.iter().map(|t| t.chars().count()).sum();
    let unique = tokens.tokens.iter().collect::<HashSet<_>>().len();
    (total as f64 / tokens.len() as f64, unique)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook LZW over byte strings, independent of the code-pair table.
    fn lzw_oracle(input: &[u8]) -> Vec<usize> {
        let mut dict: HashMap<Vec<u8>, usize> = (0..=255u8).map(|b| (vec![b], b as usize)).collect();
        let mut w: Vec<u8> = Vec::new();
        let mut out = Vec::new();
        for &c in input {
            let mut wc = w.clone();
            wc.push(c);
            if dict.contains_key(&wc) {
                w = wc;
            } else {
                out.push(dict[&w]);
                let n = dict.len();
                dict.insert(wc, n);
                w = vec![c];
            }
        }
        if !w.is_empty() {
            out.push(dict[&w]);
        }
        out
    }

    #[test]
    fn lengths() {
        assert_eq!(length_features("Go die."), (7, 2));
        assert_eq!(length_features(""), (0, 0));
        assert_eq!(length_features("Shuuut up!"), (10, 2));
    }

    #[test]
    fn char_classes() {
        let p = char_class_profile("Go die.");
        assert_eq!((p.letters, p.digits, p.punctuation, p.spaces, p.other, p.caps), (5, 0, 1, 1, 0, 1));
        let p = char_class_profile("8==================D");
        assert_eq!(p.other, 18);
        assert_eq!((p.digits, p.letters), (1, 1));
        let p = char_class_profile("");
        assert_eq!(p.total(), 0);
        assert_eq!(p.ratios(), [0.0; 5]);
        assert_eq!(p.caps_ratio(), 0.0);
    }

    #[test]
    fn compression() {
        assert_eq!(compression_ratio(""), 1.0);
        let rep = "abcabcabcabcabcabc";
        let expected = lzw_oracle(rep.as_bytes()).len() as f64 / rep.len() as f64;
        assert_eq!(compression_ratio(rep), expected);
        let plain = "abcdefghijklmnopqr";
        assert_eq!(plain.len(), rep.len());
        assert!(compression_ratio(rep) < compression_ratio(plain));

        let s = "t'es qu'un noob ";
        let four = s.repeat(4);
        assert!(compression_ratio(&four) < compression_ratio(s));
    }

    #[test]
    fn unique_and_collapsed() {
        assert_eq!(unique_chars("010001110110111101110"), 2);
        assert_eq!(unique_chars(""), 0);
        assert_eq!(unique_chars("abca"), 3);
        assert_eq!(collapsed_delta("looooooool"), 6);
        assert_eq!(collapsed_delta("abc"), 0);
        assert_eq!(collapsed_delta("aaaa!!!!"), 4);
    }

    #[test]
    fn word_statistics() {
        let t = |v: &[&str]| TokenizedText { tokens: v.iter().map(|s| s.to_string()).collect(), source_len_chars: 0 };
        assert_eq!(word_stats(&t(&["go", "die"])), (2.5, 2));
        let (avg, uniq) = word_stats(&t(&["go", "go", "die"]));
        assert!((avg - 7.0 / 3.0).abs() < 1e-12);
        assert_eq!(uniq, 2);
        assert_eq!(word_stats(&t(&[])), (0.0, 0));
    }

    proptest! {
        #[test]
        fn lzw_matches_oracle(s in "[ab ]{0,80}") {
            prop_assert_eq!(lzw_code_count(s.as_bytes()), lzw_oracle(s.as_bytes()).len());
        }

        #[test]
        fn class_counts_sum(s in "\\PC{0,60}") {
            let p = char_class_profile(&s);
            prop_assert_eq!(p.total(), s.chars().count());
            prop_assert!(p.caps <= p.letters);
            let r = p.ratios();
            prop_assert!(r.iter().all(|x| (0.0..=1.0).contains(x)));
            if !s.is_empty() {
                prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
