//! Levenshtein distance over unicode scalar values and a Burkhard-Keller
//! tree answering "all words within distance k" queries.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

/// Unit-cost edit distance (insertions, deletions, substitutions).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if ca == cb {
                diag
            } else {
                1 + diag.min(above).min(row[j])
            };
            diag = above;
        }
    }
    row[b.len()]
}

/// Distance if it is at most `dmax`, `None` otherwise. Only the diagonal
/// band of width `2 * dmax + 1` is filled and the scan stops as soon as a
/// whole band row exceeds `dmax`.
pub fn levenshtein_bounded(a: &str, b: &str, dmax: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_bounded_chars(&a, &b, dmax)
}

pub(crate) fn levenshtein_bounded_chars(a: &[char], b: &[char], dmax: usize) -> Option<usize> {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let (n, m) = (a.len(), b.len());
    if n - m > dmax {
        return None;
    }
    if m == 0 {
        return Some(n);
    }
    let inf = dmax + 1;
    // row over b, indices 0..=m; cells outside the band hold `inf`
    let mut prev: Vec<usize> = (0..=m).map(|j| if j <= dmax { j } else { inf }).collect();
    let mut cur = vec![inf; m + 1];
    for i in 1..=n {
        let lo = i.saturating_sub(dmax).max(1);
        let hi = (i + dmax).min(m);
        cur[0] = if i <= dmax { i } else { inf };
        if lo > 1 {
            cur[lo - 1] = inf;
        }
        let mut row_min = cur[0];
        for j in lo..=hi {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let v = (prev[j - 1] + cost).min(prev[j] + 1).min(cur[j - 1] + 1).min(inf);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if hi < m {
            cur[hi + 1] = inf;
        }
        if row_min > dmax {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m];
    (d <= dmax).then_some(d)
}

#[derive(Debug, Clone)]
struct Node {
    word: String,
    chars: Vec<char>,
    children: BTreeMap<usize, usize>,
}

/// Metric tree keyed by edit distance to the parent word. Words are
/// inserted in sorted order, so the smallest word is the root and the
/// layout is a pure function of the word set.
#[derive(Debug, Default)]
pub struct EditDistanceIndex {
    nodes: Vec<Node>,
    visits: AtomicU64,
}

impl Clone for EditDistanceIndex {
    fn clone(&self) -> Self {
        Self {
            nodes: self.nodes.clone(),
            visits: AtomicU64::new(self.visit_count()),
        }
    }
}

impl EditDistanceIndex {
    pub fn build<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut sorted: Vec<String> = words.into_iter().map(|w| w.as_ref().to_string()).collect();
        sorted.sort();
        sorted.dedup();
        let mut index = Self::default();
        for w in sorted {
            index.insert(w);
        }
        index
    }

    fn insert(&mut self, word: String) {
        let chars: Vec<char> = word.chars().collect();
        if self.nodes.is_empty() {
            self.nodes.push(Node {
                word,
                chars,
                children: BTreeMap::new(),
            });
            return;
        }
        let mut at = 0;
        loop {
            let d = levenshtein_chars(&self.nodes[at].chars, &chars);
            if d == 0 {
                return;
            }
            match self.nodes[at].children.get(&d) {
                Some(&child) => at = child,
                None => {
                    let id = self.nodes.len();
                    self.nodes.push(Node {
                        word,
                        chars,
                        children: BTreeMap::new(),
                    });
                    self.nodes[at].children.insert(d, id);
                    return;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.query_within(word, 0).first().is_some()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.word.as_str())
    }

    /// Every indexed word within `dmax` of `word`, sorted by (distance, word).
    pub fn query_within(&self, word: &str, dmax: usize) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let query: Vec<char> = word.chars().collect();
        let mut stack = vec![0usize];
        let mut visited = 0u64;
        while let Some(id) = stack.pop() {
            visited += 1;
            let node = &self.nodes[id];
            // exact distance is needed to navigate children, but the bounded
            // kernel lets far-away nodes bail out early
            let reach = dmax + node.children.keys().next_back().copied().unwrap_or(0);
            let d = match levenshtein_bounded_chars(&node.chars, &query, reach) {
                Some(d) => d,
                None => continue,
            };
            if d <= dmax {
                out.push((node.word.clone(), d));
            }
            let lo = d.saturating_sub(dmax);
            let hi = d + dmax;
            for (_, &child) in node.children.range(lo..=hi) {
                stack.push(child);
            }
        }
        self.visits.fetch_add(visited, Ordering::Relaxed);
        out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Total nodes whose distance was evaluated by queries so far.
    pub fn visit_count(&self) -> u64 {
        self.visits.load(Ordering::Relaxed)
    }

    pub fn reset_visits(&self) {
        self.visits.store(0, Ordering::Relaxed);
    }
}
