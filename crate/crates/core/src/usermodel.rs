//! Conversation context features: number of respondents, and the change in
//! each respondent's word n-gram Markov emission probability across the
//! target message (PNE).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::corpus::{context_window, ContextWindow, Corpus, Message};
use crate::error::Result;
use crate::textprep::{basic_preprocess, TokenizedText};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PneConfig {
    /// Window length in n-grams.
    pub window: usize,
    /// Words per n-gram.
    pub n: usize,
    /// Minimum training n-grams for a respondent to count.
    pub min_bigrams: usize,
    /// Additive smoothing constant.
    pub alpha: f64,
}

impl Default for PneConfig {
    fn default() -> Self {
        Self {
            window: 20,
            n: 2,
            min_bigrams: 300,
            alpha: 0.1,
        }
    }
}

/// Distinct authors after the target, the target's author excluded.
pub fn num_respondents(ctx: &ContextWindow) -> usize {
    respondents(ctx).len()
}

fn respondents(ctx: &ContextWindow) -> BTreeSet<&str> {
    ctx.after
        .iter()
        .map(|m| m.author.as_str())
        .filter(|a| *a != ctx.target.author)
        .collect()
}

/// Overlapping n-grams of each message, never spanning two messages,
/// concatenated in message order. An n-gram is its words joined by a space.
pub fn message_ngrams(messages: &[TokenizedText], n: usize) -> Vec<String> {
    messages
        .iter()
        .flat_map(|m| m.tokens.windows(n.max(1)).map(|w| w.join(" ")))
        .collect()
}

/// First-order Markov chain over n-gram states with additive smoothing.
#[derive(Debug, Clone)]
pub struct MarkovModel<S> {
    transitions: HashMap<(S, S), u32>,
    totals: HashMap<S, u32>,
    successor_vocab: usize,
    alpha: f64,
    bigram_count: usize,
}

impl<S: Eq + Hash + Clone> MarkovModel<S> {
    pub fn build(history: &[S], alpha: f64) -> Self {
        let mut transitions: HashMap<(S, S), u32> = HashMap::new();
        let mut totals: HashMap<S, u32> = HashMap::new();
        let mut successors: HashSet<&S> = HashSet::new();
        for pair in history.windows(2) {
            *transitions.entry((pair[0].clone(), pair[1].clone())).or_default() += 1;
            *totals.entry(pair[0].clone()).or_default() += 1;
            successors.insert(&pair[1]);
        }
        Self {
            successor_vocab: successors.len(),
            transitions,
            totals,
            alpha,
            bigram_count: history.len(),
        }
    }

    pub fn bigram_count(&self) -> usize {
        self.bigram_count
    }

    pub fn successor_vocab(&self) -> usize {
        self.successor_vocab
    }

    pub fn count(&self, from: &S, to: &S) -> u32 {
        self.transitions.get(&(from.clone(), to.clone())).copied().unwrap_or(0)
    }

    pub fn total(&self, from: &S) -> u32 {
        self.totals.get(from).copied().unwrap_or(0)
    }

    /// `(count + alpha) / (total + alpha * (V + 1))`; a never-seen source
    /// state gets the uniform `1 / (V + 1)`.
    pub fn emission_probability(&self, from: &S, to: &S) -> f64 {
        let v1 = (self.successor_vocab + 1) as f64;
        let total = self.total(from);
        if total == 0 {
            return 1.0 / v1;
        }
        (f64::from(self.count(from, to)) + self.alpha) / (f64::from(total) + self.alpha * v1)
    }

    /// Average emission probability: sum over the transitions of `window`,
    /// always divided by `w`.
    pub fn window_score(&self, window: &[S], w: usize) -> f64 {
        if window.len() < 2 || w == 0 {
            return 0.0;
        }
        let sum: f64 = window
            .windows(2)
            .map(|p| self.emission_probability(&p[0], &p[1]))
            .sum();
        sum / w as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserScore {
    pub s_before: f64,
    pub s_after: f64,
    pub bigram_count: usize,
    pub applicable: bool,
}

impl UserScore {
    /// `S_A - S_B`, or 0 for a user below the history threshold.
    pub fn s_user(&self) -> f64 {
        if self.applicable {
            self.s_after - self.s_before
        } else {
            0.0
        }
    }
}

/// Scores one respondent. `before` is the chronological n-gram stream
/// strictly before the target, `after` the respondent's n-grams inside the
/// after-window. The chain is trained on all but the last `W` states of
/// `before`; S_B uses those last `W` states and S_A the first `W` of `after`.
pub fn score_user<S: Eq + Hash + Clone>(before: &[S], after: &[S], cfg: &PneConfig) -> UserScore {
    let w = cfg.window;
    let split = before.len().saturating_sub(w);
    let model = MarkovModel::build(&before[..split], cfg.alpha);
    let s_before = model.window_score(&before[split..], w);
    let s_after = model.window_score(&after[..after.len().min(w)], w);
    UserScore {
        s_before,
        s_after,
        bigram_count: model.bigram_count(),
        applicable: model.bigram_count() >= cfg.min_bigrams,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PneResult {
    /// Mean `S(u)` over applicable respondents, 0 when there are none.
    pub score: f64,
    pub applicable: bool,
    pub users: Vec<(String, UserScore)>,
}

fn summarize(users: Vec<(String, UserScore)>) -> PneResult {
    let included: Vec<f64> = users
        .iter()
        .filter(|(_, s)| s.applicable)
        .map(|(_, s)| s.s_user())
        .collect();
    let score = if included.is_empty() {
        0.0
    } else {
        included.iter().sum::<f64>() / included.len() as f64
    };
    PneResult {
        score,
        applicable: !included.is_empty(),
        users,
    }
}

/// PNE of one target computed directly from the corpus (basic tokens).
pub fn pne_feature(corpus: &Corpus, target_id: &str, w_after: usize, cfg: &PneConfig) -> Result<PneResult> {
    let ctx = context_window(corpus, target_id, 0, w_after)?;
    let target_key = ctx.target.time_key();
    let mut users = Vec::new();
    for author in respondents(&ctx) {
        let mut history: Vec<&Message> = corpus
            .messages()
            .iter()
            .filter(|m| m.author == author && m.time_key() < target_key)
            .collect();
        history.sort_by(|a, b| a.time_key().cmp(&b.time_key()));
        let before_tokens: Vec<TokenizedText> = history.iter().map(|m| basic_preprocess(&m.text)).collect();
        let after_tokens: Vec<TokenizedText> = ctx
            .after
            .iter()
            .filter(|m| m.author == author)
            .map(|m| basic_preprocess(&m.text))
            .collect();
        let before = message_ngrams(&before_tokens, cfg.n);
        let after = message_ngrams(&after_tokens, cfg.n);
        users.push((author.to_string(), score_user(&before, &after, cfg)));
    }
    Ok(summarize(users))
}

/// Context features for one message.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextFeatures {
    pub num_respondents: usize,
    pub pne_score: f64,
    pub pne_applicable: bool,
}

struct AuthorStream {
    /// (timestamp, id) of each message with the offset of its first n-gram.
    messages: Vec<((u64, String), usize)>,
    states: Vec<u32>,
}

/// Precomputed per-author n-gram streams for scoring many targets of one
/// corpus. Produces the same values as [`pne_feature`].
pub struct ContextFeaturizer<'c> {
    corpus: &'c Corpus,
    cfg: PneConfig,
    w_after: usize,
    streams: HashMap<&'c str, AuthorStream>,
    message_states: HashMap<&'c str, Vec<u32>>,
}

impl<'c> ContextFeaturizer<'c> {
    pub fn new(corpus: &'c Corpus, cfg: PneConfig, w_after: usize) -> Self {
        let mut interner: HashMap<String, u32> = HashMap::new();
        let mut message_states: HashMap<&str, Vec<u32>> = HashMap::with_capacity(corpus.len());
        for m in corpus.messages() {
            let tokens = basic_preprocess(&m.text);
            let ids = message_ngrams(std::slice::from_ref(&tokens), cfg.n)
                .into_iter()
                .map(|g| {
                    let next = interner.len() as u32;
                    *interner.entry(g).or_insert(next)
                })
                .collect();
            message_states.insert(m.id.as_str(), ids);
        }
        let mut streams: HashMap<&str, AuthorStream> = HashMap::new();
        for (author, msgs) in crate::corpus::author_timelines(corpus) {
            let mut stream = AuthorStream {
                messages: Vec::with_capacity(msgs.len()),
                states: Vec::new(),
            };
            for m in msgs {
                stream.messages.push(((m.ts, m.id.clone()), stream.states.len()));
                stream.states.extend_from_slice(&message_states[m.id.as_str()]);
            }
            streams.insert(author, stream);
        }
        Self {
            corpus,
            cfg,
            w_after,
            streams,
            message_states,
        }
    }

    pub fn features(&self, target_id: &str) -> Result<ContextFeatures> {
        let ctx = context_window(self.corpus, target_id, 0, self.w_after)?;
        let pne = self.pne(&ctx);
        Ok(ContextFeatures {
            num_respondents: num_respondents(&ctx),
            pne_score: pne.score,
            pne_applicable: pne.applicable,
        })
    }

    pub fn pne(&self, ctx: &ContextWindow) -> PneResult {
        let target_key = (ctx.target.ts, ctx.target.id.clone());
        let mut users = Vec::new();
        for author in respondents(ctx) {
            let stream = &self.streams[author];
            let cut = stream.messages.partition_point(|(k, _)| *k < target_key);
            let end = stream
                .messages
                .get(cut)
                .map(|(_, offset)| *offset)
                .unwrap_or(stream.states.len());
            let before = &stream.states[..end];
            let after: Vec<u32> = ctx
                .after
                .iter()
                .filter(|m| m.author == author)
                .flat_map(|m| self.message_states[m.id.as_str()].iter().copied())
                .collect();
            users.push((author.to_string(), score_user(before, &after, &self.cfg)));
        }
        summarize(users)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, MessageKind};

    fn msg(id: &str, author: &str, ts: u64, text: &str) -> Message {
        Message {
            id: id.into(),
            kind: MessageKind::Chat,
            author: author.into(),
            channel: "room".into(),
            ts,
            text: text.into(),
            label: None,
        }
    }

    fn toks(v: &[&str]) -> TokenizedText {
        TokenizedText {
            tokens: v.iter().map(|s| s.to_string()).collect(),
            source_len_chars: 0,
        }
    }

    #[test]
    fn respondents_count() {
        let t = msg("t", "u0", 0, "x");
        let mut ctx = ContextWindow::isolated(t, 0, 10);
        assert_eq!(num_respondents(&ctx), 0);
        ctx.after = vec![msg("a", "u1", 1, ""), msg("b", "u2", 2, ""), msg("c", "u1", 3, "")];
        assert_eq!(num_respondents(&ctx), 2);
        ctx.after = vec![msg("a", "u0", 1, ""), msg("b", "u0", 2, "")];
        assert_eq!(num_respondents(&ctx), 0);
    }

    #[test]
    fn ngrams() {
        assert_eq!(message_ngrams(&[toks(&["a", "b", "c"])], 2), vec!["a b", "b c"]);
        assert_eq!(message_ngrams(&[toks(&["a", "b"]), toks(&["c", "d"])], 2), vec!["a b", "c d"]);
        assert!(message_ngrams(&[toks(&["a"])], 2).is_empty());
        let msgs = [toks(&["a", "b", "c", "d"]), toks(&["x"]), toks(&["p", "q", "r"])];
        let expected: usize = msgs.iter().map(|m| m.len().saturating_sub(1)).sum();
        assert_eq!(message_ngrams(&msgs, 2).len(), expected);
    }

    #[test]
    fn markov_counts() {
        let h = ["ab", "ba", "ab", "ba"];
        let m = MarkovModel::build(&h, 0.1);
        assert_eq!(m.count(&"ab", &"ba"), 2);
        assert_eq!(m.count(&"ba", &"ab"), 1);
        assert_eq!(m.bigram_count(), 4);
        let empty = MarkovModel::<&str>::build(&[], 0.1);
        assert_eq!(empty.bigram_count(), 0);
        let single = MarkovModel::build(&["ab"], 0.1);
        assert_eq!((single.bigram_count(), single.total(&"ab")), (1, 0));
    }

    #[test]
    fn emission_limits() {
        let m = MarkovModel::build(&["ab", "ba", "ab", "ba"], 1e-12);
        // only successor of "ab" is "ba": MLE 1
        assert!((m.emission_probability(&"ab", &"ba") - 1.0).abs() < 1e-9);

        let m = MarkovModel::build(&["a", "b", "c", "d"], 0.1);
        assert_eq!(m.successor_vocab(), 3);
        assert_eq!(m.emission_probability(&"zz", &"a"), 0.25);

        // normalization over observed successors plus one unseen bucket
        let m = MarkovModel::build(&["a", "b", "a", "c", "a", "b", "d"], 0.3);
        let succ = ["a", "b", "c", "d"];
        assert_eq!(m.successor_vocab(), succ.len());
        let unseen = m.emission_probability(&"a", &"never");
        let total: f64 = succ.iter().map(|s| m.emission_probability(&"a", s)).sum::<f64>()
            + unseen;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_scores() {
        let m = MarkovModel::build(&["a", "b", "c", "d"], 0.1);
        // unseen source: 1/(V+1) = 0.25, one transition, W = 1
        assert_eq!(m.window_score(&["x", "y"], 1), 0.25);
        assert_eq!(m.window_score(&[], 4), 0.0);
        // two transitions of 0.25 with divisor 4 -> 0.125
        assert_eq!(m.window_score(&["x", "y", "z"], 4), 0.125);
    }

    #[test]
    fn window_divisor_is_w() {
        // a -> b only, alpha small: transitions ~0.5 each under alpha = 1, V = 1
        let m = MarkovModel::build(&["a", "b", "a", "b"], 1.0);
        // V = 2 (successors a, b); P(a->b) = (2 + 1) / (2 + 3) = 0.6
        assert!((m.emission_probability(&"a", &"b") - 0.6).abs() < 1e-12);
        let s = m.window_score(&["a", "b", "q"], 4);
        // P(b->q) = (0 + 1) / (1 + 3) = 0.25
        assert!((s - (0.6 + 0.25) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn verbatim_repeat_scores_zero() {
        let cfg = PneConfig { window: 4, n: 2, min_bigrams: 1, alpha: 0.1 };
        let before: Vec<u32> = (0..40).map(|i| (i * 7 % 11) as u32).collect();
        let after = before[before.len() - 4..].to_vec();
        let s = score_user(&before, &after, &cfg);
        assert!(s.applicable);
        assert_eq!(s.s_before, s.s_after);
        assert_eq!(s.s_user(), 0.0);
    }

    #[test]
    fn below_threshold_is_excluded() {
        let cfg = PneConfig { window: 2, n: 2, min_bigrams: 300, alpha: 0.1 };
        let before: Vec<u32> = (0..50).collect();
        let s = score_user(&before, &[1, 2], &cfg);
        assert!(!s.applicable);
        assert_eq!(s.s_user(), 0.0);
    }

    #[test]
    fn disjoint_reaction_is_negative() {
        // u1 always says "bonne attaque les gars" then reacts with new words
        let mut msgs = Vec::new();
        for i in 0..20 {
            msgs.push(msg(&format!("h{i:02}"), "u1", i, "bonne attaque les gars"));
        }
        msgs.push(msg("t", "u0", 100, "go die"));
        msgs.push(msg("r", "u1", 101, "wtf calme toi mec"));
        let corpus = Corpus::new(msgs).unwrap();
        let cfg = PneConfig { window: 3, n: 2, min_bigrams: 10, alpha: 0.1 };
        let r = pne_feature(&corpus, "t", 10, &cfg).unwrap();
        assert!(r.applicable);
        assert!(r.score < 0.0);
        let f = ContextFeaturizer::new(&corpus, cfg, 10);
        let ctx = context_window(&corpus, "t", 0, 10).unwrap();
        assert_eq!(f.pne(&ctx), r);

        let strict = PneConfig { min_bigrams: 1000, ..cfg };
        let r = pne_feature(&corpus, "t", 10, &strict).unwrap();
        assert_eq!((r.score, r.applicable), (0.0, false));
        let _ = Label::Abuse;
    }
}
