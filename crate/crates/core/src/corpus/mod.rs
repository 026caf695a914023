//! Message corpora: JSONL loading, dataset sampling, stratified splits and
//! conversation context windows.

mod synth;

pub use synth::{generate_synthetic, SynthConfig};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    #[serde(rename = "iM")]
    InGame,
    #[serde(rename = "cM")]
    Chat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Abuse,
    NonAbuse,
}

impl Label {
    pub fn is_abuse(self) -> bool {
        self == Label::Abuse
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Abuse => 1,
            Label::NonAbuse => 0,
        }
    }

    pub fn from_bool(abuse: bool) -> Self {
        if abuse {
            Label::Abuse
        } else {
            Label::NonAbuse
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match u8::deserialize(d)? {
            1 => Ok(Label::Abuse),
            0 => Ok(Label::NonAbuse),
            other => Err(serde::de::Error::custom(format!("label must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub kind: MessageKind,
    pub author: String,
    pub channel: String,
    pub ts: u64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl Message {
    fn corpus_key(&self) -> (&str, u64, &str) {
        (&self.channel, self.ts, &self.id)
    }

    /// Global chronological key; id breaks timestamp ties.
    pub fn time_key(&self) -> (u64, &str) {
        (self.ts, &self.id)
    }
}

/// Messages sorted by (channel, timestamp, id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    messages: Vec<Message>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(mut messages: Vec<Message>) -> Result<Self> {
        messages.sort_by(|a, b| a.corpus_key().cmp(&b.corpus_key()));
        let mut by_id = HashMap::with_capacity(messages.len());
        for (i, m) in messages.iter().enumerate() {
            if by_id.insert(m.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate message id '{}'", m.id)));
            }
        }
        Ok(Self { messages, by_id })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut messages = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let msg: Message = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            messages.push(msg);
        }
        Self::new(messages)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_jsonl(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for m in &self.messages {
            serde_json::to_writer(&mut *out, m)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Message> {
        self.position(id).map(|i| &self.messages[i])
    }

    pub fn filter_kinds(&self, kinds: &[MessageKind]) -> Self {
        let kept = self
            .messages
            .iter()
            .filter(|m| kinds.contains(&m.kind))
            .cloned()
            .collect();
        Self::new(kept).expect("subset of a valid corpus is valid")
    }

    pub fn label_counts(&self) -> (usize, usize) {
        self.messages.iter().fold((0, 0), |(a, n), m| match m.label {
            Some(Label::Abuse) => (a + 1, n),
            Some(Label::NonAbuse) => (a, n + 1),
            None => (a, n),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceMode {
    Balanced,
    Unbalanced,
}

impl BalanceMode {
    /// Non-abuse messages drawn per abuse message.
    pub fn ratio(self) -> usize {
        match self {
            BalanceMode::Balanced => 1,
            BalanceMode::Unbalanced => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub items: Vec<(Message, Label)>,
    pub mode: BalanceMode,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.items.iter().map(|(_, l)| *l).collect()
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let abuse = self.items.iter().filter(|(_, l)| l.is_abuse()).count();
        (abuse, self.items.len() - abuse)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
            mode: self.mode,
            seed: self.seed,
        }
    }
}

/// All abuse messages plus `ratio` times as many non-abuse messages drawn
/// uniformly from authors who never wrote an abuse-labeled message.
pub fn sample_dataset(corpus: &Corpus, mode: BalanceMode, seed: u64) -> Result<LabeledDataset> {
    let flagged: HashSet<&str> = corpus
        .messages
        .iter()
        .filter(|m| m.label == Some(Label::Abuse))
        .map(|m| m.author.as_str())
        .collect();
    let abuse: Vec<usize> = (0..corpus.len())
        .filter(|&i| corpus.messages[i].label == Some(Label::Abuse))
        .collect();
    if abuse.is_empty() {
        return Err(Error::InsufficientData("corpus contains no abuse-labeled message".into()));
    }
    let pool: Vec<usize> = (0..corpus.len())
        .filter(|&i| {
            let m = &corpus.messages[i];
            m.label == Some(Label::NonAbuse) && !flagged.contains(m.author.as_str())
        })
        .collect();
    let required = abuse.len() * mode.ratio();
    if pool.len() < required {
        return Err(Error::InsufficientData(format!(
            "non-abuse pool too small: required {required}, available {}",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = pool.choose_multiple(&mut rng, required).copied().collect();
    chosen.extend(abuse);
    chosen.sort_unstable();
    let items = chosen
        .into_iter()
        .map(|i| {
            let m = corpus.messages[i].clone();
            let label = m.label.expect("sampled messages are labeled");
            (m, label)
        })
        .collect();
    Ok(LabeledDataset { items, mode, seed })
}

fn shuffled_by_label(ds: &LabeledDataset, rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
    let mut groups = [Vec::new(), Vec::new()];
    for (i, (_, label)) in ds.items.iter().enumerate() {
        groups[usize::from(!label.is_abuse())].push(i);
    }
    for g in &mut groups {
        g.shuffle(rng);
    }
    groups
}

/// Stratified 70/30 split. The train total is `round(0.7 * n)`, shared
/// between labels by largest remainder so each label gets its rounded share.
pub fn split_train_test(ds: &LabeledDataset, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if ds.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "train/test split needs at least 10 items, got {}",
            ds.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = shuffled_by_label(ds, &mut rng);
    let total_train = (ds.len() as f64 * 0.7).round() as usize;
    let quotas: Vec<f64> = groups.iter().map(|g| g.len() as f64 * 0.7).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut leftover = total_train - take.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..2).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &g in &order {
        if leftover > 0 && take[g] < groups[g].len() {
            take[g] += 1;
            leftover -= 1;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (g, n) in groups.iter().zip(&take) {
        train.extend_from_slice(&g[..*n]);
        test.extend_from_slice(&g[*n..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Train/test item indices of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold partition: shuffled abuse items then shuffled non-abuse
/// items are dealt round-robin, so per-label and total fold sizes differ by
/// at most one.
pub fn kfold_partitions(ds: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    kfold_labels(&ds.labels(), k, seed)
}

pub fn kfold_labels(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::InsufficientData(format!(
            "k = {k} exceeds dataset size {}",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = [Vec::new(), Vec::new()];
    for (i, label) in labels.iter().enumerate() {
        groups[usize::from(!label.is_abuse())].push(i);
    }
    for g in &mut groups {
        g.shuffle(&mut rng);
    }
    let mut assignment = vec![0usize; labels.len()];
    for (slot, &i) in groups.iter().flatten().enumerate() {
        assignment[i] = slot % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextWindow {
    pub target: Message,
    pub before: Vec<Message>,
    pub after: Vec<Message>,
    pub w_before: usize,
    pub w_after: usize,
}

impl ContextWindow {
    /// Window with no surrounding messages, used when no corpus is available.
    pub fn isolated(target: Message, w_before: usize, w_after: usize) -> Self {
        Self {
            target,
            before: Vec::new(),
            after: Vec::new(),
            w_before,
            w_after,
        }
    }
}

/// Up to `w_before` predecessors and `w_after` successors in the target's
/// channel, in corpus order.
pub fn context_window(corpus: &Corpus, target_id: &str, w_before: usize, w_after: usize) -> Result<ContextWindow> {
    let pos = corpus
        .position(target_id)
        .ok_or_else(|| Error::NotFound(format!("message '{target_id}' is not in the corpus")))?;
    let msgs = &corpus.messages;
    let target = &msgs[pos];
    let same = |m: &&Message| m.channel == target.channel;
    let mut before: Vec<Message> = msgs[..pos]
        .iter()
        .rev()
        .take_while(same)
        .take(w_before)
        .cloned()
        .collect();
    before.reverse();
    let after = msgs[pos + 1..]
        .iter()
        .take_while(same)
        .take(w_after)
        .cloned()
        .collect();
    Ok(ContextWindow {
        target: target.clone(),
        before,
        after,
        w_before,
        w_after,
    })
}

/// Messages per author in global chronological order.
pub fn author_timelines(corpus: &Corpus) -> BTreeMap<&str, Vec<&Message>> {
    let mut map: BTreeMap<&str, Vec<&Message>> = BTreeMap::new();
    for m in &corpus.messages {
        map.entry(m.author.as_str()).or_default().push(m);
    }
    for v in map.values_mut() {
        v.sort_by(|a, b| a.time_key().cmp(&b.time_key()));
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn msg(id: &str, channel: &str, author: &str, ts: u64, label: Option<Label>) -> Message {
        Message {
            id: id.into(),
            kind: MessageKind::Chat,
            author: author.into(),
            channel: channel.into(),
            ts,
            text: format!("text of {id}"),
            label,
        }
    }

    fn dataset(n_abuse: usize, n_non: usize) -> LabeledDataset {
        let items = (0..n_abuse + n_non)
            .map(|i| {
                let label = Label::from_bool(i < n_abuse);
                (msg(&format!("m{i:04}"), "c", &format!("u{i}"), i as u64, Some(label)), label)
            })
            .collect();
        LabeledDataset { items, mode: BalanceMode::Unbalanced, seed: 0 }
    }

    #[test]
    fn load_sorts_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(
            &p,
            concat!(
                r#"{"id":"m3","kind":"cM","author":"u1","channel":"b","ts":5,"text":"x"}"#, "\n",
                r#"{"id":"m2","kind":"iM","author":"u2","channel":"a","ts":9,"text":"y","label":1,"extra":true}"#, "\n",
                r#"{"id":"m1","kind":"cM","author":"u3","channel":"a","ts":9,"text":"","label":0}"#, "\n",
            ),
        )
        .unwrap();
        let c = Corpus::load(&p).unwrap();
        let ids: Vec<&str> = c.messages().iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, ["m1", "m2", "m3"]);

        std::fs::write(
            &p,
            concat!(
                r#"{"id":"m1","kind":"cM","author":"u","channel":"a","ts":1,"text":"x"}"#, "\n",
                r#"{"id":"m1","kind":"cM","author":"u","channel":"a","ts":2,"text":"y"}"#, "\n",
            ),
        )
        .unwrap();
        let err = Corpus::load(&p).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("m1")));

        std::fs::write(&p, "").unwrap();
        assert_eq!(Corpus::load(&p).unwrap().len(), 0);

        std::fs::write(&p, "{\"id\":\"m1\"}\nnot json\n").unwrap();
        assert!(matches!(Corpus::load(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn writer_key_order() {
        let m = msg("m1", "c", "u", 3, Some(Label::Abuse));
        let line = serde_json::to_string(&m).unwrap();
        assert_eq!(line, r#"{"id":"m1","kind":"cM","author":"u","channel":"c","ts":3,"text":"text of m1","label":1}"#);
    }

    #[test]
    fn sampling() {
        let mut msgs = Vec::new();
        for i in 0..10 {
            msgs.push(msg(&format!("a{i}"), "c", "bad", i, Some(Label::Abuse)));
        }
        // the abusive author's other messages never enter the pool
        for i in 0..5 {
            msgs.push(msg(&format!("b{i}"), "c", "bad", 100 + i, Some(Label::NonAbuse)));
        }
        for i in 0..40 {
            msgs.push(msg(&format!("n{i:02}"), "c", &format!("u{}", i % 7), 200 + i, Some(Label::NonAbuse)));
        }
        let corpus = Corpus::new(msgs).unwrap();
        let ds = sample_dataset(&corpus, BalanceMode::Unbalanced, 3).unwrap();
        assert_eq!(ds.label_counts(), (10, 20));
        assert!(ds.items.iter().all(|(m, l)| l.is_abuse() || m.author != "bad"));
        let b1 = sample_dataset(&corpus, BalanceMode::Balanced, 9).unwrap();
        let b2 = sample_dataset(&corpus, BalanceMode::Balanced, 9).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(b1.label_counts(), (10, 10));

        let small = Corpus::new(corpus.messages()[..20].to_vec()).unwrap();
        let err = sample_dataset(&small, BalanceMode::Unbalanced, 1).unwrap_err();
        assert!(err.to_string().contains("required 20"));
        let none = Corpus::new(vec![msg("x", "c", "u", 1, Some(Label::NonAbuse))]).unwrap();
        assert!(sample_dataset(&none, BalanceMode::Balanced, 1).is_err());
    }

    #[test]
    fn table_sizes() {
        for (abuse, non) in [(779usize, 1558usize), (111, 222)] {
            let mut msgs = Vec::new();
            for i in 0..abuse {
                msgs.push(msg(&format!("a{i:05}"), "c", &format!("bad{}", i % 13), i as u64, Some(Label::Abuse)));
            }
            for i in 0..non + 100 {
                msgs.push(msg(&format!("n{i:05}"), "d", &format!("ok{}", i % 50), i as u64, Some(Label::NonAbuse)));
            }
            let ds = sample_dataset(&Corpus::new(msgs).unwrap(), BalanceMode::Unbalanced, 1).unwrap();
            assert_eq!(ds.label_counts(), (abuse, non));
        }
    }

    #[test]
    fn train_test_split() {
        let ds = dataset(40, 60);
        let (train, test) = split_train_test(&ds, 7).unwrap();
        assert_eq!(train.len(), 70);
        assert_eq!(train.label_counts(), (28, 42));
        assert_eq!(test.len(), 30);
        assert_eq!(split_train_test(&ds, 7).unwrap(), (train.clone(), test.clone()));
        let ids: HashSet<&str> = train.items.iter().map(|(m, _)| m.id.as_str()).collect();
        assert!(test.items.iter().all(|(m, _)| !ids.contains(m.id.as_str())));

        for (a, n) in [(5, 5), (4, 6), (1, 9), (3, 7)] {
            let (tr, te) = split_train_test(&dataset(a, n), 1).unwrap();
            assert_eq!((tr.len(), te.len()), (7, 3), "{a}/{n}");
        }
        assert!(split_train_test(&dataset(4, 5), 1).is_err());
    }

    #[test]
    fn folds() {
        let f = kfold_partitions(&dataset(8, 12), 10, 1).unwrap();
        assert_eq!(f.len(), 10);
        assert!(f.iter().all(|x| x.test.len() == 2));

        let f = kfold_partitions(&dataset(779, 1558), 10, 1).unwrap();
        assert!(f.iter().all(|x| x.test.len() == 233 || x.test.len() == 234));
        assert!(kfold_partitions(&dataset(3, 3), 7, 1).is_err());
        assert!(kfold_partitions(&dataset(3, 3), 1, 1).is_err());
    }

    #[test]
    fn windows() {
        let mut msgs = vec![msg("t0", "a", "u0", 0, None)];
        for i in 1..=5 {
            msgs.push(msg(&format!("t{i}"), "a", &format!("u{i}"), i, None));
        }
        msgs.push(msg("x1", "b", "u9", 2, None));
        let corpus = Corpus::new(msgs).unwrap();
        let w = context_window(&corpus, "t0", 3, 3).unwrap();
        assert!(w.before.is_empty());
        assert_eq!(w.after.len(), 3);
        assert!(w.after.iter().all(|m| m.channel == "a"));
        let w = context_window(&corpus, "t5", 10, 10).unwrap();
        assert_eq!(w.before.len(), 5);
        assert!(w.after.is_empty());
        assert_eq!(w.before.first().unwrap().id, "t0");
        assert!(context_window(&corpus, "nope", 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition(n_abuse in 1usize..30, n_non in 1usize..30, k in 2usize..8, seed in any::<u64>()) {
            prop_assume!(k <= n_abuse + n_non);
            let ds = dataset(n_abuse, n_non);
            let folds = kfold_partitions(&ds, k, seed).unwrap();
            let mut seen = vec![0usize; ds.len()];
            for f in &folds {
                for &i in &f.test { seen[i] += 1; }
                prop_assert_eq!(f.train.len() + f.test.len(), ds.len());
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let abuse_sizes: Vec<usize> = folds.iter().map(|f| f.test.iter().filter(|&&i| ds.items[i].1.is_abuse()).count()).collect();
            prop_assert!(abuse_sizes.iter().max().unwrap() - abuse_sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn jsonl_round_trip(texts in proptest::collection::vec("\\PC{0,20}", 0..8)) {
            let msgs: Vec<Message> = texts.iter().enumerate().map(|(i, t)| Message {
                id: format!("m{i}"),
                kind: if i % 2 == 0 { MessageKind::Chat } else { MessageKind::InGame },
                author: format!("u{}", i % 3),
                channel: format!("c{}", i % 2),
                ts: (i * 7 % 5) as u64,
                text: t.clone(),
                label: [None, Some(Label::Abuse), Some(Label::NonAbuse)][i % 3],
            }).collect();
            let corpus = Corpus::new(msgs).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("c.jsonl");
            corpus.save(&p).unwrap();
            let loaded = Corpus::load(&p).unwrap();
            prop_assert_eq!(&loaded, &corpus);
            loaded.save(&p).unwrap();
            prop_assert_eq!(Corpus::load(&p).unwrap(), corpus);
        }
    }
}
