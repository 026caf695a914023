//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use abusedet::classify::{load_model, nb_posterior, save_model, train_nb, BowVector, PipelineModel, Vocabulary};
use abusedet::config::Arm;
use abusedet::corpus::{kfold_labels, BalanceMode, Message, MessageKind};
use abusedet::eval::{
    ablation_curve, compute_metrics, evaluate_matrices, fold_matrices, importance_on_folds, pr_curve,
    precision_recall_at,
};
use abusedet::features::Lexicons;
use abusedet::fuzzyindex::{levenshtein, EditDistanceIndex};
use abusedet::pipeline::{Prepared, Stages};
use abusedet::textprep::{basic_preprocess, deobfuscate_encodings, PrepMode};
use abusedet::usermodel::{message_ngrams, pne_feature, score_user, ContextFeaturizer, MarkovModel, PneConfig};
use abusedet::{Corpus, Label, RunConfig, TokenizedText};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT_TOL: f64 = 1e-12;
const F_MIN: f64 = 0.85;
const ADVANCED_GAIN: f64 = 0.01;
const CLASSIC_SLACK: f64 = 0.005;
const IMPORTANCE_RUNS: usize = 200;
const NB_TOP_RANK: usize = 3;
const ABLATION_REPS: u64 = 20;
const ABLATION_SHARE: f64 = 0.6;
const DICTIONARY_WORDS: usize = 20_000;
const QUERIES: usize = 1_000;
const ROUND_TRIP_FIXTURES: usize = 100;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn cli(&self, args: &[&str]) -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_abusedet"))
            .args(args)
            .current_dir(self.dir.path())
            .env("RUST_LOG", "warn")
            .output()
            .map_err(|e| format!("cannot run abusedet: {e}"))?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("abusedet {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
        }
    }

    fn corpus(&self) -> Result<Corpus, String> {
        Corpus::load(&self.path("corpus.jsonl")).map_err(|e| e.to_string())
    }
}

fn mean_f(path: &Path) -> Result<f64, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let line = text
        .lines()
        .find(|l| l.starts_with("mean,"))
        .ok_or_else(|| format!("{} has no mean row", path.display()))?;
    line.rsplit(',')
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("bad mean row '{line}'"))
}

fn deobfuscation() -> Outcome {
    let hex = deobfuscate_encodings("476F206469652E");
    let bin = deobfuscate_encodings("01000111011011110010000001100100011010010110010100101110");
    ensure(hex == "Go die.", || format!("hex decoded to {hex:?}"))?;
    ensure(bin == "Go die.", || format!("binary decoded to {bin:?}"))?;
    Ok("hex and binary fixtures decode to \"Go die.\"".into())
}

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[char]) -> String {
    let len = rng.gen_range(2..10);
    (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

fn levenshtein_suite() -> Outcome {
    ensure(levenshtein("@ss", "ass") == 1, || "d(@ss, ass) != 1".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let alphabet: Vec<char> = "abcdeé@".chars().collect();
    for _ in 0..10_000 {
        let (a, b, c) = (
            random_word(&mut rng, &alphabet),
            random_word(&mut rng, &alphabet),
            random_word(&mut rng, &alphabet),
        );
        let (ab, ba, bc, ac) = (levenshtein(&a, &b), levenshtein(&b, &a), levenshtein(&b, &c), levenshtein(&a, &c));
        ensure(levenshtein(&a, &a) == 0, || format!("d({a},{a}) != 0"))?;
        ensure((ab == 0) == (a == b), || format!("identity fails on {a}, {b}"))?;
        ensure(ab == ba, || format!("asymmetric on {a}, {b}"))?;
        ensure(ac <= ab + bc, || format!("triangle fails on {a}, {b}, {c}"))?;
    }

    let letters: Vec<char> = ('a'..='z').collect();
    let mut dict = BTreeSet::new();
    while dict.len() < DICTIONARY_WORDS {
        let len = rng.gen_range(4..12);
        dict.insert((0..len).map(|_| *letters.choose(&mut rng).unwrap()).collect::<String>());
    }
    let words: Vec<String> = dict.into_iter().collect();
    let index = EditDistanceIndex::build(words.iter().cloned());
    index.reset_visits();
    for q in 0..QUERIES {
        // half the queries are one or two edits away from a dictionary word
        let query = if q % 2 == 0 {
            let mut w: Vec<char> = words.choose(&mut rng).unwrap().chars().collect();
            for _ in 0..rng.gen_range(1..3) {
                let i = rng.gen_range(0..w.len());
                w[i] = *letters.choose(&mut rng).unwrap();
            }
            w.into_iter().collect()
        } else {
            random_word(&mut rng, &letters)
        };
        let got: BTreeSet<(String, usize)> = index.query_within(&query, 2).into_iter().collect();
        let want: BTreeSet<(String, usize)> = words
            .iter()
            .map(|w| (w.clone(), levenshtein(w, &query)))
            .filter(|(_, d)| *d <= 2)
            .collect();
        ensure(got == want, || format!("query {query:?}: index {got:?} != scan {want:?}"))?;
    }
    let avg = index.visit_count() as f64 / QUERIES as f64;
    ensure(avg < words.len() as f64, || format!("average visits {avg} >= {}", words.len()))?;
    Ok(format!("metric axioms on 10^4 triples; {QUERIES} queries match brute force; {avg:.0} visits per query over {} words", words.len()))
}

fn message(id: &str, author: &str, channel: &str, ts: u64, text: &str) -> Message {
    Message {
        id: id.into(),
        kind: MessageKind::Chat,
        author: author.into(),
        channel: channel.into(),
        ts,
        text: text.into(),
        label: None,
    }
}

fn pne_oracle() -> Outcome {
    // Respondent u2 writes "x y z", "x y z", "x y w" and later answers the
    // target with "x y z". Bigram states: xy yz xy yz | xy yw, W = 2.
    // Chain on the first four: xy->yz twice, yz->xy once; successors {xy, yz}.
    let cfg = PneConfig {
        window: 2,
        n: 2,
        min_bigrams: 4,
        alpha: 0.1,
    };
    let s_b = (0.0 + 0.1) / (2.0 + 0.1 * 3.0) / 2.0;
    let s_a = (2.0 + 0.1) / (2.0 + 0.1 * 3.0) / 2.0;
    let expected = s_a - s_b;

    let history = ["x y z", "x y z", "x y w"];
    let tokens: Vec<TokenizedText> = history.iter().map(|t| basic_preprocess(t)).collect();
    let before = message_ngrams(&tokens, 2);
    let chain = MarkovModel::build(&before[..4], cfg.alpha);
    let wb = chain.window_score(&before[4..], cfg.window);
    ensure((wb - s_b).abs() < EXACT_TOL, || format!("window_score before {wb} != {s_b}"))?;
    let after = message_ngrams(&[basic_preprocess("x y z")], 2);
    let wa = chain.window_score(&after, cfg.window);
    ensure((wa - s_a).abs() < EXACT_TOL, || format!("window_score after {wa} != {s_a}"))?;

    let corpus = Corpus::new(vec![
        message("m1", "u2", "a", 1, history[0]),
        message("m2", "u2", "a", 2, history[1]),
        message("m3", "u2", "a", 3, history[2]),
        message("t", "u1", "b", 4, "bonjour"),
        message("r", "u2", "b", 5, "x y z"),
    ])
    .map_err(|e| e.to_string())?;
    let direct = pne_feature(&corpus, "t", 10, &cfg).map_err(|e| e.to_string())?;
    ensure(direct.applicable && (direct.score - expected).abs() < EXACT_TOL, || {
        format!("S(u) = {} (applicable {}), expected {expected}", direct.score, direct.applicable)
    })?;
    let cached = ContextFeaturizer::new(&corpus, cfg, 10).features("t").map_err(|e| e.to_string())?;
    ensure((cached.pne_score - expected).abs() < EXACT_TOL, || format!("cached S(u) = {}", cached.pne_score))?;

    let same = message_ngrams(&[basic_preprocess("x y w")], 2);
    let sym = score_user(&before, &same, &cfg);
    ensure(sym.s_after == sym.s_before && sym.s_user() == 0.0, || format!("symmetric case gave {:?}", sym))?;
    Ok(format!("S_B = {s_b:.12}, S_A = {s_a:.12}, S(u) = {expected:.12}; S_A = S_B gives 0"))
}

fn nb_fixture() -> Outcome {
    let docs: Vec<TokenizedText> = ["die", "die noob", "hi", "hi noob"]
        .iter()
        .map(|t| basic_preprocess(t))
        .collect();
    let refs: Vec<&TokenizedText> = docs.iter().collect();
    let vocab = Vocabulary::build(&refs).map_err(|e| e.to_string())?;
    let labels = [Label::Abuse, Label::Abuse, Label::NonAbuse, Label::NonAbuse];
    let rows: Vec<(BowVector, Label)> = docs.iter().zip(labels).map(|(d, l)| (vocab.bow(d), l)).collect();
    let model = train_nb(vocab.len(), &rows).map_err(|e| e.to_string())?;
    let p = nb_posterior(&model, &vocab.bow(&basic_preprocess("die")));
    ensure((p - 0.9).abs() < EXACT_TOL, || format!("posterior {p}"))?;
    Ok(format!("posterior(Abuse | {{die}}) = {p}"))
}

fn metrics_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let n = rng.gen_range(0..30);
        let preds: Vec<Label> = (0..n).map(|_| Label::from_bool(rng.gen())).collect();
        let truth: Vec<Label> = (0..n).map(|_| Label::from_bool(rng.gen())).collect();
        let m = compute_metrics(&preds, &truth).map_err(|e| e.to_string())?;
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for i in 0..n {
            match (preds[i] == Label::Abuse, truth[i] == Label::Abuse) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        ensure((m.tp, m.fp, m.fn_, m.tn) == (tp, fp, fn_, tn), || format!("counts differ on {preds:?} / {truth:?}"))?;
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        ensure(m.precision == p && m.recall == r && m.f_measure == f, || format!("ratios differ: {m:?}"))?;
    }
    let probs = [0.9, 0.8, 0.4, 0.2];
    let truth = [Label::Abuse, Label::Abuse, Label::NonAbuse, Label::Abuse];
    let curve = pr_curve(&probs, &truth).map_err(|e| e.to_string())?;
    let low = curve.points.last().unwrap();
    ensure(low.recall == 1.0 && low.precision == 0.75, || format!("lowest point {low:?}"))?;
    let above = precision_recall_at(&probs, &truth, 0.95);
    ensure(above.1 == 0.0, || format!("recall above max probability {}", above.1))?;
    Ok("10^4 random cases match brute force; PR endpoints give recall 1 at prevalence 0.75 and recall 0 above the maximum".into())
}

fn run_arms(ws: &Workspace, suffix: &str) -> Result<[f64; 3], String> {
    let arms = [("full", "advanced"), ("full", "basic"), ("classic", "basic")];
    let mut f = [0.0; 3];
    for (i, (arm, prep)) in arms.iter().enumerate() {
        let out = format!("metrics_{arm}_{prep}{suffix}.csv");
        ws.cli(&[
            "eval", "--seed", "1", "--arm", arm, "--prep", prep, "--balance", "unbalanced", "--k", "10", "-o", &out,
        ])?;
        f[i] = mean_f(&ws.path(&out))?;
    }
    Ok(f)
}

fn end_to_end(ws: &Workspace) -> Outcome {
    ws.cli(&["gen", "--seed", "1", "--abuse", "779", "--nonabuse", "1558", "-o", "corpus.jsonl"])?;
    let [adv, basic, classic] = run_arms(ws, "")?;
    let summary = format!("F full-advanced {adv:.4}, full-basic {basic:.4}, classic-basic {classic:.4}");
    ensure(adv >= F_MIN, || format!("{summary}: below {F_MIN}"))?;
    ensure(adv >= basic + ADVANCED_GAIN, || format!("{summary}: advanced gain under one point"))?;
    ensure(basic >= classic - CLASSIC_SLACK, || format!("{summary}: full-basic trails classic-basic"))?;
    Ok(summary)
}

fn determinism(ws: &Workspace) -> Outcome {
    let out = "metrics_repeat.csv";
    ws.cli(&["eval", "--seed", "1", "--arm", "full", "--prep", "advanced", "--balance", "unbalanced", "--k", "10", "-o", out])?;
    let a = std::fs::read(ws.path("metrics_full_advanced.csv")).map_err(|e| e.to_string())?;
    let b = std::fs::read(ws.path(out)).map_err(|e| e.to_string())?;
    ensure(a == b, || "repeated run wrote different metrics.csv bytes".into())?;
    Ok(format!("metrics.csv identical across runs ({} bytes)", a.len()))
}

fn prepared(corpus: &Corpus, seed: u64) -> Result<(Prepared, RunConfig), String> {
    let cfg = RunConfig {
        seed,
        prep_mode: PrepMode::Advanced,
        balance: BalanceMode::Unbalanced,
        arm: Arm::Full,
        ..RunConfig::default()
    };
    let p = Prepared::from_corpus(corpus, &cfg, &Lexicons::default()).map_err(|e| e.to_string())?;
    Ok((p, cfg))
}

fn importance_sanity(ws: &Workspace) -> Outcome {
    let corpus = ws.corpus()?;
    let mut last_is_nb = 0;
    let mut first_rank = None;
    for seed in 1..=ABLATION_REPS {
        let (p, cfg) = prepared(&corpus, seed)?;
        let mats = fold_matrices(&p, &cfg).map_err(|e| e.to_string())?;
        let report = importance_on_folds(&mats, &cfg.arm.feature_indices(), IMPORTANCE_RUNS, seed, &cfg.forest)
            .map_err(|e| e.to_string())?;
        if first_rank.is_none() {
            ensure(report.runs.len() == IMPORTANCE_RUNS, || format!("{} runs", report.runs.len()))?;
            first_rank = report.rank_of("nb_posterior");
        }
        let curve = ablation_curve(&mats, &report, &cfg).map_err(|e| e.to_string())?;
        if curve.last_feature == "nb_posterior" {
            last_is_nb += 1;
        }
    }
    let rank = first_rank.ok_or("nb_posterior missing from the importance report")? + 1;
    let share = last_is_nb as f64 / ABLATION_REPS as f64;
    let summary = format!("nb_posterior rank {rank} over {IMPORTANCE_RUNS} runs; last remaining in {last_is_nb}/{ABLATION_REPS} ablations");
    ensure(rank <= NB_TOP_RANK, || format!("{summary}: not in the top {NB_TOP_RANK}"))?;
    ensure(share >= ABLATION_SHARE, || format!("{summary}: below {ABLATION_SHARE}"))?;
    Ok(summary)
}

fn leakage_guard(ws: &Workspace) -> Outcome {
    const PROBE: &str = "zqxjleakprobe";
    let corpus = ws.corpus()?;
    let (base, cfg) = prepared(&corpus, 1)?;
    let folds = kfold_labels(&base.labels, cfg.k_folds, cfg.seed).map_err(|e| e.to_string())?;
    let item = folds[0].test[0];
    let id = base.ids[item].clone();
    let original = corpus.get(&id).ok_or("probe message missing")?.text.clone();
    let injected = format!("{original} {PROBE}");

    // the message itself is edited in the corpus: its test fold's stages are unchanged
    let edited = Corpus::new(
        corpus
            .messages()
            .iter()
            .map(|m| if m.id == id { Message { text: injected.clone(), ..m.clone() } } else { m.clone() })
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let (edited_p, _) = prepared(&edited, 1)?;
    let s0 = Stages::train(&base, &folds[0].train, &cfg).map_err(|e| e.to_string())?;
    let s1 = Stages::train(&edited_p, &folds[0].train, &cfg).map_err(|e| e.to_string())?;
    ensure(s0.nb.vocabulary == s1.nb.vocabulary, || "test message changed its fold's vocabulary".into())?;
    ensure(s0.tfidf.model == s1.tfidf.model, || "test message changed its fold's tf-idf tables".into())?;

    // injection on the test side only: no fold's training or other fold's metrics move
    let probe = prepared(&corpus, 1)?.0.with_test_text(item, &injected);
    let m0 = fold_matrices(&base, &cfg).map_err(|e| e.to_string())?;
    let m1 = fold_matrices(&probe, &cfg).map_err(|e| e.to_string())?;
    let features = cfg.arm.feature_indices();
    let r0 = evaluate_matrices(&m0, &features, &cfg, false).map_err(|e| e.to_string())?;
    let r1 = evaluate_matrices(&m1, &features, &cfg, false).map_err(|e| e.to_string())?;
    for (a, b) in m0.iter().zip(&m1) {
        ensure(a.vocabulary_size == b.vocabulary_size && a.x_train == b.x_train, || {
            format!("fold {} training changed", a.fold)
        })?;
    }
    for (a, b) in r0.folds.iter().zip(&r1.folds).skip(1) {
        ensure(a.metrics == b.metrics && a.scores == b.scores, || format!("fold {} metrics changed", a.fold))?;
    }
    Ok(format!("probe in fold 0 leaves all {} vocabularies and folds 1..{} unchanged", m0.len(), m0.len() - 1))
}

fn round_trip(ws: &Workspace) -> Outcome {
    let corpus = ws.corpus()?;
    let (p, cfg) = prepared(&corpus, 1)?;
    let train: Vec<usize> = (0..p.len()).filter(|i| i % 10 < 7).collect();
    let spec = cfg.lexicon_spec().map_err(|e| e.to_string())?;
    let model = PipelineModel::train(&p, &train, &cfg, spec).map_err(|e| e.to_string())?;
    let path = ws.path("model.json");
    save_model(&model, &path).map_err(|e| e.to_string())?;
    let loaded = load_model(&path).map_err(|e| e.to_string())?;
    let (a, b) = (model.scorer().map_err(|e| e.to_string())?, loaded.scorer().map_err(|e| e.to_string())?);
    for i in 0..ROUND_TRIP_FIXTURES {
        let text = &corpus.get(&p.ids[i]).ok_or("fixture missing")?.text;
        let x = a.score(text, p.context(i)).map_err(|e| e.to_string())?;
        let y = b.score(text, p.context(i)).map_err(|e| e.to_string())?;
        ensure(x.decision.to_bits() == y.decision.to_bits() && x.probability.to_bits() == y.probability.to_bits(), || {
            format!("fixture {i}: {x:?} != {y:?}")
        })?;
    }
    Ok(format!("{ROUND_TRIP_FIXTURES} fixtures score bit-identically after save and load"))
}

fn main() {
    let ws = Workspace {
        dir: tempfile::tempdir().expect("temporary directory"),
    };
    // (name, check, runtime budget in seconds)
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>, Option<f64>)> = vec![
        ("deobfuscation fixtures", Box::new(deobfuscation), None),
        ("levenshtein and index", Box::new(levenshtein_suite), Some(60.0)),
        ("PNE oracle", Box::new(pne_oracle), None),
        ("naive bayes fixture", Box::new(nb_fixture), None),
        ("metrics arithmetic", Box::new(metrics_suite), Some(10.0)),
        ("end-to-end synthetic", Box::new(|| end_to_end(&ws)), Some(600.0)),
        ("determinism", Box::new(|| determinism(&ws)), None),
        ("importance sanity", Box::new(|| importance_sanity(&ws)), Some(900.0)),
        ("leakage guard", Box::new(|| leakage_guard(&ws)), None),
        ("model round-trip", Box::new(|| round_trip(&ws)), None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(limit)) if secs > *limit => Err(format!("took {secs:.1}s, budget {limit}s")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
