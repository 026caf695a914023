use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use abusedet::classify::{load_model, save_model, PipelineModel};
use abusedet::corpus::{generate_synthetic, split_train_test, SynthConfig};
use abusedet::eval::report::{write_ablation, write_importance, write_metrics, write_prcurve};
use abusedet::eval::{
    ablation_curve, average_pr, compute_metrics, cross_validate, fold_matrices, importance_on_folds, CvReport,
};
use abusedet::features::Lexicons;
use abusedet::pipeline::{context_features, load_dataset, Prepared};
use abusedet::usermodel::{ContextFeaturizer, ContextFeatures};
use abusedet::{Corpus, Error, Label, RunConfig, FEATURE_NAMES};
use log::{info, warn};

use crate::Failure;

type Outcome = Result<(), Failure>;

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| io_err(path)(e.into())
}

fn lexicons(cfg: &RunConfig) -> Result<Lexicons, Error> {
    cfg.lexicon_spec()?.compile()
}

fn prepare(cfg: &RunConfig, corpus_path: &Path) -> Result<Prepared, Error> {
    info!("config {}", cfg.to_json());
    let corpus = Corpus::load(corpus_path)?;
    let (filtered, ds) = load_dataset(&corpus, cfg)?;
    let (abuse, nonabuse) = ds.label_counts();
    info!(
        "dataset: {} messages ({abuse} abuse, {nonabuse} non-abuse), kinds {:?}, {:?}",
        ds.len(),
        cfg.kinds,
        cfg.balance
    );
    let contexts = context_features(&filtered, &ds, cfg)?;
    Prepared::new(&ds, &contexts, lexicons(cfg)?.for_mode(cfg.prep_mode))
}

pub fn gen(
    cfg: &RunConfig,
    abuse: usize,
    nonabuse: usize,
    obfuscation_rate: Option<f64>,
    synth_config: Option<&Path>,
    output: &Path,
) -> Outcome {
    if abuse == 0 || nonabuse == 0 {
        return Err(Failure::Usage("--abuse and --nonabuse must be positive".into()));
    }
    let mut synth = match synth_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    synth.n_abuse = abuse;
    synth.n_nonabuse = nonabuse;
    synth.seed = cfg.seed;
    if let Some(r) = obfuscation_rate {
        synth.obfuscation_rate = r;
    }
    info!("generator {}", serde_json::to_string(&synth).expect("generator settings serialize"));
    let corpus = generate_synthetic(&synth)?;
    corpus.save(output)?;
    let (a, n) = corpus.label_counts();
    info!("wrote {} messages ({a} abuse, {n} non-abuse) to {}", corpus.len(), output.display());
    Ok(())
}

/// Position of every dataset item in the train part of a 70/30 split.
fn train_split(cfg: &RunConfig, corpus_path: &Path, prepared: &Prepared) -> Result<Vec<bool>, Error> {
    let corpus = Corpus::load(corpus_path)?;
    let (_, ds) = load_dataset(&corpus, cfg)?;
    let (train, _) = split_train_test(&ds, cfg.seed)?;
    let train_ids: std::collections::HashSet<&str> = train.items.iter().map(|(m, _)| m.id.as_str()).collect();
    Ok(prepared.ids.iter().map(|id| train_ids.contains(id.as_str())).collect())
}

pub fn extract(cfg: &RunConfig, corpus_path: &Path, output: &Path) -> Outcome {
    let prepared = prepare(cfg, corpus_path)?;
    let in_train = train_split(cfg, corpus_path, &prepared)?;
    let train: Vec<usize> = (0..prepared.len()).filter(|&i| in_train[i]).collect();
    let stages = abusedet::pipeline::Stages::train(&prepared, &train, cfg)?;
    let all: Vec<usize> = (0..prepared.len()).collect();
    let rows = prepared.rows(&stages, &all, false);

    let mut out = create(output)?;
    writeln!(out, "# {}", cfg.to_json()).map_err(io_err(output))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id", "label", "split"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header).map_err(csv_err(output))?;
    for (i, row) in rows.iter().enumerate() {
        let mut record = vec![
            prepared.ids[i].clone(),
            prepared.labels[i].as_u8().to_string(),
            if in_train[i] { "train" } else { "test" }.to_string(),
        ];
        record.extend(row.iter().map(|v| format!("{v:.6}")));
        w.write_record(&record).map_err(csv_err(output))?;
    }
    w.flush().map_err(io_err(output))?;
    info!("wrote {} feature rows to {}", rows.len(), output.display());
    Ok(())
}

pub fn train(cfg: &RunConfig, corpus_path: &Path, output: &Path) -> Outcome {
    let prepared = prepare(cfg, corpus_path)?;
    let in_train = train_split(cfg, corpus_path, &prepared)?;
    let (train, test): (Vec<usize>, Vec<usize>) = (0..prepared.len()).partition(|&i| in_train[i]);
    let model = PipelineModel::train(&prepared, &train, cfg, cfg.lexicon_spec()?)?;

    let rows = prepared.rows(&model.stages(), &test, true);
    let mut preds = Vec::with_capacity(rows.len());
    for r in &rows {
        let s = model.classifier.decision(r)?;
        let p = model.classifier.probability(s).unwrap_or(0.0);
        preds.push(Label::from_bool(p >= cfg.threshold));
    }
    let m = compute_metrics(&preds, &prepared.labels_of(&test))?;
    info!(
        "held-out {} messages at threshold {}: precision {:.4} recall {:.4} f {:.4}",
        test.len(),
        cfg.threshold,
        m.precision,
        m.recall,
        m.f_measure
    );
    save_model(&model, output)?;
    info!("saved model to {}", output.display());
    Ok(())
}

fn log_cv(report: &CvReport) {
    let m = &report.mean;
    info!(
        "{}-fold mean: precision {:.4} recall {:.4} f {:.4}",
        report.folds.len(),
        m.precision,
        m.recall,
        m.f_measure
    );
}

pub fn eval(cfg: &RunConfig, corpus_path: &Path, output: &Path) -> Outcome {
    let prepared = prepare(cfg, corpus_path)?;
    let report = cross_validate(&prepared, cfg)?;
    log_cv(&report);
    write_metrics(create(output)?, &cfg.to_json(), &report)?;
    Ok(())
}

/// Recall levels of the averaged curve.
const PR_GRID: usize = 101;

pub fn prcurve(cfg: &RunConfig, corpus_path: &Path, output: &Path) -> Outcome {
    let prepared = prepare(cfg, corpus_path)?;
    let report = cross_validate(&prepared, cfg)?;
    log_cv(&report);
    let curves = report.pr_curves()?;
    let average = average_pr(&curves, PR_GRID);
    write_prcurve(create(output)?, &cfg.to_json(), &curves, &average)?;
    Ok(())
}

pub fn importance(cfg: &RunConfig, corpus_path: &Path, output: &Path) -> Outcome {
    let prepared = prepare(cfg, corpus_path)?;
    let mats = fold_matrices(&prepared, cfg)?;
    let report = importance_on_folds(&mats, &cfg.arm.feature_indices(), cfg.importance_runs, cfg.seed, &cfg.forest)?;
    info!("top features: {}", report.ranking()[..3].join(", "));
    write_importance(create(output)?, &cfg.to_json(), &report)?;
    Ok(())
}

pub fn ablate(cfg: &RunConfig, corpus_path: &Path, output: &Path) -> Outcome {
    let prepared = prepare(cfg, corpus_path)?;
    let mats = fold_matrices(&prepared, cfg)?;
    let report = importance_on_folds(&mats, &cfg.arm.feature_indices(), cfg.importance_runs, cfg.seed, &cfg.forest)?;
    let curve = ablation_curve(&mats, &report, cfg)?;
    info!("baseline f {:.4}, last feature {}", curve.baseline_f, curve.last_feature);
    write_ablation(create(output)?, &cfg.to_json(), &curve)?;
    Ok(())
}

pub fn classify(
    cfg: &RunConfig,
    model_path: &Path,
    corpus_path: Option<&Path>,
    text: Option<&str>,
    output: Option<&Path>,
) -> Outcome {
    let model = load_model(model_path)?;
    let scorer = model.scorer()?;
    let mut inputs: Vec<(String, String, ContextFeatures)> = Vec::new();
    if let Some(p) = corpus_path {
        let corpus = Corpus::load(p)?;
        let featurizer = ContextFeaturizer::new(&corpus, model.config.pne, model.config.window_after);
        for m in corpus.messages() {
            inputs.push((m.id.clone(), m.text.clone(), featurizer.features(&m.id)?));
        }
    } else if let Some(t) = text {
        warn!("no corpus given: context features use their defaults (no respondents, PNE not applicable)");
        inputs.push(("text".to_string(), t.to_string(), ContextFeatures::default()));
    }
    let sink: Box<dyn Write> = match output {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let name = output.unwrap_or(Path::new("<stdout>"));
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["id", "decision", "probability", "label"]).map_err(csv_err(name))?;
    let mut flagged = 0;
    for (id, text, ctx) in &inputs {
        let s = scorer.score(text, ctx)?;
        let label = u8::from(s.probability >= cfg.threshold);
        flagged += usize::from(label);
        w.write_record([id.clone(), format!("{:.6}", s.decision), format!("{:.6}", s.probability), label.to_string()])
            .map_err(csv_err(name))?;
    }
    w.flush().map_err(io_err(name))?;
    info!("scored {} messages, {flagged} flagged at threshold {}", inputs.len(), cfg.threshold);
    Ok(())
}
