//! CSV reports. Each file starts with a `# ` line holding the resolved run
//! configuration as JSON, then a header row; decimals carry 6 digits.

use std::io::Write;

use super::{AblationCurve, CvReport, ImportanceReport, PrCurve};
use crate::error::{Error, Result};

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<report>", e.into())
}

fn writer<W: Write>(mut out: W, config_json: &str, header: &[&str]) -> Result<csv::Writer<W>> {
    writeln!(out, "# {config_json}").map_err(|e| Error::io("<report>", e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    Ok(w)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<report>", e))
}

/// One row per fold, then a `mean` row.
pub fn write_metrics<W: Write>(out: W, config_json: &str, report: &CvReport) -> Result<()> {
    let mut w = writer(out, config_json, &["fold", "tp", "fp", "fn", "tn", "precision", "recall", "f_measure"])?;
    let rows = report
        .folds
        .iter()
        .map(|f| (f.fold.to_string(), &f.metrics))
        .chain(std::iter::once(("mean".to_string(), &report.mean)));
    for (fold, m) in rows {
        w.write_record([
            fold,
            m.tp.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
            m.tn.to_string(),
            f6(m.precision),
            f6(m.recall),
            f6(m.f_measure),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Per-fold curve points, then the averaged curve under fold `mean` with an
/// empty threshold column.
pub fn write_prcurve<W: Write>(out: W, config_json: &str, curves: &[PrCurve], average: &[(f64, f64)]) -> Result<()> {
    let mut w = writer(out, config_json, &["fold", "threshold", "precision", "recall"])?;
    for (f, c) in curves.iter().enumerate() {
        for p in &c.points {
            w.write_record([f.to_string(), f6(p.threshold), f6(p.precision), f6(p.recall)])
                .map_err(csv_err)?;
        }
    }
    for &(r, p) in average {
        w.write_record(["mean".to_string(), String::new(), f6(p), f6(r)])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// Features in decreasing order of mean importance.
pub fn write_importance<W: Write>(out: W, config_json: &str, report: &ImportanceReport) -> Result<()> {
    let mut w = writer(out, config_json, &["feature", "mean", "std", "runs"])?;
    for name in report.ranking() {
        let j = report.features.iter().position(|f| f == name).expect("ranked feature");
        w.write_record([name.to_string(), f6(report.mean[j]), f6(report.std[j]), report.runs.len().to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// Step 0 is the baseline with nothing removed; steps 1.. are removals.
pub fn write_ablation<W: Write>(out: W, config_json: &str, curve: &AblationCurve) -> Result<()> {
    let mut w = writer(out, config_json, &["step", "removed_feature", "remaining", "f_measure"])?;
    let total = curve.steps.len() + 1;
    w.write_record(["0".to_string(), String::new(), total.to_string(), f6(curve.baseline_f)])
        .map_err(csv_err)?;
    for s in &curve.steps {
        w.write_record([s.step.to_string(), s.removed_feature.clone(), s.remaining.to_string(), f6(s.f_measure)])
            .map_err(csv_err)?;
    }
    finish(w)
}
