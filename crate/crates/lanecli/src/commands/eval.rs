use std::collections::BTreeMap;
use std::path::PathBuf;

use lanefield::dataset::LaneAnnotation;
use lanefield::eval::{aggregate, evaluate_frame, f1_paper, EvalConfig, EvalResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{emit, print_line, with_echo, Command};
use crate::error::{CliError, CliResult};
use crate::files::read_labels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Predicted TuSimple JSON lines.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth TuSimple JSON lines.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = EvalConfig::default().px_threshold)]
    pub px_thresh: f64,
    #[arg(long, default_value_t = EvalConfig::default().lane_match_threshold)]
    pub lane_thresh: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Also write the JSON result here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn by_raw_file<'a>(frames: &'a [LaneAnnotation], what: &str) -> CliResult<BTreeMap<&'a str, &'a LaneAnnotation>> {
    let mut map = BTreeMap::new();
    for f in frames {
        if map.insert(f.raw_file.as_str(), f).is_some() {
            return Err(CliError::input(format!("{what} lists `{}` twice", f.raw_file)));
        }
    }
    Ok(map)
}

fn listing(names: &[&str]) -> String {
    let mut s: Vec<String> = names.iter().take(20).map(|n| format!("  {n}")).collect();
    if names.len() > 20 {
        s.push(format!("  ... and {} more", names.len() - 20));
    }
    s.join("\n")
}

/// Scores every ground-truth frame against the prediction with the same
/// `raw_file`. Frames present on only one side are a mismatch.
pub fn evaluate_files(pred: &[LaneAnnotation], gt: &[LaneAnnotation], cfg: &EvalConfig) -> CliResult<EvalResult> {
    cfg.validate()?;
    let preds = by_raw_file(pred, "prediction file")?;
    let gts = by_raw_file(gt, "ground-truth file")?;
    let missing: Vec<&str> = gts.keys().filter(|k| !preds.contains_key(*k)).copied().collect();
    let extra: Vec<&str> = preds.keys().filter(|k| !gts.contains_key(*k)).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = String::new();
        if !missing.is_empty() {
            msg += &format!("{} ground-truth frame(s) without a prediction:\n{}\n", missing.len(), listing(&missing));
        }
        if !extra.is_empty() {
            msg += &format!("{} predicted frame(s) not in ground truth:\n{}\n", extra.len(), listing(&extra));
        }
        return Err(CliError::Mismatch(msg.trim_end().into()));
    }
    if gts.is_empty() {
        return Err(CliError::input("no frames to evaluate"));
    }
    let results: Vec<EvalResult> = gts
        .par_iter()
        .map(|(name, g)| evaluate_frame(preds[name], g, cfg).map_err(|e| CliError::input(format!("{name}: {e}"))))
        .collect::<CliResult<_>>()?;
    Ok(aggregate(&results)?)
}

fn table(r: &EvalResult, frames: usize) -> String {
    let f1 = r.f1.map_or("n/a".into(), |f| format!("{:.4}", f));
    let c = r.counts;
    [
        format!("{:<10}{:>10}", "frames", frames),
        format!("{:<10}{:>10.4}   ({} / {} vertices)", "accuracy", r.accuracy, c.n_correct, c.n_gt),
        format!("{:<10}{:>10.4}   ({} / {} predicted lanes)", "fp", r.fp_rate, c.n_false, c.n_pred),
        format!("{:<10}{:>10.4}   ({} / {} lanes)", "fn", r.fn_rate, c.n_missed, c.n_gt_lanes),
        format!("{:<10}{:>10}", "f1", f1),
    ]
    .join("\n")
}

pub fn run(a: &EvalArgs) -> CliResult<()> {
    let cfg = EvalConfig {
        px_threshold: a.px_thresh,
        lane_match_threshold: a.lane_thresh,
    };
    let pred = read_labels(&a.pred)?;
    let gt = read_labels(&a.gt)?;
    let r = evaluate_files(&pred, &gt, &cfg)?;
    let body = serde_json::json!({ "frames": gt.len(), "result": r });
    let body = with_echo(body, &cfg)?;
    if a.format == Format::Table {
        print_line(table(&r, gt.len()))?;
    }
    emit(
        Command::Eval(a.clone()),
        &body,
        a.out.as_deref(),
        None,
        vec![a.pred.clone(), a.gt.clone()],
        a.format == Format::Json,
    )
}

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct F1Args {
    /// Accuracy as a fraction.
    #[arg(long)]
    pub accuracy: f64,
    #[arg(long)]
    pub fp: f64,
    #[arg(long = "fn")]
    pub fn_rate: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_f1(a: &F1Args) -> CliResult<()> {
    let f1 = f1_paper(a.accuracy, a.fp, a.fn_rate)?;
    let body = serde_json::json!({
        "accuracy": a.accuracy,
        "fp_rate": a.fp,
        "fn_rate": a.fn_rate,
        "f1": f1,
        "version": crate::manifest::VERSION,
    });
    emit(Command::F1(a.clone()), &body, a.out.as_deref(), None, vec![], true)
}
