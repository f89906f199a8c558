use std::path::PathBuf;

use lanefield::losses::total_loss;
use serde::{Deserialize, Serialize};

use super::{affinity_pair, as_planes, emit, Command};
use crate::error::{CliError, CliResult};
use crate::files::read_tensor;

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct LossArgs {
    /// Directory with `seg_logits.aft`, `haf.aft`, `vaf.aft` (as written by
    /// `infer`).
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory with `mask.aft`, `haf.aft`, `vaf.aft` (as written by `synth`
    /// or `encode`).
    #[arg(long)]
    pub gt: PathBuf,
    /// Foreground weight of the BCE term; background/foreground ratio when
    /// omitted.
    #[arg(long)]
    pub fg_weight: Option<f32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(a: &LossArgs) -> CliResult<()> {
    let load = |dir: &PathBuf, name: &str, c: usize| {
        let p = dir.join(name);
        as_planes(read_tensor(&p)?, c, &p)
    };
    let logits = load(&a.pred, "seg_logits.aft", 1)?;
    let (haf, vaf) = (load(&a.pred, "haf.aft", 1)?, load(&a.pred, "vaf.aft", 2)?);
    let target = load(&a.gt, "mask.aft", 1)?.map(|v| (v > 0.0) as u8 as f32);
    let gt = affinity_pair(load(&a.gt, "haf.aft", 1)?, load(&a.gt, "vaf.aft", 2)?)?;
    if logits.dims() != target.dims() {
        return Err(CliError::input(format!(
            "resolution mismatch: pred {:?}, gt {:?}",
            logits.dims(),
            target.dims()
        )));
    }
    let loss = total_loss(&logits, &haf, &vaf, &target, &gt, a.fg_weight)?;
    let body = serde_json::json!({
        "version": crate::manifest::VERSION,
        "config": { "fg_weight": a.fg_weight },
        "loss": loss,
    });
    emit(Command::Loss(a.clone()), &body, a.out.as_deref(), None, vec![a.pred.clone(), a.gt.clone()], true)
}
