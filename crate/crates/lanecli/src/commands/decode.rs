use std::path::PathBuf;

use lanefield::affinity::{decode, DecodeConfig};
use lanefield::dataset::lanes_to_annotation;
use lanefield::synth::default_h_samples;
use serde::{Deserialize, Serialize};

use super::{affinity_pair, as_planes, lanes_json, with_echo, Command};
use crate::error::{CliError, CliResult};
use crate::files::{labels_to_string, manifest_path_for, read_tensor, write_atomic, write_json};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct DecodeArgs {
    /// Segmentation probabilities, (1, H, W).
    #[arg(long)]
    pub seg: PathBuf,
    /// Horizontal field, (1, H, W).
    #[arg(long)]
    pub haf: PathBuf,
    /// Vertical field, (2, H, W).
    #[arg(long)]
    pub vaf: PathBuf,
    /// Lanes JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DecodeConfig::default().fg_threshold)]
    pub fg_thresh: f32,
    #[arg(long, default_value_t = DecodeConfig::default().assoc_threshold)]
    pub assoc_thresh: f32,
    #[arg(long, default_value_t = DecodeConfig::default().min_cluster_size)]
    pub min_cluster_size: usize,
    #[arg(long, default_value_t = DecodeConfig::default().min_lane_rows)]
    pub min_lane_rows: usize,
    #[arg(long, default_value_t = DecodeConfig::default().max_gap_rows)]
    pub max_gap_rows: usize,
    /// Also write the lanes as one TuSimple JSON line with this `raw_file`.
    #[arg(long, requires = "raw_file")]
    pub tusimple: Option<PathBuf>,
    #[arg(long)]
    pub raw_file: Option<String>,
}

impl DecodeArgs {
    pub fn config(&self) -> DecodeConfig {
        DecodeConfig {
            fg_threshold: self.fg_thresh,
            assoc_threshold: self.assoc_thresh,
            min_cluster_size: self.min_cluster_size,
            min_lane_rows: self.min_lane_rows,
            max_gap_rows: self.max_gap_rows,
        }
    }
}

pub fn run(a: &DecodeArgs) -> CliResult<()> {
    let cfg = a.config();
    cfg.validate()?;
    let seg = as_planes(read_tensor(&a.seg)?, 1, &a.seg)?;
    let af = affinity_pair(
        as_planes(read_tensor(&a.haf)?, 1, &a.haf)?,
        as_planes(read_tensor(&a.vaf)?, 2, &a.vaf)?,
    )?;
    if seg.dims()[1..] != af.haf.dims()[1..] {
        return Err(CliError::input(format!(
            "resolution mismatch: seg {:?}, fields {:?}",
            seg.dims(),
            af.haf.dims()
        )));
    }
    let lanes = decode(&seg, &af, &cfg)?;
    let body = with_echo(lanes_json(&lanes), &cfg)?;

    let mut outputs = vec![];
    if let Some(path) = &a.tusimple {
        let raw = a.raw_file.as_deref().unwrap_or_default();
        let ann = lanes_to_annotation(&lanes, &default_h_samples(), raw);
        write_atomic(path, labels_to_string(&[ann]).as_bytes())?;
        outputs.push(path.clone());
    }
    write_json(&a.out, &body)?;
    outputs.insert(0, a.out.file_name().map(PathBuf::from).unwrap_or_default());
    RunManifest::new(&Command::Decode(a.clone()), None, vec![a.seg.clone(), a.haf.clone(), a.vaf.clone()], outputs)?
        .write(&manifest_path_for(&a.out))
}
