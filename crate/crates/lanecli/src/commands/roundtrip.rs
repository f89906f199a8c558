use std::path::PathBuf;

use lanefield::affinity::{decode, encode_affinities, lane_identity_agreement, DecodeConfig};
use lanefield::rng::derive_seed;
use lanefield::synth::{perturb_fields, random_scene};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{emit, print_line, Command};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct RoundtripArgs {
    #[arg(long, default_value_t = 100)]
    pub scenes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Angular / additive field noise before decoding.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f32,
    /// Mean agreement required when `--noise` is 0.
    #[arg(long, default_value_t = 0.99)]
    pub min_agreement: f64,
    /// Only print the summary.
    #[arg(long)]
    pub quiet: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneResult {
    pub scene: usize,
    pub seed: u64,
    pub lanes: usize,
    pub decoded: usize,
    pub merge_split: bool,
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenes: usize,
    pub mean_agreement: f64,
    pub min_agreement: f64,
    pub exact_lane_count: usize,
    pub merge_split_scenes: usize,
}

pub fn run_scene(index: usize, base_seed: u64, noise: f32) -> CliResult<SceneResult> {
    let seed = derive_seed(base_seed, index as u64);
    let (spec, mask, _) = random_scene(seed)?;
    let af = perturb_fields(&encode_affinities(&mask)?, noise, derive_seed(seed, u64::MAX))?;
    let seg = mask.to_tensor().map(|v| (v > 0.0) as u8 as f32);
    let out = decode(&seg, &af, &DecodeConfig::default())?;
    Ok(SceneResult {
        scene: index,
        seed,
        lanes: mask.lane_count(),
        decoded: out.lanes.len(),
        merge_split: spec.merge_split,
        agreement: lane_identity_agreement(&mask, &out.cluster_map),
    })
}

pub fn summarize(results: &[SceneResult]) -> Summary {
    Summary {
        scenes: results.len(),
        mean_agreement: results.iter().map(|r| r.agreement).sum::<f64>() / results.len() as f64,
        min_agreement: results.iter().map(|r| r.agreement).fold(f64::INFINITY, f64::min),
        exact_lane_count: results.iter().filter(|r| r.lanes == r.decoded).count(),
        merge_split_scenes: results.iter().filter(|r| r.merge_split).count(),
    }
}

pub fn run(a: &RoundtripArgs) -> CliResult<()> {
    if a.scenes == 0 {
        return Err(CliError::input("--scenes must be at least 1"));
    }
    let results: Vec<SceneResult> = (0..a.scenes)
        .into_par_iter()
        .map(|i| run_scene(i, a.seed, a.noise))
        .collect::<CliResult<_>>()?;
    let s = summarize(&results);
    if !a.quiet {
        let mut text = format!("{:>6} {:>20} {:>5} {:>7} {:>5} {:>9}", "scene", "seed", "lanes", "decoded", "split", "agreement");
        for r in &results {
            text += &format!(
                "\n{:>6} {:>20} {:>5} {:>7} {:>5} {:>9.5}",
                r.scene, r.seed, r.lanes, r.decoded, r.merge_split, r.agreement
            );
        }
        print_line(text)?;
    }
    print_line(format_args!(
        "scenes {}  noise {}  mean agreement {:.5}  min {:.5}  exact lane count {}/{}",
        s.scenes, a.noise, s.mean_agreement, s.min_agreement, s.exact_lane_count, s.scenes
    ))?;
    let body = serde_json::json!({
        "version": crate::manifest::VERSION,
        "config": { "scenes": a.scenes, "seed": a.seed, "noise": a.noise, "min_agreement": a.min_agreement },
        "summary": s,
        "per_scene": results,
    });
    emit(Command::Roundtrip(a.clone()), &body, a.out.as_deref(), Some(a.seed), vec![], false)?;
    if a.noise == 0.0 && s.mean_agreement < a.min_agreement {
        return Err(CliError::Mismatch(format!(
            "mean agreement {:.5} below {}",
            s.mean_agreement, a.min_agreement
        )));
    }
    Ok(())
}
