use std::path::PathBuf;

use lanefield::affinity::encode_affinities;
use lanefield::synth::{generate, random_scene, SceneSpec};
use serde::{Deserialize, Serialize};

use super::Command;
use crate::error::CliResult;
use crate::files::{create_dir, labels_to_string, write_atomic, write_json, write_tensor};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Fix the lane count instead of drawing it.
    #[arg(long)]
    pub lanes: Option<usize>,
    /// Force merge/split on or off.
    #[arg(long)]
    pub merge_split: Option<bool>,
}

pub fn run(a: &SynthArgs) -> CliResult<()> {
    let (spec, mask, ann) = if a.lanes.is_none() && a.merge_split.is_none() {
        random_scene(a.seed)?
    } else {
        let mut spec = SceneSpec::random(a.seed);
        spec.lane_count = a.lanes.unwrap_or(spec.lane_count);
        spec.merge_split = a.merge_split.unwrap_or(spec.merge_split);
        let (mask, ann) = generate(&spec)?;
        (spec, mask, ann)
    };
    let af = encode_affinities(&mask)?;
    create_dir(&a.out)?;
    write_tensor(&a.out.join("mask.aft"), &mask.to_tensor())?;
    write_tensor(&a.out.join("haf.aft"), &af.haf)?;
    write_tensor(&a.out.join("vaf.aft"), &af.vaf)?;
    write_atomic(&a.out.join("label.json"), labels_to_string(&[ann]).as_bytes())?;
    write_json(&a.out.join("scene.json"), &spec)?;
    let outputs = ["mask.aft", "haf.aft", "vaf.aft", "label.json", "scene.json"].map(PathBuf::from).to_vec();
    RunManifest::new(&Command::Synth(a.clone()), Some(a.seed), vec![], outputs)?.write(&a.out.join("manifest.json"))
}
