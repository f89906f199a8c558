use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lanefield::affinity::encode_affinities;
use lanefield::dataset::{rasterize, LaneAnnotation};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Command, Size};
use crate::error::{CliError, CliResult};
use crate::files::{create_dir, frame_dir_name, read_labels, write_tensor};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct EncodeArgs {
    /// TuSimple JSON-lines label file.
    #[arg(long)]
    pub labels: PathBuf,
    /// Output directory; one subdirectory per frame.
    #[arg(long)]
    pub out: PathBuf,
    /// Stroke thickness in map pixels.
    #[arg(long, default_value_t = 2)]
    pub thickness: usize,
    #[arg(long, default_value = "160x88")]
    pub res: Size,
}

fn encode_frame(ann: &LaneAnnotation, dir: &Path, a: &EncodeArgs) -> CliResult<Vec<PathBuf>> {
    let r = rasterize(ann, (a.res.height, a.res.width), a.thickness)?;
    if !r.skipped.is_empty() {
        log::debug!("{}: lanes {:?} have fewer than two points", ann.raw_file, r.skipped);
    }
    let af = encode_affinities(&r.mask)?;
    create_dir(dir)?;
    let mut written = Vec::new();
    for (name, t) in [("mask.aft", &r.mask.to_tensor()), ("haf.aft", &af.haf), ("vaf.aft", &af.vaf)] {
        write_tensor(&dir.join(name), t)?;
        written.push(PathBuf::from(dir.file_name().expect("frame dir has a name")).join(name));
    }
    Ok(written)
}

pub fn run(a: &EncodeArgs) -> CliResult<()> {
    if a.thickness == 0 {
        return Err(CliError::input("--thickness must be at least 1"));
    }
    let frames = read_labels(&a.labels)?;
    create_dir(&a.out)?;

    let mut seen: BTreeMap<String, &str> = BTreeMap::new();
    for f in &frames {
        let name = frame_dir_name(&f.raw_file);
        if let Some(prev) = seen.insert(name.clone(), &f.raw_file) {
            return Err(CliError::input(format!(
                "`{prev}` and `{}` both map to output directory `{name}`",
                f.raw_file
            )));
        }
    }

    let results: Vec<CliResult<Vec<PathBuf>>> = frames
        .par_iter()
        .map(|f| encode_frame(f, &a.out.join(frame_dir_name(&f.raw_file)), a))
        .collect();

    let mut outputs = Vec::new();
    let mut failed = 0;
    for (f, r) in frames.iter().zip(results) {
        match r {
            Ok(paths) => outputs.extend(paths),
            Err(e) => {
                failed += 1;
                log::error!("{}: {e}", f.raw_file);
            }
        }
    }
    RunManifest::new(&Command::Encode(a.clone()), None, vec![a.labels.clone()], outputs)?
        .write(&a.out.join("manifest.json"))?;
    log::info!("encoded {} of {} frames", frames.len() - failed, frames.len());
    if failed > 0 {
        return Err(CliError::input(format!("{failed} of {} frames failed", frames.len())));
    }
    Ok(())
}
