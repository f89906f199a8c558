use std::path::{Path, PathBuf};

use lanefield::affinity::{decode, DecodeConfig};
use lanefield::arch::{build_enet21, forward, WeightStore};
use lanefield::dataset::{add_noise, NoiseKind};
use lanefield::ops::{sigmoid, Mode};
use lanefield::TensorF32;
use serde::{Deserialize, Serialize};

use super::{affinity_pair, lanes_json, with_echo, Command, Size};
use crate::error::{CliError, CliResult};
use crate::files::{create_dir, read_tensor, read_weights, write_json, write_tensor};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, PartialEq, clap::Args, Serialize, Deserialize)]
pub struct InferArgs {
    /// AFW1 weight file.
    #[arg(long, required_unless_present = "random_init", conflicts_with = "random_init")]
    pub weights: Option<PathBuf>,
    /// Seed for randomly initialized weights.
    #[arg(long)]
    pub random_init: Option<u64>,
    /// PNG/JPEG (resized to `--input`) or an AFT1 tensor of shape (3, H, W)
    /// with values in [0, 1].
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also decode the maps into `lanes.json`.
    #[arg(long)]
    pub decode: bool,
    #[arg(long, default_value = "640x352")]
    pub input: Size,
    #[arg(long)]
    pub shared_heads: bool,
    #[arg(long, value_enum)]
    pub noise: Option<Noise>,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f32,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Gaussian,
    Speckle,
}

impl From<Noise> for NoiseKind {
    fn from(n: Noise) -> Self {
        match n {
            Noise::Gaussian => NoiseKind::Gaussian,
            Noise::Speckle => NoiseKind::Speckle,
        }
    }
}

fn is_aft(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("aft"))
}

/// Loads the input as a `(1, 3, H, W)` batch.
fn load_image(path: &Path, size: Size) -> CliResult<TensorF32> {
    let want = [3, size.height, size.width];
    if is_aft(path) {
        let t = read_tensor(path)?;
        let (c, h, w) = t.planes().map_err(|e| CliError::at(path, e))?;
        if [c, h, w] != want {
            return Err(CliError::at(path, format!("expected dims {want:?}, found {:?}", t.dims())));
        }
        return Ok(t.reshape(vec![1, c, h, w])?);
    }
    let img = image::open(path).map_err(|e| CliError::at(path, e))?.to_rgb8();
    let img = image::imageops::resize(&img, size.width as u32, size.height as u32, image::imageops::FilterType::Triangle);
    let plane = size.width * size.height;
    let raw = img.into_raw();
    let data = (0..3 * plane).map(|i| raw[(i % plane) * 3 + i / plane] as f32 / 255.0).collect();
    Ok(TensorF32::new(vec![1, 3, size.height, size.width], data)?)
}

pub fn run(a: &InferArgs) -> CliResult<()> {
    if !a.input.width.is_multiple_of(8) || !a.input.height.is_multiple_of(8) {
        return Err(CliError::input(format!("--input {} must have sides divisible by 8", a.input)));
    }
    let spec = build_enet21().with_shared_heads(a.shared_heads);
    let (weights, seed) = match (&a.weights, a.random_init) {
        (Some(p), _) => (read_weights(p, &spec)?, None),
        (None, Some(s)) => (WeightStore::random(&spec, s), Some(s)),
        (None, None) => return Err(CliError::input("need --weights or --random-init")),
    };
    let mut image = load_image(&a.image, a.input)?;
    if let Some(kind) = a.noise {
        image = add_noise(&image, kind.into(), a.noise_sigma, a.noise_seed)?;
    }
    create_dir(&a.out)?;

    let out = forward(&spec, &weights, &image, Mode::Infer, 0)?;
    let (h, w) = (a.input.height / 4, a.input.width / 4);
    let plane = |t: TensorF32, c: usize| -> CliResult<TensorF32> {
        if t.dims() != [1, c, h, w] {
            return Err(CliError::Internal(format!("head output {:?}, expected [1, {c}, {h}, {w}]", t.dims())));
        }
        Ok(t.reshape(vec![c, h, w])?)
    };
    let logits = plane(out.seg_logits, 1)?;
    let prob = sigmoid(&logits);
    let af = affinity_pair(plane(out.haf, 1)?, plane(out.vaf, 2)?)?;

    let mut outputs = Vec::new();
    for (name, t) in [("seg.aft", &prob), ("seg_logits.aft", &logits), ("haf.aft", &af.haf), ("vaf.aft", &af.vaf)] {
        write_tensor(&a.out.join(name), t)?;
        outputs.push(PathBuf::from(name));
    }
    if a.decode {
        let cfg = DecodeConfig::default();
        let lanes = decode(&prob, &af, &cfg)?;
        write_json(&a.out.join("lanes.json"), &with_echo(lanes_json(&lanes), &cfg)?)?;
        outputs.push("lanes.json".into());
    }
    let mut inputs = vec![a.image.clone()];
    inputs.extend(a.weights.clone());
    RunManifest::new(&Command::Infer(a.clone()), seed, inputs, outputs)?.write(&a.out.join("manifest.json"))
}
