use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Subcommand;
use lanefield::affinity::{AffinityPair, DecodedLanes};
use lanefield::TensorF32;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub mod arch;
pub mod decode;
pub mod encode;
pub mod eval;
pub mod infer;
pub mod loss;
pub mod roundtrip;
pub mod synth;

pub use arch::ArchArgs;
pub use decode::DecodeArgs;
pub use encode::EncodeArgs;
pub use eval::{EvalArgs, F1Args};
pub use infer::InferArgs;
pub use loss::LossArgs;
pub use roundtrip::RoundtripArgs;
pub use synth::SynthArgs;

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "lowercase")]
pub enum Command {
    /// Rasterize TuSimple labels and write mask/haf/vaf maps per frame.
    Encode(EncodeArgs),
    /// Decode seg/haf/vaf maps into lane instances.
    Decode(DecodeArgs),
    /// Score predicted TuSimple lines against ground truth.
    Eval(EvalArgs),
    /// F1 from accuracy and FP/FN rates.
    F1(F1Args),
    /// Shape trace, parameter and FLOP report for ENet-21.
    Arch(ArchArgs),
    /// Encode/decode synthetic scenes and report lane-identity agreement.
    Roundtrip(RoundtripArgs),
    /// Run the network on one image.
    Infer(InferArgs),
    /// Write one synthetic scene.
    Synth(SynthArgs),
    /// Loss breakdown of predicted maps against ground-truth maps.
    Loss(LossArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, clap::Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded location.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn run(self) -> CliResult<()> {
        match self {
            Command::Encode(a) => encode::run(&a),
            Command::Decode(a) => decode::run(&a),
            Command::Eval(a) => eval::run(&a),
            Command::F1(a) => eval::run_f1(&a),
            Command::Arch(a) => arch::run(&a),
            Command::Roundtrip(a) => roundtrip::run(&a),
            Command::Infer(a) => infer::run(&a),
            Command::Synth(a) => synth::run(&a),
            Command::Loss(a) => loss::run(&a),
            Command::Replay(a) => replay(&a),
        }
    }

    fn set_out(&mut self, out: PathBuf) -> CliResult<()> {
        match self {
            Command::Encode(a) => a.out = out,
            Command::Decode(a) => a.out = out,
            Command::Infer(a) => a.out = out,
            Command::Synth(a) => a.out = out,
            Command::Eval(a) => a.out = Some(out),
            Command::F1(a) => a.out = Some(out),
            Command::Arch(a) => a.out = Some(out),
            Command::Roundtrip(a) => a.out = Some(out),
            Command::Loss(a) => a.out = Some(out),
            Command::Replay(_) => return Err(CliError::input("a manifest cannot record a replay")),
        }
        Ok(())
    }
}

fn replay(a: &ReplayArgs) -> CliResult<()> {
    let m = RunManifest::read(&a.manifest)?;
    if m.version != crate::manifest::VERSION {
        log::warn!("manifest written by version {}, running {}", m.version, crate::manifest::VERSION);
    }
    let mut cmd = m.to_command()?;
    if let Some(out) = &a.out {
        cmd.set_out(out.clone())?;
    }
    cmd.run()
}

/// `W×H`, parsed from and printed as `160x88`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Size {
    pub width: usize,
    pub height: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n > 0);
        match (parse(w), parse(h)) {
            (Some(width), Some(height)) => Ok(Size { width, height }),
            _ => Err(format!("expected positive WIDTHxHEIGHT, got `{s}`")),
        }
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl TryFrom<String> for Size {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Size> for String {
    fn from(s: Size) -> String {
        s.to_string()
    }
}

/// Drops a leading batch dimension of 1 and checks the channel count.
pub(crate) fn as_planes(t: TensorF32, channels: usize, what: &Path) -> CliResult<TensorF32> {
    let (c, h, w) = t.planes().map_err(|e| CliError::at(what, e))?;
    if c != channels {
        return Err(CliError::at(what, format!("expected {channels} channel(s), found dims {:?}", t.dims())));
    }
    Ok(t.reshape(vec![c, h, w])?)
}

pub(crate) fn lanes_json(d: &DecodedLanes) -> serde_json::Value {
    let lanes: Vec<serde_json::Value> = d
        .lanes
        .iter()
        .map(|l| serde_json::json!({ "id": l.id, "points": l.points.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>() }))
        .collect();
    serde_json::json!({
        "resolution": [d.cluster_map.height(), d.cluster_map.width()],
        "lanes": lanes,
    })
}

pub(crate) fn affinity_pair(haf: TensorF32, vaf: TensorF32) -> CliResult<AffinityPair> {
    let af = AffinityPair { haf, vaf };
    af.resolution()?;
    Ok(af)
}

/// Appends version and config to a JSON object.
pub(crate) fn with_echo<T: Serialize>(mut body: serde_json::Value, config: &T) -> CliResult<serde_json::Value> {
    let config = serde_json::to_value(config).map_err(|e| CliError::Internal(e.to_string()))?;
    if let serde_json::Value::Object(m) = &mut body {
        m.insert("version".into(), crate::manifest::VERSION.into());
        m.insert("config".into(), config);
    }
    Ok(body)
}

/// Writes `text` and a newline to stdout. A closed pipe ends output quietly.
pub(crate) fn print_line(text: impl fmt::Display) -> CliResult<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Internal(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

/// Prints `body` and, when `out` is set, also writes it with a manifest.
pub(crate) fn emit(
    cmd: Command,
    body: &serde_json::Value,
    out: Option<&Path>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    print: bool,
) -> CliResult<()> {
    if print {
        print_line(serde_json::to_string_pretty(body).map_err(|e| CliError::Internal(e.to_string()))?)?;
    }
    if let Some(out) = out {
        crate::files::write_json(out, body)?;
        let name = out.file_name().map(PathBuf::from).unwrap_or_default();
        RunManifest::new(&cmd, seed, inputs, vec![name])?.write(&crate::files::manifest_path_for(out))?;
    }
    Ok(())
}
