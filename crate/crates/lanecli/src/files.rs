//! On-disk formats: `AFT1` tensors, `AFW1` weights and TuSimple JSON-lines
//! labels. Every write goes through a temp file in the target directory and a
//! rename, so readers never see partial output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lanefield::arch::{ArchSpec, WeightStore};
use lanefield::dataset::LaneAnnotation;
use lanefield::format::{decode_tensor, encode_tensor};
use lanefield::TensorF32;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::at(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::at(path, e))?;
    tmp.persist(path).map_err(|e| CliError::at(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::at(dir, e))
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::at(path, e))
}

pub fn read_tensor(path: &Path) -> CliResult<TensorF32> {
    decode_tensor(&read_bytes(path)?).map_err(|e| CliError::at(path, e))
}

pub fn write_tensor(path: &Path, t: &TensorF32) -> CliResult<()> {
    write_atomic(path, &encode_tensor(t))
}

pub fn read_weights(path: &Path, spec: &ArchSpec) -> CliResult<WeightStore> {
    WeightStore::from_afw_bytes_for(&read_bytes(path)?, spec).map_err(|e| CliError::at(path, e))
}

pub fn write_weights(path: &Path, w: &WeightStore) -> CliResult<()> {
    write_atomic(path, &w.to_afw_bytes())
}

/// One bad line of a JSON-lines label file.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    /// 1-based.
    pub line: usize,
    pub message: String,
}

/// Parses TuSimple JSON lines, skipping blank lines. Every line is tried so
/// that all failures can be reported at once.
pub fn parse_labels(text: &str) -> Result<Vec<LaneAnnotation>, Vec<LineError>> {
    let mut frames = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<LaneAnnotation>(line)
            .map_err(|e| e.to_string())
            .and_then(|a| a.validate().map(|_| a).map_err(|e| e.to_string()));
        match parsed {
            Ok(a) => frames.push(a),
            Err(message) => errors.push(LineError { line: i + 1, message }),
        }
    }
    if errors.is_empty() {
        Ok(frames)
    } else {
        Err(errors)
    }
}

pub fn labels_to_string(frames: &[LaneAnnotation]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serde_json::to_string(f).expect("annotation serializes"));
        out.push('\n');
    }
    out
}

pub fn read_labels(path: &Path) -> CliResult<Vec<LaneAnnotation>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::at(path, e))?;
    parse_labels(&text).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("  line {}: {}", e.line, e.message)).collect();
        CliError::Input(format!("{}: {} bad line(s)\n{}", path.display(), errs.len(), lines.join("\n")))
    })
}

/// Directory-safe name for a frame, e.g. `clips/0530/17/20.jpg` becomes
/// `clips_0530_17_20`.
pub fn frame_dir_name(raw_file: &str) -> String {
    let stem = match raw_file.rsplit_once('.') {
        Some((s, ext)) if !ext.contains('/') => s,
        _ => raw_file,
    };
    let name: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    let name = name.trim_matches('_');
    if name.is_empty() {
        "frame".into()
    } else {
        name.into()
    }
}

/// `lanes.json` → `lanes.manifest.json` in the same directory.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    output.with_file_name(format!("{stem}.manifest.json"))
}
