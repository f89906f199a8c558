use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::commands::Command;
use crate::error::{CliError, CliResult};
use crate::files::write_json;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to re-run a command. Written next to its outputs;
/// `outputs` are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(cmd: &Command, seed: Option<u64>, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> CliResult<Self> {
        let tagged = serde_json::to_value(cmd).map_err(|e| CliError::Internal(format!("manifest: {e}")))?;
        let (command, config) = match tagged {
            serde_json::Value::Object(mut m) => (
                m.remove("command").and_then(|c| c.as_str().map(String::from)),
                m.remove("config"),
            ),
            _ => (None, None),
        };
        let (Some(command), Some(config)) = (command, config) else {
            return Err(CliError::Internal("command did not serialize as tag + config".into()));
        };
        Ok(Self {
            command,
            config,
            seed,
            version: VERSION.into(),
            inputs,
            outputs,
        })
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::at(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::at(path, e))
    }

    /// The command this manifest records.
    pub fn to_command(&self) -> CliResult<Command> {
        let tagged = serde_json::json!({ "command": self.command, "config": self.config });
        serde_json::from_value(tagged).map_err(|e| CliError::input(format!("manifest config for `{}`: {e}", self.command)))
    }
}
