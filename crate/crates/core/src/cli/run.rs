use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::config::Settings;
use super::CliError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub config: BTreeMap<String, Value>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

/// Bookkeeping for one invocation: digests inputs as they are opened and
/// tracks written outputs.
pub struct Run {
    pub out_dir: PathBuf,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
    notes: Vec<String>,
}

fn digest(path: &Path) -> std::io::Result<(String, u64)> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), total))
}

impl Run {
    pub fn new(out_dir: PathBuf) -> Self {
        Run {
            out_dir,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Opens an input file for reading and records its digest.
    pub fn open(&mut self, path: &Path) -> Result<Box<dyn BufRead>, CliError> {
        let fail = |e: std::io::Error| CliError::usage(format!("cannot read {}: {e}", path.display()));
        let (sha256, bytes) = digest(path).map_err(fail)?;
        let file = File::open(path).map_err(fail)?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256,
            bytes,
        });
        Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
    }

    pub fn note(&mut self, message: impl Into<String>) {
        let m = message.into();
        log::warn!("{m}");
        self.notes.push(m);
    }

    fn ensure_dir(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out_dir).map_err(|e| {
            CliError::usage(format!("cannot create {}: {e}", self.out_dir.display()))
        })
    }

    /// Writes `contents` to `<out-dir>/<name>`.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        self.ensure_dir()?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(name.to_owned());
        Ok(())
    }

    /// Writes to an explicit path (outside the output directory if asked to).
    pub fn write_path(&mut self, path: &Path, contents: &[u8]) -> Result<(), CliError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::usage(format!("cannot create {}: {e}", parent.display())))?;
        }
        fs::write(path, contents)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn finish(mut self, subcommand: &str, seed: u64, settings: &Settings) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            subcommand: subcommand.to_owned(),
            seed,
            config: settings.snapshot(),
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
            notes: std::mem::take(&mut self.notes),
        };
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        self.write("manifest.json", json.as_bytes())?;
        Ok(manifest)
    }
}
