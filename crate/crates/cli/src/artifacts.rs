//! Content-addressed artifact directories with JSON sidecars.
//!
//! Every stage output lives in `<root>/<stage>/<hash>/`, where the hash
//! covers the stage's configuration and the hashes of its inputs. Changing
//! any upstream setting therefore moves every downstream artifact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const HASH_LEN: usize = 16;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Sidecar {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<String>,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

/// Identity of one stage output.
#[derive(Debug, Clone)]
pub struct Stage {
    pub name: &'static str,
    pub hash: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<String>,
}

impl Stage {
    pub fn new<C: Serialize>(name: &'static str, config: &C, seed: u64, inputs: &[&str]) -> Stage {
        let config = serde_json::to_value(config).expect("config serializes");
        let inputs: Vec<String> = inputs.iter().map(|s| s.to_string()).collect();
        // Value maps are sorted, so this text is canonical
        let canonical = serde_json::json!({ "stage": name, "seed": seed, "config": config, "inputs": inputs });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        let hash = hex::encode(digest)[..HASH_LEN].to_string();
        Stage {
            name,
            hash,
            seed,
            config,
            inputs,
        }
    }

    pub fn dir(&self, root: &Path) -> PathBuf {
        root.join(self.name).join(&self.hash)
    }

    pub fn file(&self, root: &Path, file: &str) -> PathBuf {
        self.dir(root).join(file)
    }

    pub fn sidecar(&self, details: Value) -> Sidecar {
        Sidecar {
            stage: self.name.to_string(),
            config_hash: self.hash.clone(),
            seed: self.seed,
            config: self.config.clone(),
            inputs: self.inputs.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            details,
        }
    }
}

pub const SIDECAR: &str = "stage.json";

/// Writes `stage.json` into `dir`.
pub fn write_sidecar(dir: &Path, sidecar: &Sidecar) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let text = serde_json::to_string_pretty(sidecar)?;
    let p = dir.join(SIDECAR);
    std::fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))
}

pub fn read_sidecar(dir: &Path) -> Result<Sidecar> {
    let p = dir.join(SIDECAR);
    let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

/// Creates the parent directory and writes `path` through a buffered writer.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Opens an upstream artifact, explaining which command produces it.
pub fn open_input(path: &Path, producer: &str) -> Result<BufReader<File>> {
    if !path.exists() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} is missing; run `rvs {producer}` with the same configuration first", path.display()),
        )
        .into());
    }
    open(path)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn finish<W: Write>(mut w: W) -> Result<()> {
    w.flush()?;
    Ok(())
}
