use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

/// Output directory of one invocation. Records every file it writes so the
/// manifest can list them with their digests.
pub struct OutDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, S: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub preset_table_version: u32,
    pub command: &'a str,
    pub preset: Option<&'a str>,
    pub seed: Option<u64>,
    /// Digest of the canonical JSON form of `spec`.
    pub config_sha256: String,
    pub spec: &'a S,
    pub outputs: &'a [OutputFile],
    pub parallel: bool,
    pub started_unix_s: u64,
    pub runtime_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn spec_hash<S: Serialize>(spec: &S) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(spec)?))
}

pub fn unix_seconds(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `name` through a temporary file, so an interrupted run never
    /// leaves a truncated artifact behind.
    pub fn write_with(&mut self, name: &str, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        let path = self.path(name);
        write_atomic(&path, fill)?;
        let digest = sha256_hex(&fs::read(&path).with_context(|| format!("reading back {}", path.display()))?);
        self.files.push(OutputFile { name: name.to_string(), sha256: digest });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_with(name, |w| writeln!(w, "{text}"))
    }

    pub fn finish<S: Serialize>(
        self,
        command: &str,
        preset: Option<&str>,
        seed: Option<u64>,
        spec: &S,
        started: SystemTime,
        runtime: Duration,
    ) -> Result<()> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            preset_table_version: giant_atom::presets::PRESET_TABLE_VERSION,
            command,
            preset,
            seed,
            config_sha256: spec_hash(spec)?,
            spec,
            outputs: &self.files,
            parallel: cfg!(feature = "parallel"),
            started_unix_s: unix_seconds(started),
            runtime_s: runtime.as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        write_atomic(&self.path(MANIFEST), |w| writeln!(w, "{text}"))
    }
}

pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let file = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        let mut w = BufWriter::new(file);
        fill(&mut w).with_context(|| format!("writing {}", tmp.display()))?;
        w.flush().with_context(|| format!("writing {}", tmp.display()))?;
    }
    fs::rename(&tmp, path).with_context(|| format!("moving {} into place", path.display()))?;
    Ok(())
}
