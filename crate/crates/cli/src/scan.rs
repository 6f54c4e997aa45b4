//! Bound-state classification over a parameter grid, written in chunks so an
//! interrupted scan can pick up where it stopped.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use giant_atom::spectral::classify;
use giant_atom::SystemConfig;
use serde::{Deserialize, Serialize};

use crate::output::{spec_hash, write_atomic, OutDir};
use crate::ConfigError;

pub const CHUNK_DIR: &str = "scan_chunks";
const SCAN_HEADER: &str = "n_points,omega0_tau0_pi,gamma_tau0_pi,case_label,n_modes,modes";

/// `lo:hi:count` (inclusive, evenly spaced) or a single value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        giant_atom::field::linspace(self.lo, self.hi, self.count)
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let range = match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                Range { lo: v, hi: v, count: 1 }
            }
            [lo, hi, count] => {
                let count = count.trim().parse::<usize>().map_err(|e| format!("{count:?}: {e}"))?;
                Range { lo: num(lo)?, hi: num(hi)?, count }
            }
            _ => return Err(format!("expected VALUE or LO:HI:COUNT, got {s:?}")),
        };
        if !(range.lo.is_finite() && range.hi.is_finite()) || range.count == 0 || range.hi < range.lo {
            return Err(format!("need finite LO <= HI and COUNT >= 1, got {s:?}"));
        }
        if range.count == 1 && range.lo != range.hi {
            return Err(format!("a single-point range needs LO = HI, got {s:?}"));
        }
        Ok(range)
    }
}

/// `lo:hi` (inclusive) or a single value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl FromStr for IntRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
        let (lo, hi) = match s.split_once(':') {
            Some((lo, hi)) => (num(lo)?, num(hi)?),
            None => (num(s)?, num(s)?),
        };
        if lo == 0 || hi < lo {
            return Err(format!("need 1 <= LO <= HI, got {s:?}"));
        }
        Ok(IntRange { lo, hi })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub n_points: IntRange,
    pub omega0_tau0_pi: Range,
    pub gamma_tau0_pi: Range,
    pub reflectivity: f64,
    pub gamma_ext_ratio: f64,
    pub chunk_size: usize,
}

impl ScanSpec {
    fn points(&self) -> Vec<(usize, f64, f64)> {
        let ws = self.omega0_tau0_pi.values();
        let gs = self.gamma_tau0_pi.values();
        let mut out = Vec::with_capacity((self.n_points.hi - self.n_points.lo + 1) * ws.len() * gs.len());
        for n in self.n_points.lo..=self.n_points.hi {
            for &w in &ws {
                for &g in &gs {
                    out.push((n, w, g));
                }
            }
        }
        out
    }
}

fn row(n: usize, w_pi: f64, g_pi: f64, base: &ScanSpec) -> Result<String> {
    let config = SystemConfig::new(n, w_pi * PI, g_pi * PI)
        .and_then(|c| c.with_reflectivity(base.reflectivity))
        .and_then(|c| c.with_gamma_ext_ratio(base.gamma_ext_ratio))?;
    let modes = classify(&config);
    let listed: Vec<String> = modes
        .modes
        .iter()
        .map(|m| format!("{:?}:{}:{}", m.source, m.k, m.omega_tau0 / PI))
        .collect();
    Ok(format!("{n},{w_pi},{g_pi},{:?},{},{}", modes.case_label, modes.len(), listed.join(";")))
}

fn chunk_name(i: usize) -> String {
    format!("chunk_{i:05}.csv")
}

pub struct ScanReport {
    pub points: usize,
    pub chunks: usize,
    pub reused: usize,
}

/// Classifies every grid point and writes `scan.csv`. With `resume`, chunks
/// already present in the chunk directory are reused, provided they were
/// produced by the same scan.
pub fn run(spec: &ScanSpec, out: &mut OutDir, resume: bool) -> Result<ScanReport> {
    if spec.chunk_size == 0 {
        bail!(ConfigError("chunk size must be positive".into()));
    }
    let dir = out.path(CHUNK_DIR);
    let stamp_path = dir.join("scan_spec.sha256");
    let stamp = spec_hash(spec)?;
    if resume && dir.exists() {
        let previous = fs::read_to_string(&stamp_path).unwrap_or_default();
        if previous.trim() != stamp {
            bail!(ConfigError(format!("{} belongs to a different scan; rerun without --resume", dir.display())));
        }
    } else if dir.exists() {
        fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&stamp_path, |w| writeln!(w, "{stamp}"))?;

    let points = spec.points();
    let chunks: Vec<&[(usize, f64, f64)]> = points.chunks(spec.chunk_size).collect();
    let mut reused = 0;
    for (i, chunk) in chunks.iter().enumerate() {
        let path = dir.join(chunk_name(i));
        if resume && path.exists() {
            reused += 1;
            continue;
        }
        let rows: Vec<String> = chunk.iter().map(|&(n, w, g)| row(n, w, g, spec)).collect::<Result<_>>()?;
        write_atomic(&path, |w| rows.iter().try_for_each(|r| writeln!(w, "{r}")))?;
        log::info!("chunk {}/{} done", i + 1, chunks.len());
    }

    let bodies: Vec<String> = (0..chunks.len())
        .map(|i| read_chunk(&dir.join(chunk_name(i))))
        .collect::<Result<_>>()?;
    out.write_with("scan.csv", |w| {
        writeln!(w, "{SCAN_HEADER}")?;
        bodies.iter().try_for_each(|b| w.write_all(b.as_bytes()))
    })?;
    Ok(ScanReport { points: points.len(), chunks: chunks.len(), reused })
}

fn read_chunk(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
