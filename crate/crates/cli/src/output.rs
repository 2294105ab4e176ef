use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Read a whole input file, naming it on failure.
pub fn read_input(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read input file {}", path.display()))
}

/// Everything needed to rerun a command. One per output directory.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    /// Absolute input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_clock_secs: f64,
}

pub struct ManifestBuilder {
    started: Instant,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    seed: Option<u64>,
}

impl ManifestBuilder {
    pub fn start() -> Self {
        ManifestBuilder { started: Instant::now(), config: serde_json::Value::Null, inputs: BTreeMap::new(), seed: None }
    }

    pub fn config(&mut self, config: impl Serialize) -> anyhow::Result<()> {
        self.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) -> String {
        let digest = sha256_hex(bytes);
        let key = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        self.inputs.insert(key.display().to_string(), digest.clone());
        digest
    }

    pub fn write(self, dir: &Path) -> anyhow::Result<()> {
        let m = RunManifest {
            command_line: std::env::args().collect(),
            config: self.config,
            inputs: self.inputs,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
        };
        write_json(&dir.join(MANIFEST), &m)
    }
}

pub fn read_manifest(dir: &Path) -> anyhow::Result<RunManifest> {
    let path = dir.join(MANIFEST);
    let bytes = read_input(&path)?;
    serde_json::from_slice(&bytes).with_context(|| format!("malformed manifest {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn create(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<BufWriter<fs::File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

/// Output directory from `-o`, or `default` under the working directory.
pub fn out_dir(output: &Option<PathBuf>, default: &str) -> PathBuf {
    output.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// Counts over `bins` equal-width bins on `[lo, hi]`; the last bin is closed.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    let width = (hi - lo) / bins as f64;
    let edge = |i: usize| lo + (hi - lo) * i as f64 / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values.iter().filter(|v| v.is_finite() && **v >= lo && **v <= hi) {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (edge(i), edge(i + 1), c))
        .collect()
}
