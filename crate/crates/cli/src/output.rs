//! Atomic output files and the per-run manifest.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Writes `path` through a temporary file in the same directory, renamed into
/// place once `fill` succeeds.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    let mut out = BufWriter::new(tmp);
    fill(&mut out)?;
    let tmp = out.into_inner().map_err(|e| e.into_error())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// `out.csv` with `suffix = "trace.csv"` gives `out.trace.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: &'static str,
    pub flags: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
}

/// Collects what a run read and wrote, then writes the manifest beside the
/// primary output.
pub struct Run {
    start: Instant,
    subcommand: &'static str,
    flags: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    pub passes: Option<usize>,
    pub probes: Option<usize>,
}

impl Run {
    pub fn new<T: Serialize>(subcommand: &'static str, flags: &T) -> Self {
        Self {
            start: Instant::now(),
            subcommand,
            flags: serde_json::to_value(flags).unwrap_or(serde_json::Value::Null),
            inputs: Vec::new(),
            outputs: Vec::new(),
            passes: None,
            probes: None,
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_owned());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_owned());
    }

    /// Writes `<primary stem>.manifest.json` and returns its path.
    pub fn finish(self, primary: &Path) -> Result<PathBuf> {
        let digest = |paths: &[PathBuf]| -> Result<Vec<FileDigest>> {
            paths
                .iter()
                .map(|p| {
                    Ok(FileDigest {
                        path: p.clone(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let manifest = RunManifest {
            subcommand: self.subcommand.to_owned(),
            version: env!("CARGO_PKG_VERSION"),
            flags: self.flags,
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
            passes: self.passes,
            probes: self.probes,
        };
        let path = sibling(primary, "manifest.json");
        write_json(&path, &manifest)?;
        Ok(path)
    }
}
