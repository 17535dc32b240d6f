//! Atomic file output and run manifests.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use skillrecall_core::{Error, Result};

/// Writes through a temporary file in the target directory, renamed into
/// place only once `fill` succeeds.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let tmp = tempfile::NamedTempFile::new_in(&dir)?;
    {
        let mut writer = BufWriter::new(tmp.as_file());
        fill(&mut writer)?;
        writer.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub seed: u64,
    pub version: &'static str,
    pub wall_time_secs: f64,
}

pub struct ManifestBuilder {
    command: String,
    flags: serde_json::Value,
    seed: u64,
    inputs: Vec<InputHash>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, flags: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_owned(),
            flags,
            seed,
            inputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputHash {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    /// `manifest.json` inside a directory output, `<out>.manifest.json`
    /// next to a file output.
    pub fn finish(self, out: &Path, is_dir: bool) -> Result<()> {
        let path = if is_dir {
            out.join("manifest.json")
        } else {
            sidecar_path(out, "manifest.json")
        };
        let manifest = RunManifest {
            command: self.command,
            flags: self.flags,
            inputs: self.inputs,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_secs: self.started.elapsed().as_secs_f64(),
        };
        write_json_atomic(&path, &manifest)
    }
}

/// `<path>.<suffix>`, keeping the original extension.
pub fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}
