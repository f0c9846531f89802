//! Atomic output files and the run metadata sidecar.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use stratmoi::config::OutputFormat;

use crate::Failure;

/// Sidecar name; the only file carrying timestamps.
pub const RUN_META: &str = "run.json";

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invariant(format!("I/O failure: {e}"))
    }
}

pub struct RunMeta {
    pub subcommand: &'static str,
    pub args: Vec<String>,
    pub seed: u64,
    pub jobs: usize,
    pub strict: bool,
    pub status: u8,
    pub elapsed_seconds: f64,
}

pub struct Outputs {
    dir: PathBuf,
    formats: Vec<OutputFormat>,
    written: Vec<String>,
}

/// Writes `body` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, body: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no file name"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(body)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)
}

impl Outputs {
    pub fn new(dir: &Path, formats: &[OutputFormat]) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            formats: formats.to_vec(),
            written: Vec::new(),
        })
    }

    fn wanted(&self, name: &str) -> bool {
        match Path::new(name).extension().and_then(|e| e.to_str()) {
            Some("csv") => self.formats.contains(&OutputFormat::Csv),
            Some("json") => self.formats.contains(&OutputFormat::Json),
            _ => true,
        }
    }

    pub fn write(&mut self, name: &str, body: &str) -> io::Result<()> {
        if !self.wanted(name) {
            return Ok(());
        }
        write_atomic(&self.dir.join(name), body.as_bytes())?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn finish(self, meta: &RunMeta) -> io::Result<()> {
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64() - meta.elapsed_seconds)
            .unwrap_or(0.0);
        let doc = json!({
            "tool": "stratmoi",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": meta.subcommand,
            "args": meta.args,
            "seed": meta.seed,
            "jobs": meta.jobs,
            "strict": meta.strict,
            "status": meta.status,
            "started_unix": started,
            "elapsed_seconds": meta.elapsed_seconds,
            "files": self.written,
        });
        let mut body = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
        body.push('\n');
        write_atomic(&self.dir.join(RUN_META), body.as_bytes())
    }
}
