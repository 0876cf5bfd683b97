//! CSV and JSON files, each written once via a temporary file and a rename.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::AppError;

/// Config hash and seed stamped on every output.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn comment(&self) -> String {
        format!("# config_hash={} seed={}", self.config_hash, self.seed)
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = PathBuf::from(path);
    tmp.set_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// A provenance comment, a header row, then the records.
pub fn write_csv(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<(), AppError> {
    let mut buf = Vec::new();
    writeln!(buf, "{}", prov.comment())?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    atomic_write(path, &buf)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), AppError> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    atomic_write(path, &buf)
}

/// Round-trippable float formatting.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
