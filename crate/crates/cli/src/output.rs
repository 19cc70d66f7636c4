//! Artifact writing: CSV and JSON files with content hashes, and the manifest.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Single writer for one run's output directory.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    pub files: Vec<FileEntry>,
}

impl Artifacts {
    /// Creates the directory and proves it is writable.
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let probe = dir.join(".wavespec-write-test");
        fs::write(&probe, b"")?;
        fs::remove_file(&probe)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry { name: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Csv) -> io::Result<()> {
        self.write(name, table.text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// The manifest is written last and is not part of its own inventory.
    pub fn finish(self, manifest: &Manifest) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(manifest).map_err(io::Error::other)?;
        bytes.push(b'\n');
        fs::write(self.dir.join(MANIFEST), bytes)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Comma-separated table with a header row and LF line endings; floats carry
/// 17 significant digits.
#[derive(Clone, Debug, Default)]
pub struct Csv {
    text: String,
}

pub enum Cell<'a> {
    F(f64),
    I(i64),
    S(&'a str),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(x) => write!(self.text, "{}", float(*x)),
                Cell::I(x) => write!(self.text, "{x}"),
                Cell::S(s) => write!(self.text, "{s}"),
            }
            .expect("writing to a String");
        }
        self.text.push('\n');
    }
}

fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// One `(ε, c(ε))` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedAt {
    pub eps: f64,
    pub c: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Derived {
    pub c0: Option<f64>,
    pub p_f: Option<f64>,
    pub v_f: Option<f64>,
    pub u_f: f64,
    pub u_j: f64,
    pub c_eps: Vec<SpeedAt>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub status: Status,
    pub diagnostic: Option<String>,
    pub config: RunConfig,
    pub derived: Derived,
    pub eigenvalues: Vec<f64>,
    pub poles: Vec<f64>,
    pub files: Vec<FileEntry>,
    pub wall_clock_s: f64,
}
