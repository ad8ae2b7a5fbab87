//! Output directories with SHA-256 manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qpi_core::{QpiError, ScalarField2D};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Files written into one directory, recorded as `<sha256>  <name>` lines.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    entries: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self, QpiError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            entries: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), QpiError> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.record(name, bytes);
        Ok(())
    }

    pub fn write_field(&mut self, name: &str, field: &ScalarField2D) -> Result<(), QpiError> {
        self.write_bytes(name, &qpi_core::qpf::encode(field))
    }

    /// Records a file that was written elsewhere (e.g. by a worker thread).
    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        self.entries.push((name.to_string(), sha256_hex(bytes)));
    }

    /// Records a checksum computed elsewhere, such as a sub-manifest's.
    pub fn record_hash(&mut self, name: &str, hash: String) {
        self.entries.push((name.to_string(), hash));
    }

    /// Writes the manifest (entries sorted by name) after `header` lines; returns its checksum.
    pub fn finish(mut self, header: &str) -> Result<String, QpiError> {
        self.entries.sort();
        let mut text = String::new();
        for line in header.lines() {
            text.push_str("# ");
            text.push_str(line);
            text.push('\n');
        }
        for (name, hash) in &self.entries {
            text.push_str(&format!("{hash}  {name}\n"));
        }
        std::fs::write(self.dir.join(MANIFEST), &text)?;
        Ok(sha256_hex(text.as_bytes()))
    }
}
