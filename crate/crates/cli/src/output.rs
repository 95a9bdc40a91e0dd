//! Output directory bookkeeping: every artifact goes through [`OutDir`] so
//! the manifest can list it with its content hash.

use std::fs;
use std::path::{Path, PathBuf};

use psclab::field::{rfld, Field};
use psclab::hypersurface::GraphHypersurface;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
    /// Files whose content changes between identical runs (wall-clock times).
    volatile: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> std::io::Result<OutDir> {
        fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new(), volatile: Vec::new() })
    }

    fn path(&mut self, rel: &str) -> std::io::Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        if !self.written.iter().any(|w| w == rel) {
            self.written.push(rel.to_string());
        }
        Ok(p)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        fs::write(self.path(rel)?, text + "\n")
    }

    pub fn volatile_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> std::io::Result<()> {
        self.json(rel, value)?;
        self.volatile.push(rel.to_string());
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(self.path(rel)?)?;
        for r in rows {
            w.serialize(r).map_err(std::io::Error::other)?;
        }
        w.flush()
    }

    pub fn field(&mut self, rel: &str, f: &Field) -> std::io::Result<()> {
        let p = self.path(rel)?;
        rfld::write_file(f, p).map_err(std::io::Error::other)
    }

    /// Height field plus its JSON sidecar.
    pub fn graph(&mut self, stem: &str, g: &GraphHypersurface) -> std::io::Result<()> {
        self.path(&format!("{stem}.rfld"))?;
        self.path(&format!("{stem}.json"))?;
        g.save(&self.root, stem).map_err(std::io::Error::other)
    }

    /// `(path, sha256)` of every deterministic output, in writing order.
    pub fn hashes(&self) -> std::io::Result<Vec<(String, String)>> {
        self.written
            .iter()
            .filter(|w| !self.volatile.contains(w))
            .map(|w| Ok((w.clone(), sha256_file(&self.root.join(w))?)))
            .collect()
    }

    pub fn volatile(&self) -> &[String] {
        &self.volatile
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn sha256_file(p: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&fs::read(p)?))
}
