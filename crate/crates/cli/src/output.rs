//! Result files. Text outputs carry the config hash inline; every file,
//! binary ones included, is listed with its digest in `manifest.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clutter_core::container::write_matrix;
use clutter_core::Cx;
use ndarray::ArrayView2;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub struct OutputDir {
    dir: PathBuf,
    hash: String,
    files: Vec<(String, String)>,
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

impl OutputDir {
    /// Creates the directory and writes `resolved_config.toml`.
    pub fn create(cfg: &ExperimentConfig) -> Result<Self> {
        let dir = PathBuf::from(&cfg.output.dir);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut out = Self {
            dir,
            hash: cfg.hash(),
            files: Vec::new(),
        };
        let text = format!("# config_hash: {}\n{}", out.hash, cfg.resolved_toml());
        out.write_bytes("resolved_config.toml", text.as_bytes())?;
        Ok(out)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.files.push((name.to_string(), hex(&Sha256::digest(bytes))));
        Ok(())
    }

    /// CSV with a `# config_hash:` comment line, then the header.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut s = format!("# config_hash: {}\n{}\n", self.hash, header.join(","));
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.write_bytes(name, s.as_bytes())
    }

    /// Pretty JSON object with a leading `config_hash` field.
    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let v = serde_json::to_value(value)?;
        let mut obj = serde_json::Map::new();
        obj.insert("config_hash".into(), Value::String(self.hash.clone()));
        match v {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(obj))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Container file with a `config_hash:<hex>` line after the data;
    /// readers stop at the last entry and never see it.
    pub fn write_matrix(&mut self, name: &str, a: ArrayView2<'_, Cx<f64>>) -> Result<()> {
        let mut buf = Vec::new();
        write_matrix(&mut buf, a)?;
        buf.extend_from_slice(format!("config_hash:{}\n", self.hash).as_bytes());
        self.write_bytes(name, &buf)
    }

    /// Writes `manifest.json` and returns the directory.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.files.sort();
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(n, d)| json!({ "name": n, "sha256": d }))
            .collect();
        let m = json!({ "config_hash": self.hash, "files": files });
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        let p = self.dir.join("manifest.json");
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        Ok(self.dir)
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn cx_pairs<'a>(v: impl IntoIterator<Item = &'a Cx<f64>>) -> Vec<[f64; 2]> {
    v.into_iter().map(|z| [z.re, z.im]).collect()
}
