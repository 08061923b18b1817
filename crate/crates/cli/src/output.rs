//! Run directories: artifacts plus a manifest listing each file's hash.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: Config,
    pub seed: u64,
    pub rng_algorithm: &'static str,
    pub files: Vec<FileEntry>,
    pub version: &'static str,
    pub timestamp: String,
}

/// Output directory that records every artifact written through it.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.root.join(name), bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Pretty JSON with a `schema_version` field in front of `body`'s fields.
    pub fn write_json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        let mut value = serde_json::to_value(body)?;
        let doc = match value.as_object_mut() {
            Some(map) => {
                let mut out = serde_json::Map::new();
                out.insert("schema_version".into(), SCHEMA_VERSION.into());
                out.append(map);
                serde_json::Value::Object(out)
            }
            None => serde_json::json!({ "schema_version": SCHEMA_VERSION, "data": value }),
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_manifest(&self, command: &str, config: &Config) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config: config.clone(),
            seed: config.seed,
            rng_algorithm: crooks_core::rng::RNG_ALGORITHM,
            files: self.files.clone(),
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST_FILE), text)?;
        Ok(manifest)
    }
}

/// Shortest round-trip form, scientific for very small or large magnitudes;
/// `NaN` for undefined values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn files_are_hashed() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(dir.path()).unwrap();
        run.write_bytes("a.txt", b"abc").unwrap();
        assert_eq!(
            run.files()[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        run.write_bytes("a.txt", b"abcd").unwrap();
        assert_eq!(run.files().len(), 1);
        assert_eq!(run.files()[0].bytes, 4);
    }

    #[test]
    fn json_documents_carry_schema_version() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(dir.path()).unwrap();
        run.write_json("x.json", &serde_json::json!({"a": 1})).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("x.json")).unwrap()).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["a"], 1);
    }
}
