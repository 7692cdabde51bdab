//! Run manifests. The hash covers command, options and toolkit version but
//! not the timestamp, so identical invocations embed identical hashes.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Convergence summary of one solve; `row` is the CSV row it produced, if any.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub row: Option<usize>,
    pub label: String,
    pub p: f64,
    pub n: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub options: Value,
    pub version: String,
    pub hash: String,
    pub timestamp: String,
    pub solves: Vec<SolveSummary>,
}

#[derive(Serialize)]
struct Hashed<'a> {
    command: &'a str,
    options: &'a Value,
    version: &'a str,
}

impl RunManifest {
    pub fn new(command: &str, options: &impl Serialize) -> anyhow::Result<Self> {
        let options = serde_json::to_value(options)?;
        let canonical = serde_json::to_vec(&Hashed { command, options: &options, version: VERSION })?;
        let hash = hex::encode(Sha256::digest(&canonical));
        Ok(Self {
            command: command.to_string(),
            options,
            version: VERSION.to_string(),
            hash,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            solves: Vec::new(),
        })
    }

    /// Writes `<out>.manifest.json` next to an artifact.
    pub fn write_sidecar(&self, out: &Path) -> anyhow::Result<PathBuf> {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    #[test]
    fn hash_ignores_timestamp_and_tracks_options() {
        let a = RunManifest::new("eig1", &json!({"p": 2.0})).unwrap();
        let mut b = RunManifest::new("eig1", &json!({"p": 2.0})).unwrap();
        b.timestamp = "1970-01-01T00:00:00Z".into();
        let c = RunManifest::new("eig1", &json!({"p": 2.5})).unwrap();
        let d = RunManifest::new("branch", &json!({"p": 2.0})).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
        assert_ne!(a.hash, d.hash);
        assert_eq!(a.hash.len(), 64);
    }
}
