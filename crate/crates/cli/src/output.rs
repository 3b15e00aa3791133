use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::errors::{CliError, CliResult};

/// Identification block carried by every output file: tool version, creation
/// time, the seed behind any randomness, and a hash of the resolved
/// configuration. Everything except `created_unix` is reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub created_unix: u64,
    pub seed: Option<u64>,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(seed: Option<u64>, config: &impl Serialize) -> Meta {
        Meta {
            tool: "penfit".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed,
            config_sha256: config_hash(config),
        }
    }

    /// Comment lines placed above the header row of a CSV output.
    pub fn csv_lines(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# penfit {}", self.version);
        let _ = writeln!(s, "# created {}", self.created_unix);
        match self.seed {
            Some(v) => {
                let _ = writeln!(s, "# seed {v}");
            }
            None => {
                let _ = writeln!(s, "# seed none");
            }
        }
        let _ = writeln!(s, "# config {}", self.config_sha256);
        s
    }
}

/// SHA-256 of the canonical JSON form of the resolved settings, truncated to
/// 16 hex digits. serde_json orders map keys, so the hash is stable.
pub fn config_hash(config: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(config).unwrap_or_default();
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(16);
    for b in &digest[..8] {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Write through a temporary file in the destination directory and rename,
/// so a failed run never leaves a partial output behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| {
        CliError::data(format!("cannot create temporary file in {}: {e}", dir.display()))
    })?;
    tmp.write_all(contents)?;
    tmp.persist(path)
        .map_err(|e| CliError::data(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn log(msg: impl std::fmt::Display) {
    eprintln!("[penfit] {msg}");
}

/// Fixed-precision scientific notation keeps output files byte-stable across
/// platforms.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.6e}")
}

pub fn fmt_opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Quote a free-form field (feature names come from user CSV headers) when
/// it would otherwise break the row.
pub fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}
