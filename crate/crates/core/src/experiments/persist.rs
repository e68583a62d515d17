//! File output: JSON envelopes and CSV tables, each carrying run metadata.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RNG_NAME;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub rng: String,
    /// Seconds since the Unix epoch. This and `wall_time_secs` are the only fields that
    /// differ between identical runs.
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

impl Metadata {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            seed,
            config_hash: config_hash.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_NAME.to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_time_secs: None,
        }
    }

    /// `# key=value` lines placed at the top of CSV outputs.
    pub fn csv_comment(&self) -> String {
        let mut s = format!(
            "# schema={SCHEMA_VERSION}\n# seed={}\n# config_hash={}\n# version={}\n# rng={}\n# timestamp={}\n",
            self.seed, self.config_hash, self.version, self.rng, self.timestamp
        );
        if let Some(w) = self.wall_time_secs {
            s.push_str(&format!("# wall_time_secs={w}\n"));
        }
        s
    }

    /// Parses the comment block written by [`Metadata::csv_comment`].
    pub fn from_csv_comment(text: &str) -> Option<Self> {
        let get = |key: &str| {
            text.lines()
                .filter_map(|l| l.strip_prefix("# "))
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .map(str::to_string)
        };
        Some(Self {
            seed: get("seed")?.parse().ok()?,
            config_hash: get("config_hash")?,
            version: get("version")?,
            rng: get("rng")?,
            timestamp: get("timestamp")?.parse().ok()?,
            wall_time_secs: get("wall_time_secs").and_then(|w| w.parse().ok()),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema: u32,
    pub metadata: Metadata,
    pub result: T,
}

impl<T> Envelope<T> {
    pub fn new(metadata: Metadata, result: T) -> Self {
        Self { schema: SCHEMA_VERSION, metadata, result }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn to_json_string<T: Serialize>(metadata: &Metadata, result: &T) -> Result<String> {
    let env = Envelope::new(metadata.clone(), result);
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, metadata: &Metadata, result: &T) -> Result<()> {
    write_text(path, &to_json_string(metadata, result)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Envelope<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

/// Fixed 17-significant-digit rendering used by every CSV writer.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "nan" | "NaN" | "" => Some(f64::NAN),
        t => t.parse().ok(),
    }
}
