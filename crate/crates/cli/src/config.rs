//! Config file loading. Every key is optional; command-line flags win.

use std::path::Path;

use serde::Deserialize;
use translens_core::{Error, Result};

pub const DEFAULT_KCORE: usize = 5;
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_BINS: usize = 5;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub max_hop: Option<usize>,
    pub train_match_mode: Option<String>,
    pub kcore: Option<usize>,
    pub k: Option<usize>,
    pub bins: Option<usize>,
    pub max_n: Option<usize>,
    pub threads: Option<usize>,
    pub q: Option<f64>,
    pub tau: Option<f64>,
    pub alpha_static: Option<f64>,
    pub mode: Option<String>,
    pub normalization: Option<String>,
    pub format: Option<String>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}
