//! `--config` file overlay. Flags win over file values; relative paths in the file
//! are taken relative to the file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use povshift::ranker::ModelConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub verb_dict: Option<PathBuf>,
    pub relational_lexicon: Option<PathBuf>,
    pub performatives: Option<PathBuf>,
    pub model: Option<ModelConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.verb_dict, &mut cfg.relational_lexicon, &mut cfg.performatives].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Settings shared by all commands after merging flags over the config file.
#[derive(Debug)]
pub struct Settings {
    pub seed: u64,
    pub jobs: Option<usize>,
    pub embedding_dim: usize,
    pub verb_dict: Option<PathBuf>,
    pub relational_lexicon: Option<PathBuf>,
    pub performatives: Option<PathBuf>,
    pub model: ModelConfig,
}
