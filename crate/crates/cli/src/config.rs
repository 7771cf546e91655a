use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::Deserialize;

/// Settings readable from `--config`. Every key mirrors a command-line flag
/// (dashes become underscores); flags take precedence.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,

    pub provider: Option<String>,
    pub dimension: Option<usize>,
    pub location: Option<String>,
    pub batch_size: Option<usize>,
    pub author_weight: Option<f64>,

    pub episode_len: Option<usize>,
    pub mask_token: Option<String>,
    pub level: Option<String>,
    pub p: Option<f64>,
    pub casefold: Option<bool>,

    pub keep: Option<usize>,
    pub bins: Option<usize>,

    pub sizes: Option<Vec<usize>>,
    pub n_trials: Option<usize>,
    pub n_boot: Option<usize>,
    pub confidence: Option<f64>,
    pub positive_fraction: Option<f64>,
    pub unstratified: Option<bool>,
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

pub struct Context {
    pub seed: Option<u64>,
    pub config: Config,
}

impl Context {
    pub fn seed(&self) -> anyhow::Result<u64> {
        self.seed.ok_or_else(|| {
            anyhow::anyhow!(
                "this command needs an explicit seed (--seed or `seed` in the config file)"
            )
        })
    }

    pub fn out_dir(&self, flag: Option<PathBuf>) -> anyhow::Result<PathBuf> {
        let dir = flag
            .or_else(|| self.config.out_dir.clone())
            .ok_or_else(|| {
                anyhow::anyhow!("no output directory (--out-dir or `out_dir` in the config file)")
            })?;
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}
