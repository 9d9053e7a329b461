use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Deserialize;
use socialvec::synth::SynthConfig;
use socialvec::{PoliticalAnchors, TrainConfig};

/// Shared settings read from `--config`. Explicit flags win over values
/// found here.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    /// Minimum follower count of an entity.
    pub threshold: Option<u64>,
    /// Require strictly more than `threshold` followers.
    pub strict_threshold: bool,
    pub min_entities: Option<usize>,
    pub anchors: Option<Anchors>,
    pub train: Option<TrainConfig>,
    pub synth: Option<SynthConfig>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub edges: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub follows: Option<PathBuf>,
    pub sources: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchors {
    pub republican: String,
    pub democratic: String,
}

pub const DEFAULT_THRESHOLD: u64 = 350;

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Generator settings from a file holding either a bare generator
    /// config or a pipeline config with a `[synth]` table.
    pub fn load_synth(path: &Path) -> Result<Option<SynthConfig>> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if table.contains_key("num_users") {
            let synth = table
                .try_into()
                .with_context(|| format!("parsing generator config {}", path.display()))?;
            return Ok(Some(synth));
        }
        let pipeline: PipelineConfig = table
            .try_into()
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(pipeline.synth)
    }

    pub fn anchors(&self, rep: Option<String>, dem: Option<String>) -> Result<PoliticalAnchors> {
        let from_file = self.anchors.as_ref();
        let rep = rep
            .or_else(|| from_file.map(|a| a.republican.clone()))
            .ok_or_else(|| anyhow!("missing --rep (or [anchors] in the config)"))?;
        let dem = dem
            .or_else(|| from_file.map(|a| a.democratic.clone()))
            .ok_or_else(|| anyhow!("missing --dem (or [anchors] in the config)"))?;
        Ok(PoliticalAnchors::new(rep, dem)?)
    }
}

/// The flag value if given, else the config value, else an error naming
/// both.
pub fn require(flag: Option<PathBuf>, config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| anyhow!("missing --{name} (or paths.{name} in the config)"))
}
