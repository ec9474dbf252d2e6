use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::band_features::PeakSearch;
use crate::embedding::TsneConfig;
use crate::hybrid::SplitSpec;
use crate::nn::TrainConfig;
use crate::pipeline::FeaturizeConfig;

/// Synthetic rig run settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Seconds per recording; 15.2 s yields 302 default windows.
    pub duration_s: f64,
    pub recordings_per_class: usize,
    pub noise_sigma: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            duration_s: 15.2,
            recordings_per_class: 1,
            noise_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedConfig {
    /// PCA keeps the fewest components reaching this variance share.
    pub pca_variance: f64,
    pub tsne: TsneConfig,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            pca_variance: 0.99,
            tsne: TsneConfig::default(),
        }
    }
}

/// Every stage's settings in one document. `seed` is copied into each
/// stage's own seed field by [`RunConfig::with_seed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for `featurize`; `null` uses all cores.
    pub jobs: Option<usize>,
    pub simulate: SimulateConfig,
    pub featurize: FeaturizeConfig,
    pub peaks: PeakSearch,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub embed: EmbedConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: None,
            simulate: SimulateConfig::default(),
            featurize: FeaturizeConfig::default(),
            peaks: PeakSearch::default(),
            split: SplitSpec::default(),
            train: TrainConfig::default(),
            embed: EmbedConfig::default(),
        }
        .with_seed(0)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.split.seed = seed;
        self.train.seed = seed;
        self.embed.tsne.seed = seed;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is plain data")
    }
}
