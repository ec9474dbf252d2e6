//! The two-branch classifier and everything around it: architecture
//! builders, the featurized example container, splitting and metrics.
//!
//! ```text
//! image 32×32×c ─ C16 ─ P ─ C32 ─ P ─ C64 ─ P ─ flatten(1024) ─ D16 ─ drop ─ D8 ─┐
//!                                                                               concat(16) ─ D8 ─ D5 ─ softmax
//! (N1, N2) ───────────────────────────────────────────────────── D16 ─ D8 ──────┘
//! ```

mod dataset;
mod metrics;
mod split;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hht::IMAGE_SIZE;
use crate::nn::{Architecture, LayerSpec, Model, NnError};
use crate::signal::FaultLabel;

pub use dataset::{ExampleSet, Provenance, DATASET_BIN, DATASET_MANIFEST};
pub use metrics::{evaluate, f1_score, predict, ClassReportRow, ClassificationReport, Metrics};
pub use split::{split, split_sizes, SplitAssignment, SplitSpec};

#[derive(Debug, Error)]
pub enum HybridError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("split: {0}")]
    Split(String),
    #[error("dataset: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Which branches a model uses. Every variant shares the training harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    #[default]
    Hybrid,
    Cnn,
    Mlp,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Hybrid, Branch::Cnn, Branch::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Branch::Hybrid => "hybrid",
            Branch::Cnn => "cnn",
            Branch::Mlp => "mlp",
        }
    }

    pub fn architecture(self, channels: usize) -> Architecture {
        match self {
            Branch::Hybrid => hybrid_architecture(channels),
            Branch::Cnn => cnn_architecture(channels),
            Branch::Mlp => mlp_architecture(),
        }
    }

    pub fn build(self, channels: usize, seed: u64) -> Result<Model, NnError> {
        Model::new(self.architecture(channels), seed)
    }

    pub fn uses_images(self) -> bool {
        self != Branch::Mlp
    }

    pub fn uses_features(self) -> bool {
        self != Branch::Cnn
    }
}

impl std::str::FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Branch::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown branch {s:?}; expected hybrid, cnn or mlp"))
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn cnn_layers() -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Conv3x3 { out_channels: 16 },
        Relu,
        MaxPool2x2,
        Conv3x3 { out_channels: 32 },
        Relu,
        MaxPool2x2,
        Conv3x3 { out_channels: 64 },
        Relu,
        MaxPool2x2,
        Flatten,
        Dense { units: 16 },
        Relu,
        Dropout { rate: 0.5 },
        Dense { units: 8 },
        Relu,
    ]
}

fn mlp_layers() -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![Dense { units: 16 }, Relu, Dense { units: 8 }, Relu]
}

fn head_layers() -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Dense { units: 8 },
        Relu,
        Dense {
            units: FaultLabel::COUNT,
        },
        Softmax,
    ]
}

pub fn hybrid_architecture(channels: usize) -> Architecture {
    Architecture {
        image_input: Some(vec![IMAGE_SIZE, IMAGE_SIZE, channels]),
        image_layers: cnn_layers(),
        feature_input: Some(2),
        feature_layers: mlp_layers(),
        head_layers: head_layers(),
    }
}

pub fn cnn_architecture(channels: usize) -> Architecture {
    Architecture {
        feature_input: None,
        feature_layers: Vec::new(),
        ..hybrid_architecture(channels)
    }
}

pub fn mlp_architecture() -> Architecture {
    Architecture {
        image_input: None,
        image_layers: Vec::new(),
        ..hybrid_architecture(1)
    }
}

/// Both branches, concatenated into the shared head.
pub fn build_hybrid(channels: usize, seed: u64) -> Result<Model, NnError> {
    Branch::Hybrid.build(channels, seed)
}

/// Image branch only; feature inputs are ignored.
pub fn build_cnn_only(channels: usize, seed: u64) -> Result<Model, NnError> {
    Branch::Cnn.build(channels, seed)
}

/// Feature branch only.
pub fn build_mlp_only(seed: u64) -> Result<Model, NnError> {
    Branch::Mlp.build(1, seed)
}
