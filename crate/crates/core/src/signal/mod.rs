//! Recordings, fault labels, the CSV + JSON sidecar file format, and the
//! synthetic test rig.

mod io;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_recording, meta_path, save_recording, RecordingMeta};
pub use synth::{synthesize_recording, SyntheticSpec};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header in {path}: {reason}")]
    Header { path: String, reason: String },
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("row {row}: non-finite value in column `{column}`")]
    NonFinite { row: usize, column: String },
    #[error("invalid sidecar {path}: {reason}")]
    Sidecar { path: String, reason: String },
    #[error("invalid recording: {0}")]
    Invalid(String),
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
}

/// The five bearing conditions, encoded as class indices 0..4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultLabel {
    Normal,
    InnerRace,
    OuterRace,
    Ball,
    Combined,
}

impl FaultLabel {
    pub const COUNT: usize = 5;
    pub const ALL: [FaultLabel; 5] = [
        FaultLabel::Normal,
        FaultLabel::InnerRace,
        FaultLabel::OuterRace,
        FaultLabel::Ball,
        FaultLabel::Combined,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultLabel::Normal => "Normal",
            FaultLabel::InnerRace => "InnerRace",
            FaultLabel::OuterRace => "OuterRace",
            FaultLabel::Ball => "Ball",
            FaultLabel::Combined => "Combined",
        }
    }

    /// Human-readable name as used in classification reports.
    pub fn display_name(self) -> &'static str {
        match self {
            FaultLabel::Normal => "Normal",
            FaultLabel::InnerRace => "Inner race",
            FaultLabel::OuterRace => "Outer race",
            FaultLabel::Ball => "Ball",
            FaultLabel::Combined => "Combined fault",
        }
    }
}

impl fmt::Display for FaultLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaultLabel {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "normal" | "healthy" => FaultLabel::Normal,
            "innerrace" | "inner" => FaultLabel::InnerRace,
            "outerrace" | "outer" => FaultLabel::OuterRace,
            "ball" => FaultLabel::Ball,
            "combined" | "combinedfault" => FaultLabel::Combined,
            _ => return Err(SignalError::Invalid(format!("unknown fault label `{s}`"))),
        })
    }
}

/// A co-registered multi-channel acceleration recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub sample_rate_hz: f64,
    pub rpm: f64,
    pub label: FaultLabel,
    /// One or two linear acceleration channels (x, then optionally y).
    pub linear: Vec<Vec<f64>>,
    pub angular: Vec<f64>,
}

impl Recording {
    /// Builds a recording and checks the channel invariants.
    pub fn new(
        id: impl Into<String>,
        sample_rate_hz: f64,
        rpm: f64,
        label: FaultLabel,
        linear: Vec<Vec<f64>>,
        angular: Vec<f64>,
    ) -> Result<Self, SignalError> {
        let rec = Recording {
            id: id.into(),
            sample_rate_hz,
            rpm,
            label,
            linear,
            angular,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(SignalError::Invalid("sample_rate_hz must be positive".into()));
        }
        if !(self.rpm.is_finite() && self.rpm > 0.0) {
            return Err(SignalError::Invalid("rpm must be positive".into()));
        }
        if self.linear.is_empty() || self.linear.len() > 2 {
            return Err(SignalError::Invalid(format!(
                "expected 1 or 2 linear channels, got {}",
                self.linear.len()
            )));
        }
        let n = self.angular.len();
        if n < 2 {
            return Err(SignalError::Invalid("channels need at least 2 samples".into()));
        }
        if self.linear.iter().any(|c| c.len() != n) {
            return Err(SignalError::Invalid("channel lengths differ".into()));
        }
        let finite = self
            .linear
            .iter()
            .flatten()
            .chain(self.angular.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(SignalError::Invalid("non-finite sample".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.angular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angular.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn shaft_hz(&self) -> f64 {
        self.rpm / 60.0
    }
}
