//! Overlapping fixed-length windows over a recording.
//!
//! Defaults follow the reference rig: 3897 samples (2.5 shaft revolutions at
//! 20 Hz and 31.175 kHz) advanced by 1559 samples (one revolution). Trailing
//! samples that do not fill a window are dropped.

use serde::{Deserialize, Serialize};

use crate::signal::{FaultLabel, Recording};

pub const DEFAULT_WINDOW_LEN: usize = 3897;
pub const DEFAULT_HOP: usize = 1559;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentConfig {
    pub window_len: usize,
    pub hop: usize,
    /// Which linear channel feeds the image path.
    pub linear_channel: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            window_len: DEFAULT_WINDOW_LEN,
            hop: DEFAULT_HOP,
            linear_channel: 0,
        }
    }
}

/// One co-registered slice of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub recording_id: String,
    pub label: FaultLabel,
    pub start_index: usize,
    pub linear: Vec<f64>,
    pub angular: Vec<f64>,
    pub dt: f64,
}

impl Window {
    pub fn sample_rate_hz(&self) -> f64 {
        1.0 / self.dt
    }
}

/// Number of full windows that fit. Panics if `window_len` or `hop` is zero.
pub fn window_count(n_samples: usize, window_len: usize, hop: usize) -> usize {
    assert!(window_len >= 1 && hop >= 1, "window_len and hop must be >= 1");
    if n_samples < window_len {
        0
    } else {
        (n_samples - window_len) / hop + 1
    }
}

pub fn segment(recording: &Recording, config: &SegmentConfig) -> Vec<Window> {
    let n = recording.len();
    let count = window_count(n, config.window_len, config.hop);
    let linear = &recording.linear[config.linear_channel.min(recording.linear.len() - 1)];
    (0..count)
        .map(|k| {
            let start = k * config.hop;
            let range = start..start + config.window_len;
            Window {
                recording_id: recording.id.clone(),
                label: recording.label,
                start_index: start,
                linear: linear[range.clone()].to_vec(),
                angular: recording.angular[range].to_vec(),
                dt: recording.dt(),
            }
        })
        .collect()
}
