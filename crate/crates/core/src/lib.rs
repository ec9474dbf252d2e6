//! Bearing fault diagnosis from shaft-mounted acceleration sensors.
//!
//! The pipeline turns co-registered linear and angular acceleration
//! recordings into mixed model inputs:
//!
//! - linear windows become 32×32 Hilbert spectrum images ([`emd`] + [`hht`]),
//! - angular windows become two band-power scalars around the shaft's
//!   torsional resonances ([`band_features`]),
//!
//! and trains a two-branch CNN-MLP classifier on them with a small
//! from-scratch network engine ([`nn`], [`hybrid`]). [`embedding`] covers the
//! PCA / t-SNE exploration path and [`signal`] ships a synthetic rig so the
//! whole pipeline runs without a recorded dataset.
//!
//! ```text
//! Recording ─► segmentation ─► Window ─┬─ linear  ─► sift ─► render_spectrum_image ─► image ─┐
//!                                      └─ angular ─► magnitude_spectrum ─► N1, N2 ───────────┴─► hybrid model
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod band_features;
pub mod cli;
pub mod embedding;
pub mod emd;
pub mod fft;
pub mod hht;
pub mod hybrid;
pub mod nn;
pub mod pipeline;
pub mod segmentation;
pub mod signal;

pub use signal::{FaultLabel, Recording};

/// Sampling rate of the reference rig's wireless sensor.
pub const RIG_SAMPLE_RATE_HZ: f64 = 31_175.0;
/// Shaft speed of the reference recordings.
pub const RIG_RPM: f64 = 1200.0;
