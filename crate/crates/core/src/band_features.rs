//! Angular-channel scalars: one-sided magnitude spectra, torsional peak
//! identification from a shock response, and band power around each peak.
//!
//! Windows are zero-padded to the next power of two before the FFT (3897
//! samples become 4096, about 7.6 Hz per bin at the reference rate). No taper
//! is applied unless requested.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::fft_real;

#[derive(Debug, Error, PartialEq)]
pub enum BandError {
    #[error("spectrum input needs at least 2 samples")]
    TooShort,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("insufficient peaks: found {found}, wanted {wanted}")]
    InsufficientPeaks { found: usize, wanted: usize },
    #[error("band [{lo_hz}, {hi_hz}] Hz does not intersect the spectrum")]
    EmptyBand { lo_hz: f64, hi_hz: f64 },
    #[error("cannot fit a scaler on an empty training set")]
    EmptyTrainingSet,
    #[error("invalid setting: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

/// Whether band power sums magnitudes or squared magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    #[default]
    Magnitude,
    Squared,
}

/// One-sided magnitude spectrum over bins `0..=n/2` of the padded length.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub bin_width_hz: f64,
    /// Transform length after padding.
    pub fft_len: usize,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width_hz
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequency(self.magnitudes.len() - 1)
    }
}

pub fn magnitude_spectrum(samples: &[f64], sample_rate_hz: f64) -> Result<Spectrum, BandError> {
    magnitude_spectrum_with(samples, sample_rate_hz, Taper::Rectangular)
}

pub fn magnitude_spectrum_with(
    samples: &[f64],
    sample_rate_hz: f64,
    taper: Taper,
) -> Result<Spectrum, BandError> {
    if samples.len() < 2 {
        return Err(BandError::TooShort);
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(BandError::NonFinite(i));
    }
    let n = samples.len();
    let fft_len = n.next_power_of_two();
    let mut padded = vec![0.0; fft_len];
    match taper {
        Taper::Rectangular => padded[..n].copy_from_slice(samples),
        Taper::Hann => {
            let denom = (n - 1) as f64;
            for (i, (p, &x)) in padded.iter_mut().zip(samples).enumerate() {
                let w = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / denom).cos();
                *p = w * x;
            }
        }
    }
    let spec = fft_real(&padded);
    Ok(Spectrum {
        magnitudes: spec[..=fft_len / 2].iter().map(|z| z.norm()).collect(),
        bin_width_hz: sample_rate_hz / fft_len as f64,
        fft_len,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakReport {
    pub peaks_hz: Vec<f64>,
    pub prominence: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeakSearch {
    pub search_lo_hz: f64,
    pub search_hi_hz: f64,
    pub n_peaks: usize,
    /// Moving-average width in bins applied before peak picking.
    pub smoothing_bins: usize,
    /// A peak must rise this many times the band's median smoothed magnitude
    /// above its surroundings.
    pub min_prominence_ratio: f64,
}

impl Default for PeakSearch {
    fn default() -> Self {
        PeakSearch {
            search_lo_hz: 50.0,
            search_hi_hz: 2000.0,
            n_peaks: 2,
            smoothing_bins: 5,
            min_prominence_ratio: 4.0,
        }
    }
}

fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Topographic prominence of the local maximum at `i` over the whole series.
fn prominence(x: &[f64], i: usize) -> f64 {
    let peak = x[i];
    let mut left_min = peak;
    for j in (0..i).rev() {
        if x[j] > peak {
            break;
        }
        left_min = left_min.min(x[j]);
    }
    let mut right_min = peak;
    for &v in &x[i + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

/// Picks the `n_peaks` most prominent local maxima of the smoothed spectrum
/// inside the search band; returned in ascending frequency.
pub fn find_torsional_peaks(spectrum: &Spectrum, search: &PeakSearch) -> Result<PeakReport, BandError> {
    if search.n_peaks == 0 || search.smoothing_bins == 0 {
        return Err(BandError::Config("n_peaks and smoothing_bins must be >= 1".into()));
    }
    let (lo, hi) = (search.search_lo_hz, search.search_hi_hz);
    if !(lo < hi) || lo > spectrum.max_frequency() || hi < 0.0 {
        return Err(BandError::EmptyBand { lo_hz: lo, hi_hz: hi });
    }
    let smooth = moving_average(&spectrum.magnitudes, search.smoothing_bins);
    let bins: Vec<usize> = (1..smooth.len().saturating_sub(1))
        .filter(|&k| {
            let f = spectrum.frequency(k);
            f >= lo && f <= hi
        })
        .collect();
    if bins.is_empty() {
        return Err(BandError::EmptyBand { lo_hz: lo, hi_hz: hi });
    }
    let mut band: Vec<f64> = bins.iter().map(|&k| smooth[k]).collect();
    band.sort_by(f64::total_cmp);
    let floor = search.min_prominence_ratio * band[band.len() / 2];

    let mut candidates: Vec<(usize, f64)> = bins
        .iter()
        .filter(|&&k| smooth[k] > smooth[k - 1] && smooth[k] >= smooth[k + 1])
        .map(|&k| (k, prominence(&smooth, k)))
        .filter(|&(_, p)| p > floor && p > 0.0)
        .collect();
    if candidates.len() < search.n_peaks {
        return Err(BandError::InsufficientPeaks {
            found: candidates.len(),
            wanted: search.n_peaks,
        });
    }
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    candidates.truncate(search.n_peaks);
    candidates.sort_by_key(|c| c.0);
    Ok(PeakReport {
        peaks_hz: candidates.iter().map(|c| spectrum.frequency(c.0)).collect(),
        prominence: candidates.iter().map(|c| c.1).collect(),
    })
}

/// Sum over bins with `|f − center| ≤ half_width` of the magnitude (or its square).
pub fn band_power(
    spectrum: &Spectrum,
    center_hz: f64,
    half_width_hz: f64,
    mode: BandMode,
) -> Result<f64, BandError> {
    let lo = center_hz - half_width_hz;
    let hi = center_hz + half_width_hz;
    let mut hit = false;
    let mut total = 0.0;
    for (k, &m) in spectrum.magnitudes.iter().enumerate() {
        let f = spectrum.frequency(k);
        if (f - center_hz).abs() <= half_width_hz {
            hit = true;
            total += match mode {
                BandMode::Magnitude => m,
                BandMode::Squared => m * m,
            };
        }
    }
    if !hit {
        return Err(BandError::EmptyBand { lo_hz: lo, hi_hz: hi });
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandConfig {
    /// Torsional resonance centers (first, second).
    pub centers_hz: [f64; 2],
    pub half_width_hz: f64,
    pub taper: Taper,
    pub mode: BandMode,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig {
            centers_hz: [240.0, 820.0],
            half_width_hz: 40.0,
            taper: Taper::Rectangular,
            mode: BandMode::Magnitude,
        }
    }
}

/// Raw (unnormalized) N1, N2 pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    pub n1: f64,
    pub n2: f64,
}

impl FeaturePair {
    pub fn as_array(&self) -> [f64; 2] {
        [self.n1, self.n2]
    }
}

pub fn extract_features(
    angular: &[f64],
    sample_rate_hz: f64,
    config: &BandConfig,
) -> Result<FeaturePair, BandError> {
    let spec = magnitude_spectrum_with(angular, sample_rate_hz, config.taper)?;
    let [c1, c2] = config.centers_hz;
    Ok(FeaturePair {
        n1: band_power(&spec, c1, config.half_width_hz, config.mode)?,
        n2: band_power(&spec, c2, config.half_width_hz, config.mode)?,
    })
}

/// Per-feature min/max learned from training data only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl MinMaxScaler {
    pub fn fit<'a, I>(pairs: I) -> Result<Self, BandError>
    where
        I: IntoIterator<Item = &'a FeaturePair>,
    {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        let mut seen = false;
        for p in pairs {
            seen = true;
            for (k, v) in p.as_array().into_iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        if !seen {
            return Err(BandError::EmptyTrainingSet);
        }
        Ok(MinMaxScaler { min, max })
    }

    pub fn apply_value(&self, feature: usize, v: f64) -> f64 {
        let span = self.max[feature] - self.min[feature];
        if span <= 0.0 {
            return 0.0;
        }
        ((v - self.min[feature]) / span).clamp(0.0, 1.0)
    }

    pub fn apply(&self, pair: &FeaturePair) -> [f64; 2] {
        [self.apply_value(0, pair.n1), self.apply_value(1, pair.n2)]
    }
}
