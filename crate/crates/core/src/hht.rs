//! Hilbert stage: analytic signal, instantaneous amplitude and frequency, and
//! rasterization of the Hilbert spectrum of the leading IMFs into a fixed
//! 32×32 time–frequency image.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emd::ImfSet;
use crate::fft::{fft_real, ifft_in_place};
use crate::signal::FaultLabel;

pub const IMAGE_SIZE: usize = 32;

#[derive(Debug, Error)]
pub enum HhtError {
    #[error("series too short for an analytic signal: {0} < 4")]
    TooShort(usize),
    #[error("frequency ceiling {freq_max_hz} Hz exceeds Nyquist {nyquist_hz} Hz")]
    AboveNyquist { freq_max_hz: f64, nyquist_hz: f64 },
    #[error("invalid image config: {0}")]
    Config(String),
    #[error("image io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSignal {
    pub real: Vec<f64>,
    /// Hilbert transform of `real`.
    pub imag: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// Unwrapped instantaneous phase in radians.
    pub phase: Vec<f64>,
}

impl AnalyticSignal {
    pub fn len(&self) -> usize {
        self.real.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real.is_empty()
    }

    pub fn instantaneous_frequency(&self, dt: f64) -> Vec<f64> {
        instantaneous_frequency(&self.phase, dt)
    }
}

/// Analytic signal by the one-sided spectrum method: negative-frequency
/// coefficients are zeroed, positive ones doubled, DC and Nyquist kept.
pub fn analytic_signal(series: &[f64]) -> Result<AnalyticSignal, HhtError> {
    let n = series.len();
    if n < 4 {
        return Err(HhtError::TooShort(n));
    }
    let mut spec = fft_real(series);
    let half = n / 2;
    let positive_end = if n.is_multiple_of(2) { half } else { half + 1 };
    for v in spec.iter_mut().take(positive_end).skip(1) {
        *v *= 2.0;
    }
    for v in spec.iter_mut().skip(half + 1) {
        *v = 0.0.into();
    }
    ifft_in_place(&mut spec);

    let real = series.to_vec();
    let imag: Vec<f64> = spec.iter().map(|z| z.im).collect();
    let amplitude = real
        .iter()
        .zip(&imag)
        .map(|(x, y)| x.hypot(*y))
        .collect();
    let wrapped: Vec<f64> = real.iter().zip(&imag).map(|(x, y)| y.atan2(*x)).collect();
    Ok(AnalyticSignal {
        real,
        imag,
        amplitude,
        phase: unwrap_phase(&wrapped),
    })
}

/// Removes 2π jumps: every step larger than π in magnitude is folded back.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let step = p - phase[i - 1];
            if step > PI {
                offset -= TAU * ((step - PI) / TAU).ceil();
            } else if step < -PI {
                offset += TAU * ((-step - PI) / TAU).ceil();
            }
        }
        out.push(p + offset);
    }
    out
}

/// Phase derivative in Hz: central differences inside, one-sided at the ends,
/// negative values clamped to zero. The phase is unwrapped first.
pub fn instantaneous_frequency(phase: &[f64], dt: f64) -> Vec<f64> {
    let n = phase.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let p = unwrap_phase(phase);
    let scale = 1.0 / (std::f64::consts::TAU * dt);
    (0..n)
        .map(|i| {
            let d = if i == 0 {
                p[1] - p[0]
            } else if i == n - 1 {
                p[n - 1] - p[n - 2]
            } else {
                0.5 * (p[i + 1] - p[i - 1])
            };
            (d * scale).max(0.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageConfig {
    /// Upper edge of the frequency axis; `None` means Nyquist.
    pub freq_max_hz: Option<f64>,
    /// 1 (gray) or 3 (colormapped).
    pub channels: usize,
    /// Compress amplitudes with `log(1 + v)` before normalizing.
    pub log_amplitude: bool,
    /// Leading IMFs that contribute to the spectrum.
    pub n_imfs: usize,
}

impl Default for ImageConfig {
    fn default() -> Self {
        ImageConfig {
            freq_max_hz: None,
            channels: 3,
            log_amplitude: true,
            n_imfs: 3,
        }
    }
}

/// Normalized Hilbert spectrum raster, `height × width × channels`,
/// row-major with channels innermost. Row 0 is the highest frequency band.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<f64>,
    pub freq_max_hz: f64,
    pub recording_id: String,
    pub start_index: usize,
    pub label: Option<FaultLabel>,
}

impl SpectrumImage {
    /// Frequency bin (0 = lowest) for `f`, or `None` when out of range.
    pub fn freq_bin(&self, f: f64) -> Option<usize> {
        freq_bin(f, self.freq_max_hz, self.height)
    }

    /// Image row holding frequency `f`.
    pub fn row_of_frequency(&self, f: f64) -> Option<usize> {
        self.freq_bin(f).map(|b| self.height - 1 - b)
    }

    pub fn pixel(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.pixels[(row * self.width + col) * self.channels + channel]
    }

    pub fn max_pixel(&self) -> f64 {
        self.pixels.iter().copied().fold(0.0, f64::max)
    }

    /// Binary PGM (1 channel) or PPM (3 channels), `round(255·v)` per sample.
    pub fn write_pnm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        write!(out, "{magic}\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8)
            .collect();
        out.write_all(&bytes)
    }

    pub fn save_pnm(&self, path: &Path) -> Result<(), HhtError> {
        let file = std::fs::File::create(path)?;
        self.write_pnm(std::io::BufWriter::new(file))?;
        Ok(())
    }
}

fn freq_bin(f: f64, freq_max: f64, bins: usize) -> Option<usize> {
    if !(f >= 0.0) || f > freq_max {
        return None;
    }
    Some(((f / freq_max * bins as f64) as usize).min(bins - 1))
}

/// Accumulates `a_j(t)` of each leading IMF into the
/// `(time_bin(t), freq_bin(ω_j(t)))` cell, compresses, and normalizes by the
/// grid maximum.
pub fn render_spectrum_image(
    imfs: &ImfSet,
    dt: f64,
    config: &ImageConfig,
) -> Result<SpectrumImage, HhtError> {
    if config.channels != 1 && config.channels != 3 {
        return Err(HhtError::Config(format!(
            "channels must be 1 or 3, got {}",
            config.channels
        )));
    }
    if !(dt > 0.0) {
        return Err(HhtError::Config("dt must be positive".into()));
    }
    let nyquist = 0.5 / dt;
    let freq_max = config.freq_max_hz.unwrap_or(nyquist);
    if freq_max > nyquist * (1.0 + 1e-12) {
        return Err(HhtError::AboveNyquist {
            freq_max_hz: freq_max,
            nyquist_hz: nyquist,
        });
    }
    if !(freq_max > 0.0) {
        return Err(HhtError::Config("freq_max_hz must be positive".into()));
    }

    let size = IMAGE_SIZE;
    let mut grid = vec![0.0f64; size * size];
    for imf in imfs.imfs.iter().take(config.n_imfs) {
        let n = imf.len();
        if n < 4 {
            continue;
        }
        let z = analytic_signal(imf)?;
        let freq = z.instantaneous_frequency(dt);
        for i in 0..n {
            let Some(fb) = freq_bin(freq[i], freq_max, size) else {
                continue;
            };
            let col = i * size / n;
            let row = size - 1 - fb;
            grid[row * size + col] += z.amplitude[i];
        }
    }
    if config.log_amplitude {
        for v in grid.iter_mut() {
            *v = v.ln_1p();
        }
    }
    let max = grid.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for v in grid.iter_mut() {
            *v /= max;
        }
    }

    let pixels = if config.channels == 3 {
        let table = colormap();
        grid.iter().flat_map(|&v| colormap_lookup(&table, v)).collect()
    } else {
        grid
    };
    Ok(SpectrumImage {
        height: size,
        width: size,
        channels: config.channels,
        pixels,
        freq_max_hz: freq_max,
        recording_id: String::new(),
        start_index: 0,
        label: None,
    })
}

pub const COLORMAP_LEN: usize = 256;

/// Piecewise-linear blue → cyan → yellow → red with breakpoints at
/// 0, 1/3, 2/3 and 1; entry `i` is the color at `i / 255`.
pub fn colormap() -> [[f64; 3]; COLORMAP_LEN] {
    let mut table = [[0.0; 3]; COLORMAP_LEN];
    let stops = [[0.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
    for (i, entry) in table.iter_mut().enumerate() {
        let x = 3.0 * i as f64 / (COLORMAP_LEN - 1) as f64;
        let seg = (x.floor() as usize).min(2);
        let frac = x - seg as f64;
        for c in 0..3 {
            entry[c] = stops[seg][c] + frac * (stops[seg + 1][c] - stops[seg][c]);
        }
    }
    table
}

pub fn colormap_lookup(table: &[[f64; 3]; COLORMAP_LEN], v: f64) -> [f64; 3] {
    let idx = (v.clamp(0.0, 1.0) * (COLORMAP_LEN - 1) as f64).round() as usize;
    table[idx]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn interior(n: usize) -> std::ops::Range<usize> {
        n / 10..n - n / 10
    }

    #[test]
    fn cosine_has_unit_envelope() {
        let fs = 10_000.0;
        let x: Vec<f64> = (0..10_000).map(|i| (2.0 * PI * 100.0 * i as f64 / fs).cos()).collect();
        let z = analytic_signal(&x).unwrap();
        for i in interior(x.len()) {
            assert!((z.amplitude[i] - 1.0).abs() < 0.01);
            // Hilbert pair cos -> sin
            assert!((z.imag[i] - (2.0 * PI * 100.0 * i as f64 / fs).sin()).abs() < 0.01);
        }
    }

    #[test]
    fn constant_signal() {
        let z = analytic_signal(&[-2.5; 64]).unwrap();
        assert!(z.amplitude.iter().all(|a| (a - 2.5).abs() < 1e-12));
        assert!(z.instantaneous_frequency(1e-3).iter().all(|&f| f == 0.0));
    }

    #[test]
    fn chirp_frequency_tracks_linear_law() {
        // f(t) = 50 + 100 t over one second
        let fs = 10_000.0;
        let n = 10_000;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * (50.0 * t + 50.0 * t * t)).cos()
            })
            .collect();
        let f = analytic_signal(&x).unwrap().instantaneous_frequency(1.0 / fs);
        for i in interior(n) {
            let expected = 50.0 + 100.0 * i as f64 / fs;
            assert!((f[i] - expected).abs() / expected < 0.03, "{i}: {} vs {expected}", f[i]);
        }
    }

    #[test]
    fn linear_phase_gives_constant_frequency() {
        let dt = 1e-3;
        let phase: Vec<f64> = (0..200).map(|i| 2.0 * PI * 60.0 * i as f64 * dt).collect();
        let f = instantaneous_frequency(&phase, dt);
        for v in &f[1..199] {
            assert!((v - 60.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wrapped_phase_has_no_spike() {
        let dt = 1e-3;
        let carrier = 60.0;
        let wrapped: Vec<f64> = (0..200)
            .map(|i| {
                let p = 2.0 * PI * carrier * i as f64 * dt + 1.0;
                // fold into (-π, π]
                p - 2.0 * PI * ((p + PI) / (2.0 * PI)).floor()
            })
            .collect();
        assert!(wrapped.windows(2).any(|w| (w[1] - w[0]).abs() > PI));
        let f = instantaneous_frequency(&wrapped, dt);
        let dev = f.iter().map(|v| (v - carrier).abs()).fold(0.0, f64::max);
        assert!(dev < 0.01 * carrier, "max deviation {dev}");
    }

    #[test]
    fn tone_median_frequency() {
        let fs = 5000.0;
        let x: Vec<f64> = (0..5000).map(|i| (2.0 * PI * 100.0 * i as f64 / fs).sin()).collect();
        let mut f = analytic_signal(&x).unwrap().instantaneous_frequency(1.0 / fs);
        let r = interior(f.len());
        let mut mid: Vec<f64> = f.drain(r).collect();
        mid.sort_by(f64::total_cmp);
        assert!((mid[mid.len() / 2] - 100.0).abs() < 0.5);
    }

    fn tone_set(f0: f64, fs: f64, n: usize, amp: f64, phase: f64) -> ImfSet {
        let imf: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * PI * f0 * i as f64 / fs + phase).sin())
            .collect();
        ImfSet {
            imfs: vec![imf],
            residual: vec![0.0; n],
        }
    }

    fn gray(freq_max: f64) -> ImageConfig {
        ImageConfig {
            freq_max_hz: Some(freq_max),
            channels: 1,
            ..ImageConfig::default()
        }
    }

    #[test]
    fn tone_mass_lands_in_its_row() {
        let (f0, fs, n) = (1000.0, 16_000.0, 4000);
        let img = render_spectrum_image(&tone_set(f0, fs, n, 1.0, 0.0), 1.0 / fs, &gray(2.0 * f0))
            .unwrap();
        // 32 bins over [0, 2 f0] put f0 exactly on the boundary of bin 16
        let row = img.row_of_frequency(f0).unwrap();
        let total: f64 = img.pixels.iter().sum();
        let near: f64 = (0..IMAGE_SIZE)
            .filter(|r| r.abs_diff(row) <= 1)
            .flat_map(|r| (0..IMAGE_SIZE).map(move |c| (r, c)))
            .map(|(r, c)| img.pixel(r, c, 0))
            .sum();
        assert!(near / total >= 0.9, "{}", near / total);
    }

    #[test]
    fn start_phase_does_not_move_the_row() {
        let (f0, fs, n) = (700.0, 16_000.0, 4000);
        let dominant = |phase: f64| {
            let img = render_spectrum_image(&tone_set(f0, fs, n, 1.0, phase), 1.0 / fs, &gray(4000.0))
                .unwrap();
            (0..IMAGE_SIZE)
                .max_by(|&a, &b| {
                    let sa: f64 = (0..IMAGE_SIZE).map(|c| img.pixel(a, c, 0)).sum();
                    let sb: f64 = (0..IMAGE_SIZE).map(|c| img.pixel(b, c, 0)).sum();
                    sa.total_cmp(&sb)
                })
                .unwrap()
        };
        let base = dominant(0.0);
        for k in 1..8 {
            assert_eq!(dominant(k as f64 * 0.7), base);
        }
    }

    #[test]
    fn zero_imfs_give_zero_image() {
        let set = ImfSet {
            imfs: vec![vec![0.0; 256]; 3],
            residual: vec![0.0; 256],
        };
        let img = render_spectrum_image(&set, 1e-3, &ImageConfig::default()).unwrap();
        assert_eq!(img.pixels.len(), 32 * 32 * 3);
        // zero maps to the first colormap entry (pure blue)
        for px in img.pixels.chunks(3) {
            assert_eq!(px, &[0.0, 0.0, 1.0]);
        }
        let img = render_spectrum_image(&set, 1e-3, &gray(500.0)).unwrap();
        assert!(img.pixels.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn amplitude_scaling_is_invisible_without_log() {
        let cfg = ImageConfig {
            log_amplitude: false,
            ..gray(4000.0)
        };
        let a = render_spectrum_image(&tone_set(900.0, 16_000.0, 2000, 1.0, 0.3), 1.0 / 16_000.0, &cfg)
            .unwrap();
        let b = render_spectrum_image(&tone_set(900.0, 16_000.0, 2000, 2.0, 0.3), 1.0 / 16_000.0, &cfg)
            .unwrap();
        for (x, y) in a.pixels.iter().zip(&b.pixels) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn rgb_is_pointwise_function_of_gray() {
        let set = tone_set(900.0, 16_000.0, 2000, 1.0, 0.3);
        let g = render_spectrum_image(&set, 1.0 / 16_000.0, &gray(4000.0)).unwrap();
        let rgb = render_spectrum_image(
            &set,
            1.0 / 16_000.0,
            &ImageConfig {
                channels: 3,
                ..gray(4000.0)
            },
        )
        .unwrap();
        let table = colormap();
        for (v, px) in g.pixels.iter().zip(rgb.pixels.chunks(3)) {
            assert_eq!(px, colormap_lookup(&table, *v));
        }
        assert!(rgb.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((g.max_pixel() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_ceiling_above_nyquist() {
        let set = tone_set(100.0, 1000.0, 200, 1.0, 0.0);
        assert!(matches!(
            render_spectrum_image(&set, 1e-3, &gray(600.0)),
            Err(HhtError::AboveNyquist { .. })
        ));
    }

    #[test]
    fn colormap_matches_golden_file() {
        let golden = include_str!("../data/colormap.csv");
        let table = colormap();
        let rows: Vec<&str> = golden.lines().skip(1).collect();
        assert_eq!(rows.len(), COLORMAP_LEN);
        for (row, entry) in rows.iter().zip(table.iter()) {
            let vals: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
            for c in 0..3 {
                assert!((vals[c] - entry[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pnm_headers() {
        let set = tone_set(100.0, 1000.0, 200, 1.0, 0.0);
        let img = render_spectrum_image(&set, 1e-3, &gray(500.0)).unwrap();
        let mut buf = Vec::new();
        img.write_pnm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n32 32\n255\n"));
        assert_eq!(buf.len(), 13 + 32 * 32);
        assert_eq!(buf.iter().skip(13).copied().max(), Some(255));
    }
}
