//! Empirical mode decomposition by sifting.
//!
//! Each sifting pass fits natural cubic splines through the local maxima and
//! minima (mirrored about both series ends), subtracts the envelope mean, and
//! repeats until the Cauchy-type criterion
//! `SD = Σ(h_prev − h)² / Σ h_prev²` drops below `sd_threshold` and the
//! candidate's extrema and zero-crossing counts differ by at most one, or
//! `max_sift_iterations` is reached.
//! The residual is always formed by subtraction, so `Σ imfs + residual`
//! reproduces the input to rounding error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EmdError {
    #[error("series too short for sifting: {len} < {min}")]
    TooShort { len: usize, min: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("need at least 2 spline knots, got {0}")]
    MonotoneComponent(usize),
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmdConfig {
    pub max_imfs: usize,
    pub sd_threshold: f64,
    pub max_sift_iterations: usize,
    pub boundary_pad_extrema: usize,
}

impl Default for EmdConfig {
    fn default() -> Self {
        EmdConfig {
            max_imfs: 3,
            sd_threshold: 0.2,
            max_sift_iterations: 100,
            boundary_pad_extrema: 2,
        }
    }
}

impl EmdConfig {
    pub fn validate(&self) -> Result<(), EmdError> {
        if self.max_imfs < 1 {
            return Err(EmdError::Config("max_imfs must be >= 1".into()));
        }
        if !(self.sd_threshold > 0.0 && self.sd_threshold < 1.0) {
            return Err(EmdError::Config("sd_threshold must be in (0, 1)".into()));
        }
        if self.max_sift_iterations < 1 {
            return Err(EmdError::Config("max_sift_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Intrinsic mode functions of one window plus the leftover residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ImfSet {
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
}

impl ImfSet {
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extrema {
    pub maxima: Vec<(usize, f64)>,
    pub minima: Vec<(usize, f64)>,
}

impl Extrema {
    pub fn count(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }
}

/// Strict interior local extrema. A flat run bounded by lower (higher)
/// neighbours on both sides counts once, at its midpoint index.
pub fn find_extrema(series: &[f64]) -> Extrema {
    let n = series.len();
    let mut out = Extrema::default();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        let v = series[i];
        let mut j = i;
        while j + 1 < n && series[j + 1] == v {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let (prev, next) = (series[i - 1], series[j + 1]);
        let mid = (i + j) / 2;
        if prev < v && next < v {
            out.maxima.push((mid, v));
        } else if prev > v && next > v {
            out.minima.push((mid, v));
        }
        i = j + 1;
    }
    out
}

/// Number of sign changes, with exact zeros bridged to the next non-zero sample.
pub fn zero_crossings(series: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in series {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

/// Natural cubic spline through `(x, y)` knots (strictly increasing `x`).
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(knots: &[(f64, f64)]) -> Result<Self, EmdError> {
        let k = knots.len();
        if k < 2 {
            return Err(EmdError::MonotoneComponent(k));
        }
        let xs: Vec<f64> = knots.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = knots.iter().map(|p| p.1).collect();
        let mut m = vec![0.0; k];
        if k > 2 {
            // Thomas algorithm on the interior equations
            //   h[i-1] m[i-1] + 2(h[i-1]+h[i]) m[i] + h[i] m[i+1] = 6(d[i] - d[i-1])
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let d: Vec<f64> = (0..k - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
            let size = k - 2;
            let mut diag = vec![0.0; size];
            let mut rhs = vec![0.0; size];
            for r in 0..size {
                let i = r + 1;
                diag[r] = 2.0 * (h[i - 1] + h[i]);
                rhs[r] = 6.0 * (d[i] - d[i - 1]);
            }
            for r in 1..size {
                let w = h[r] / diag[r - 1];
                diag[r] -= w * h[r];
                rhs[r] -= w * rhs[r - 1];
            }
            m[size] = rhs[size - 1] / diag[size - 1];
            for r in (0..size - 1).rev() {
                m[r + 1] = (rhs[r] - h[r + 1] * m[r + 2]) / diag[r];
            }
        }
        Ok(NaturalSpline { xs, ys, m })
    }

    fn segment_value(&self, seg: usize, x: f64) -> f64 {
        let (x0, x1) = (self.xs[seg], self.xs[seg + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * self.ys[seg]
            + b * self.ys[seg + 1]
            + ((a * a * a - a) * self.m[seg] + (b * b * b - b) * self.m[seg + 1]) * h * h / 6.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 2;
        let seg = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(last),
        };
        self.segment_value(seg, x)
    }

    /// Values at the integer grid `0..n`, walking segments in order.
    pub fn sample_grid(&self, n: usize) -> Vec<f64> {
        let last = self.xs.len() - 2;
        let mut seg = 0;
        (0..n)
            .map(|i| {
                let x = i as f64;
                while seg < last && self.xs[seg + 1] <= x {
                    seg += 1;
                }
                self.segment_value(seg, x)
            })
            .collect()
    }
}

/// Spline envelope through extrema points, sampled at `0..n`.
pub fn spline_envelope(points: &[(f64, f64)], n: usize) -> Result<Vec<f64>, EmdError> {
    Ok(NaturalSpline::new(points)?.sample_grid(n))
}

/// Adds `pad` mirrored copies of the outermost extrema beyond each end,
/// reflecting positions about index 0 and index `n-1`.
fn mirror_pad(points: &[(usize, f64)], n: usize, pad: usize) -> Vec<(f64, f64)> {
    let pad = pad.min(points.len());
    let end = (n - 1) as f64;
    let mut out = Vec::with_capacity(points.len() + 2 * pad);
    out.extend(points[..pad].iter().rev().map(|&(i, v)| (-(i as f64), v)));
    out.extend(points.iter().map(|&(i, v)| (i as f64, v)));
    out.extend(
        points[points.len() - pad..]
            .iter()
            .rev()
            .map(|&(i, v)| (2.0 * end - i as f64, v)),
    );
    out
}

/// Mean of the upper and lower envelopes, or `None` when either side has no
/// extrema to spline through.
fn envelope_mean(h: &[f64], pad: usize) -> Option<Vec<f64>> {
    let ext = find_extrema(h);
    if ext.maxima.is_empty() || ext.minima.is_empty() {
        return None;
    }
    let n = h.len();
    let pad = pad.max(1);
    let upper = spline_envelope(&mirror_pad(&ext.maxima, n, pad), n).ok()?;
    let lower = spline_envelope(&mirror_pad(&ext.minima, n, pad), n).ok()?;
    Some(upper.iter().zip(&lower).map(|(u, l)| 0.5 * (u + l)).collect())
}

pub const MIN_SIFT_LEN: usize = 8;

/// Extrema and zero-crossing counts differ by at most one.
pub fn is_imf_shaped(h: &[f64]) -> bool {
    let ext = find_extrema(h).count() as i64;
    (ext - zero_crossings(h) as i64).abs() <= 1
}

pub fn sift(series: &[f64], config: &EmdConfig) -> Result<ImfSet, EmdError> {
    config.validate()?;
    if series.len() < MIN_SIFT_LEN {
        return Err(EmdError::TooShort {
            len: series.len(),
            min: MIN_SIFT_LEN,
        });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(EmdError::NonFinite(i));
    }

    let mut residual = series.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < config.max_imfs {
        let ext = find_extrema(&residual);
        if ext.count() < 3 || ext.maxima.is_empty() || ext.minima.is_empty() {
            break;
        }
        let mut h = residual.clone();
        for _ in 0..config.max_sift_iterations {
            let Some(mean) = envelope_mean(&h, config.boundary_pad_extrema) else {
                break;
            };
            let energy: f64 = h.iter().map(|v| v * v).sum();
            let diff: f64 = mean.iter().map(|v| v * v).sum();
            for (hv, mv) in h.iter_mut().zip(&mean) {
                *hv -= mv;
            }
            if energy == 0.0 {
                break;
            }
            if diff / energy < config.sd_threshold && is_imf_shaped(&h) {
                break;
            }
        }
        for (r, v) in residual.iter_mut().zip(&h) {
            *r -= v;
        }
        imfs.push(h);
    }
    Ok(ImfSet { imfs, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn tone(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma).powi(2);
            sbb += (y - mb).powi(2);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn extrema_hand_checked() {
        let e = find_extrema(&[0.0, 1.0, 0.0, -1.0, 0.0]);
        assert_eq!(e.maxima, vec![(1, 1.0)]);
        assert_eq!(e.minima, vec![(3, -1.0)]);
        let mono: Vec<f64> = (0..20).map(|i| (i as f64).sqrt()).collect();
        assert_eq!(find_extrema(&mono).count(), 0);
    }

    #[test]
    fn plateau_midpoint() {
        let e = find_extrema(&[0.0, 2.0, 2.0, 2.0, 2.0, 0.0, 1.0]);
        assert_eq!(e.maxima, vec![(2, 2.0)]);
        assert_eq!(e.minima, vec![(5, 0.0)]);
        // a shoulder is not an extremum
        assert_eq!(find_extrema(&[0.0, 1.0, 1.0, 2.0]).count(), 0);
    }

    #[test]
    fn extrema_of_sampled_sine() {
        // sin(2π·5t) on [0, 1) at 1 kHz has five peaks and five troughs
        let e = find_extrema(&tone(5.0, 1000.0, 1000));
        assert_eq!(e.maxima.len(), 5);
        assert_eq!(e.minima.len(), 5);
    }

    #[test]
    fn two_equal_knots_give_constant() {
        let env = spline_envelope(&[(0.0, 1.0), (9.0, 1.0)], 10).unwrap();
        assert!(env.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert_eq!(
            spline_envelope(&[(0.0, 1.0)], 10),
            Err(EmdError::MonotoneComponent(1))
        );
    }

    #[test]
    fn spline_passes_through_parabola_knots() {
        let knots: Vec<(f64, f64)> = [0.0, 3.0, 4.0, 9.0, 12.0, 20.0]
            .iter()
            .map(|&x| (x, 0.5 * x * x - 3.0 * x + 1.0))
            .collect();
        let s = NaturalSpline::new(&knots).unwrap();
        let grid = s.sample_grid(21);
        for &(x, y) in &knots {
            assert!((grid[x as usize] - y).abs() < 1e-9);
            assert!((s.eval(x) - y).abs() < 1e-9);
        }
    }

    #[test]
    fn spline_second_derivative_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mut x = 0.0;
            let knots: Vec<(f64, f64)> = (0..6)
                .map(|_| {
                    x += rng.random_range(1.0..5.0);
                    (x, rng.random_range(-3.0..3.0))
                })
                .collect();
            let s = NaturalSpline::new(&knots).unwrap();
            // 4-point one-sided second differences, exact for a cubic piece,
            // taken inside the segments to the left and right of each knot
            for w in knots.windows(3) {
                let (a, k, b) = (w[0].0, w[1].0, w[2].0);
                let sl = (k - a) / 3.0;
                let f = |j: f64| s.eval(k - j * sl);
                let left = (2.0 * f(0.0) - 5.0 * f(1.0) + 4.0 * f(2.0) - f(3.0)) / (sl * sl);
                let sr = (b - k) / 3.0;
                let g = |j: f64| s.eval(k + j * sr);
                let right = (2.0 * g(0.0) - 5.0 * g(1.0) + 4.0 * g(2.0) - g(3.0)) / (sr * sr);
                assert!((left - right).abs() < 1e-9, "{left} vs {right}");
            }
        }
    }

    #[test]
    fn pure_tone_single_imf() {
        let x = tone(50.0, 1000.0, 1000);
        let set = sift(&x, &EmdConfig::default()).unwrap();
        assert!(!set.imfs.is_empty());
        assert!(corr(&set.imfs[0], &x) >= 0.99);
        let rmax = set.residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(rmax <= 0.05, "residual {rmax}");
    }

    #[test]
    fn tone_plus_trend() {
        let n = 1000;
        let trend: Vec<f64> = (0..n).map(|i| 0.5 * i as f64 / 1000.0).collect();
        let t = tone(50.0, 1000.0, n);
        let x: Vec<f64> = t.iter().zip(&trend).map(|(a, b)| a + b).collect();
        let set = sift(&x, &EmdConfig::default()).unwrap();
        assert!(corr(&set.imfs[0], &t) >= 0.95);
        assert!(corr(&set.residual, &trend) >= 0.95);
    }

    #[test]
    fn monotone_input_has_no_imfs() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.1).exp()).collect();
        let set = sift(&x, &EmdConfig::default()).unwrap();
        assert!(set.imfs.is_empty());
        assert_eq!(set.residual, x);
    }

    #[test]
    fn input_errors() {
        let cfg = EmdConfig::default();
        assert!(matches!(sift(&[1.0; 5], &cfg), Err(EmdError::TooShort { .. })));
        let mut x = tone(3.0, 100.0, 64);
        x[10] = f64::NAN;
        assert_eq!(sift(&x, &cfg), Err(EmdError::NonFinite(10)));
    }

    #[test]
    fn imfs_mostly_oscillatory() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ok = 0;
        let mut total = 0;
        for _ in 0..100 {
            let n = 512;
            let comps: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.random_range(0.2..2.0),
                        rng.random_range(2.0..60.0),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    comps.iter().map(|(a, f, p)| a * (2.0 * PI * f * t + p).sin()).sum::<f64>()
                        + 0.05 * rng.random_range(-1.0..1.0)
                })
                .collect();
            let set = sift(&x, &EmdConfig::default()).unwrap();
            for imf in &set.imfs {
                total += 1;
                let ext = find_extrema(imf).count() as i64;
                let zc = zero_crossings(imf) as i64;
                if (ext - zc).abs() <= 1 {
                    ok += 1;
                }
            }
        }
        let frac = ok as f64 / total as f64;
        assert!(frac >= 0.95, "only {frac:.3} of IMFs satisfy the oscillation rule");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reconstruction_identity(x in prop::collection::vec(-1e3f64..1e3, 8..400)) {
            let set = sift(&x, &EmdConfig::default()).unwrap();
            let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in set.reconstruct().iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-10 * max.max(f64::MIN_POSITIVE));
            }
        }

        #[test]
        fn deterministic(x in prop::collection::vec(-1.0f64..1.0, 8..200)) {
            let cfg = EmdConfig::default();
            prop_assert_eq!(sift(&x, &cfg).unwrap(), sift(&x, &cfg).unwrap());
        }
    }
}
