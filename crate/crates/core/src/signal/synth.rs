//! Synthetic test rig.
//!
//! Linear channel: periodic defect impacts, each ringing the structural modes
//! as a damped sinusoid, plus a shaft-rate harmonic and white noise. Inner-race
//! style faults amplitude-modulate the impacts at the shaft rate.
//!
//! Angular channel: tones at the torsional resonances whose amplitudes depend
//! on the fault class, plus a shaft harmonic and white noise.
//!
//! The preset fault rates are generator knobs chosen to be distinct; they are
//! not derived from any real bearing geometry.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FaultLabel, Recording, SignalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub label: FaultLabel,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub shaft_hz: f64,
    /// Torsional resonances that carry the angular-channel band power.
    pub resonance_hz: Vec<f64>,
    /// Angular tone amplitude per entry of `resonance_hz`.
    pub torsional_amplitude: Vec<f64>,
    /// Structural modes rung by each impact in the linear channel.
    pub structural_hz: Vec<f64>,
    pub damping_ratio: f64,
    /// Impact rates; several entries model simultaneous defects.
    pub fault_rates_hz: Vec<f64>,
    pub impulse_amplitude: f64,
    /// Depth of shaft-rate amplitude modulation of the impacts (0 = none).
    pub modulation_depth: f64,
    /// Standard deviation of impact timing jitter, as a fraction of the period.
    pub rate_jitter: f64,
    pub shaft_harmonic_amplitude: f64,
    pub noise_sigma: f64,
}

impl SyntheticSpec {
    /// Default generator settings for each class at the reference rig's rate
    /// and 20 Hz shaft speed.
    pub fn preset(label: FaultLabel) -> Self {
        const INNER: f64 = 108.0;
        const OUTER: f64 = 71.0;
        const BALL: f64 = 47.0;
        let (rates, amp, depth, torsional): (Vec<f64>, f64, f64, [f64; 2]) = match label {
            FaultLabel::Normal => (vec![], 0.0, 0.0, [0.05, 0.05]),
            FaultLabel::InnerRace => (vec![INNER], 1.0, 0.8, [0.40, 0.15]),
            FaultLabel::OuterRace => (vec![OUTER], 1.0, 0.0, [0.15, 0.40]),
            FaultLabel::Ball => (vec![BALL], 0.8, 0.3, [0.25, 0.25]),
            FaultLabel::Combined => (vec![INNER, OUTER, BALL], 0.8, 0.5, [0.50, 0.50]),
        };
        SyntheticSpec {
            label,
            duration_s: 1.0,
            sample_rate_hz: crate::RIG_SAMPLE_RATE_HZ,
            shaft_hz: crate::RIG_RPM / 60.0,
            resonance_hz: vec![240.0, 820.0],
            torsional_amplitude: torsional.to_vec(),
            structural_hz: vec![2600.0, 5100.0],
            damping_ratio: 0.05,
            fault_rates_hz: rates,
            impulse_amplitude: amp,
            modulation_depth: depth,
            rate_jitter: 0.005,
            shaft_harmonic_amplitude: 0.1,
            noise_sigma: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |m: &str| Err(SignalError::Spec(m.to_owned()));
        if !(self.duration_s > 0.0) {
            return bad("duration_s must be positive");
        }
        if !(self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz must be positive");
        }
        if !(self.shaft_hz > 0.0) {
            return bad("shaft_hz must be positive");
        }
        if self.resonance_hz.len() != self.torsional_amplitude.len() {
            return bad("torsional_amplitude needs one entry per resonance");
        }
        if !(0.0..1.0).contains(&self.damping_ratio) || self.damping_ratio == 0.0 {
            return bad("damping_ratio must be in (0, 1)");
        }
        if self.noise_sigma < 0.0 || self.rate_jitter < 0.0 || self.modulation_depth < 0.0 {
            return bad("noise_sigma, rate_jitter and modulation_depth must be non-negative");
        }
        let nyquist = self.sample_rate_hz / 2.0;
        let second_harmonic = 2.0 * self.shaft_hz;
        let rates = self
            .resonance_hz
            .iter()
            .chain(&self.structural_hz)
            .chain(&self.fault_rates_hz)
            .chain(std::iter::once(&second_harmonic));
        for &r in rates {
            if !(r > 0.0) {
                return bad("all rates must be positive");
            }
            if r >= nyquist {
                return Err(SignalError::Spec(format!(
                    "rate {r} Hz is at or above Nyquist ({nyquist} Hz)"
                )));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }
}

/// Generates one recording. Pure function of `(spec, seed)`.
pub fn synthesize_recording(spec: &SyntheticSpec, seed: u64) -> Result<Recording, SignalError> {
    spec.validate()?;
    let n = spec.n_samples();
    if n < 2 {
        return Err(SignalError::Spec("duration too short for the sample rate".into()));
    }
    let fs = spec.sample_rate_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut linear = vec![0.0; n];
    let mut angular = vec![0.0; n];

    // defect impacts
    if spec.impulse_amplitude > 0.0 {
        let kernel = impact_kernel(&spec.structural_hz, spec.damping_ratio, fs);
        for &rate in &spec.fault_rates_hz {
            let period = 1.0 / rate;
            let mut t = rng.random::<f64>() * period;
            let end = n as f64 / fs;
            while t < end {
                let jitter = spec.rate_jitter * period * unit.sample(&mut rng);
                let at = t + jitter;
                let shaft_phase = 2.0 * PI * spec.shaft_hz * at;
                let gain = spec.impulse_amplitude * (1.0 + spec.modulation_depth * shaft_phase.cos())
                    / (1.0 + spec.modulation_depth);
                let start = (at * fs).round();
                if start >= 0.0 {
                    let start = start as usize;
                    for (k, &h) in kernel.iter().enumerate() {
                        match linear.get_mut(start + k) {
                            Some(v) => *v += gain * h,
                            None => break,
                        }
                    }
                }
                t += period;
            }
        }
    }

    let tors_phase: Vec<f64> = spec
        .resonance_hz
        .iter()
        .map(|_| rng.random::<f64>() * 2.0 * PI)
        .collect();
    let shaft_phase0 = rng.random::<f64>() * 2.0 * PI;

    for i in 0..n {
        let t = i as f64 / fs;
        let shaft = 2.0 * PI * spec.shaft_hz * t + shaft_phase0;
        linear[i] += spec.shaft_harmonic_amplitude * (shaft.sin() + 0.5 * (2.0 * shaft).sin());
        let mut a = 0.5 * spec.shaft_harmonic_amplitude * shaft.sin();
        for ((&f, &amp), &ph) in spec
            .resonance_hz
            .iter()
            .zip(&spec.torsional_amplitude)
            .zip(&tors_phase)
        {
            a += amp * (2.0 * PI * f * t + ph).sin() * (1.0 + 0.3 * shaft.cos());
        }
        angular[i] = a;
    }

    if spec.noise_sigma > 0.0 {
        for v in linear.iter_mut() {
            *v += spec.noise_sigma * unit.sample(&mut rng);
        }
        for v in angular.iter_mut() {
            *v += spec.noise_sigma * unit.sample(&mut rng);
        }
    }

    Recording::new(
        format!("synth-{}-{seed}", spec.label.name().to_ascii_lowercase()),
        fs,
        spec.shaft_hz * 60.0,
        spec.label,
        vec![linear],
        angular,
    )
}

/// Sum of unit damped sinusoids, truncated once every mode has decayed by 1e-4.
fn impact_kernel(modes_hz: &[f64], zeta: f64, fs: f64) -> Vec<f64> {
    let slowest = modes_hz.iter().copied().fold(f64::INFINITY, f64::min);
    if !slowest.is_finite() {
        return vec![1.0];
    }
    let len = ((1e4f64).ln() / (zeta * 2.0 * PI * slowest) * fs).ceil() as usize + 1;
    (0..len)
        .map(|k| {
            let tau = k as f64 / fs;
            modes_hz
                .iter()
                .map(|&f| {
                    let w = 2.0 * PI * f;
                    (-zeta * w * tau).exp() * (w * (1.0 - zeta * zeta).sqrt() * tau).sin()
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for label in FaultLabel::ALL {
            SyntheticSpec::preset(label).validate().unwrap();
        }
    }

    #[test]
    fn rejects_rate_above_nyquist() {
        let mut spec = SyntheticSpec::preset(FaultLabel::OuterRace);
        spec.sample_rate_hz = 1000.0;
        assert!(matches!(synthesize_recording(&spec, 1), Err(SignalError::Spec(_))));
    }

    #[test]
    fn deterministic_given_seed() {
        let mut spec = SyntheticSpec::preset(FaultLabel::Combined);
        spec.duration_s = 0.2;
        let a = synthesize_recording(&spec, 9).unwrap();
        let b = synthesize_recording(&spec, 9).unwrap();
        let c = synthesize_recording(&spec, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.linear, c.linear);
    }
}
