//! Sifts one window of an inner-race recording and reports how the energy
//! spreads across the IMFs.
//!
//! cargo run --release --example emd_decompose

use vibediag::emd::{find_extrema, sift, zero_crossings, EmdConfig};
use vibediag::segmentation::{segment, SegmentConfig};
use vibediag::signal::{synthesize_recording, FaultLabel, SyntheticSpec};

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rec = synthesize_recording(&SyntheticSpec { duration_s: 0.5, ..SyntheticSpec::preset(FaultLabel::InnerRace) }, 7)?;
    let window = &segment(&rec, &SegmentConfig::default())[0];
    let set = sift(&window.linear, &EmdConfig::default())?;

    let total = energy(&window.linear);
    for (k, imf) in set.imfs.iter().enumerate() {
        println!(
            "IMF {}: {:5.1}% of energy, {} extrema, {} zero crossings",
            k + 1,
            100.0 * energy(imf) / total,
            find_extrema(imf).count(),
            zero_crossings(imf)
        );
    }
    println!("residual: {:5.1}% of energy", 100.0 * energy(&set.residual) / total);

    let err = set
        .reconstruct()
        .iter()
        .zip(&window.linear)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max reconstruction error {err:.2e}");
    Ok(())
}
