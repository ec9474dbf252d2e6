//! Synthesizes one short recording per fault class and prints where the
//! torsional resonances show up in each angular channel.
//!
//! cargo run --release --example simulate_rig [-- <out_dir>]

use vibediag::band_features::{find_torsional_peaks, magnitude_spectrum, PeakSearch};
use vibediag::signal::{save_recording, synthesize_recording, FaultLabel, SyntheticSpec};

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1);
    println!("{:16}{:>10}{:>12}{:>12}  peaks", "class", "samples", "rms lin", "rms ang");
    for (i, label) in FaultLabel::ALL.into_iter().enumerate() {
        let spec = SyntheticSpec { duration_s: 2.0, ..SyntheticSpec::preset(label) };
        let rec = synthesize_recording(&spec, 42 + i as u64)?;
        let peaks = find_torsional_peaks(&magnitude_spectrum(&rec.angular, rec.sample_rate_hz)?, &PeakSearch::default())?;
        let shown: Vec<String> = peaks.peaks_hz.iter().map(|f| format!("{f:.0} Hz")).collect();
        println!(
            "{:16}{:>10}{:>12.4}{:>12.4}  {}",
            label.display_name(),
            rec.len(),
            rms(&rec.linear[0]),
            rms(&rec.angular),
            shown.join(", ")
        );
        if let Some(dir) = &out {
            save_recording(&rec, &std::path::Path::new(dir).join(format!("{}.csv", rec.id)))?;
        }
    }
    Ok(())
}
