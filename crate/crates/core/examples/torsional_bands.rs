//! Per-class mean band power around the two torsional resonances, raw and
//! after min-max scaling fitted on the same recordings.
//!
//! cargo run --release --example torsional_bands

use vibediag::band_features::{extract_features, BandConfig, MinMaxScaler};
use vibediag::segmentation::{segment, SegmentConfig};
use vibediag::signal::{synthesize_recording, FaultLabel, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bands = BandConfig::default();
    let mut rows = Vec::new();
    for (i, label) in FaultLabel::ALL.into_iter().enumerate() {
        let rec = synthesize_recording(&SyntheticSpec { duration_s: 1.0, ..SyntheticSpec::preset(label) }, i as u64)?;
        for w in segment(&rec, &SegmentConfig::default()) {
            rows.push((label, extract_features(&w.angular, w.sample_rate_hz(), &bands)?));
        }
    }
    let scaler = MinMaxScaler::fit(rows.iter().map(|(_, f)| f))?;
    println!("{:16}{:>10}{:>10}{:>8}{:>8}", "class", "N1", "N2", "n1", "n2");
    for label in FaultLabel::ALL {
        let mine: Vec<_> = rows.iter().filter(|(l, _)| *l == label).map(|(_, f)| f).collect();
        let k = mine.len() as f64;
        let raw = mine.iter().fold([0.0; 2], |acc, f| [acc[0] + f.n1 / k, acc[1] + f.n2 / k]);
        let scaled = mine.iter().fold([0.0; 2], |acc, f| {
            let [a, b] = scaler.apply(f);
            [acc[0] + a / k, acc[1] + b / k]
        });
        println!("{:16}{:>10.1}{:>10.1}{:>8.3}{:>8.3}", label.display_name(), raw[0], raw[1], scaled[0], scaled[1]);
    }
    Ok(())
}
