//! Renders the Hilbert spectrum image of the first window of each class and
//! writes them as PPM files.
//!
//! cargo run --release --example hilbert_image [-- <out_dir>]

use std::path::PathBuf;

use vibediag::pipeline::{featurize_window, FeaturizeConfig};
use vibediag::segmentation::segment;
use vibediag::signal::{synthesize_recording, FaultLabel, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "hilbert_images".into()));
    std::fs::create_dir_all(&out)?;
    let cfg = FeaturizeConfig::default();
    for label in FaultLabel::ALL {
        let rec = synthesize_recording(&SyntheticSpec { duration_s: 0.5, ..SyntheticSpec::preset(label) }, 1)?;
        let window = &segment(&rec, &cfg.segmentation)[0];
        let (image, _) = featurize_window(window, &cfg)?;

        // mean intensity of the top and bottom halves (high vs low frequency)
        let half = image.height / 2;
        let mean = |rows: std::ops::Range<usize>| {
            let n = rows.len() * image.width;
            rows.flat_map(|r| (0..image.width).map(move |c| (r, c)))
                .map(|(r, c)| image.pixel(r, c, 0))
                .sum::<f64>()
                / n as f64
        };
        let path = out.join(format!("{}.ppm", label.name()));
        image.save_pnm(&path)?;
        println!(
            "{:16} high-band {:.3}  low-band {:.3}  -> {}",
            label.display_name(),
            mean(0..half),
            mean(half..image.height),
            path.display()
        );
    }
    Ok(())
}
