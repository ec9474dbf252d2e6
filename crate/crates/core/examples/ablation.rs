//! Trains the hybrid network and its two single-branch variants on the same
//! split and compares test accuracy.
//!
//! cargo run --release --example ablation

use vibediag::hybrid::{evaluate, Branch, SplitSpec};
use vibediag::nn::{train, TrainConfig};
use vibediag::pipeline::{featurize, FeaturizeConfig};
use vibediag::signal::{synthesize_recording, FaultLabel, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let recordings = FaultLabel::ALL
        .into_iter()
        .enumerate()
        .map(|(i, l)| synthesize_recording(&SyntheticSpec { duration_s: 3.0, noise_sigma: 0.3, ..SyntheticSpec::preset(l) }, 200 + i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cfg = FeaturizeConfig::default();
    cfg.image.channels = 1;
    let mut set = featurize(&recordings, &cfg, None)?;
    set.assign_split(&SplitSpec { seed: 3, stratified: true, ..Default::default() })?;
    let (tr, va, te) = set.splits()?;

    let tc = TrainConfig { learning_rate: 1e-3, max_epochs: 30, patience: 10, seed: 3, ..Default::default() };
    println!("{:8}{:>10}{:>10}{:>8}", "branch", "params", "test acc", "epochs");
    for branch in Branch::ALL {
        let mut model = branch.build(1, 3)?;
        let h = train(&mut model, &tr, &va, &tc)?;
        let m = evaluate(&mut model, &te)?;
        println!("{:8}{:>10}{:>10.3}{:>8}", branch.name(), model.parameter_count(), m.accuracy, h.epochs.len());
    }
    Ok(())
}
