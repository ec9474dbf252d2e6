//! End to end on the synthetic rig: simulate, featurize, split, train the
//! hybrid network and report on the held-out test set.
//!
//! cargo run --release --example train_hybrid [-- <seconds_per_class> <epochs>]

use std::time::Instant;

use vibediag::hybrid::{evaluate, Branch, SplitSpec};
use vibediag::nn::{train_with_callback, TrainConfig};
use vibediag::pipeline::{featurize, FeaturizeConfig};
use vibediag::signal::{synthesize_recording, FaultLabel, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seconds: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(6.0);
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(40);
    let seed = 7;

    let t0 = Instant::now();
    let recordings = FaultLabel::ALL
        .into_iter()
        .enumerate()
        .map(|(i, l)| synthesize_recording(&SyntheticSpec { duration_s: seconds, ..SyntheticSpec::preset(l) }, 100 + i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let mut set = featurize(&recordings, &FeaturizeConfig::default(), None)?;
    set.assign_split(&SplitSpec { seed, ..Default::default() })?;
    let (train, val, test) = set.splits()?;
    println!("{} examples ({} train / {} val / {} test) in {:.1}s", set.len(), train.len(), val.len(), test.len(), t0.elapsed().as_secs_f64());

    let mut model = Branch::Hybrid.build(set.image_shape[2], seed)?;
    println!("hybrid model: {} parameters", model.parameter_count());
    let cfg = TrainConfig { max_epochs: epochs, patience: epochs.min(50), seed, ..Default::default() };
    let history = train_with_callback(&mut model, &train, &val, &cfg, |r| {
        if r.epoch % 5 == 0 {
            println!("epoch {:>3}  loss {:.4}  val_loss {:.4}  val_acc {:.3}", r.epoch, r.train_loss, r.val_loss, r.val_acc);
        }
    })?;
    let metrics = evaluate(&mut model, &test)?;
    println!("best epoch {}, total {:.0}s\n", history.best_epoch, t0.elapsed().as_secs_f64());
    print!("{}", metrics.report().to_text());
    Ok(())
}
