use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HybridError;
use crate::signal::FaultLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    /// Fraction of what remains after the test split.
    pub val_fraction_of_remainder: f64,
    pub seed: u64,
    /// Split each class separately with the same fractions.
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.15,
            val_fraction_of_remainder: 0.15,
            seed: 0,
            stratified: false,
        }
    }
}

/// Example indices per split, each in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

// `0.15 * 27900` lands a hair above 4185 in binary; shave before rounding up.
fn ceil_fraction(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// `(train, val, test)` sizes: test = ⌈f_t·n⌉, val = ⌈f_v·(n − test)⌉.
pub fn split_sizes(n: usize, spec: &SplitSpec) -> Result<(usize, usize, usize), HybridError> {
    for (name, f) in [
        ("test_fraction", spec.test_fraction),
        ("val_fraction_of_remainder", spec.val_fraction_of_remainder),
    ] {
        if !(f > 0.0 && f < 1.0) {
            return Err(HybridError::Split(format!("{name} must be in (0, 1), got {f}")));
        }
    }
    let test = ceil_fraction(spec.test_fraction, n);
    let val = ceil_fraction(spec.val_fraction_of_remainder, n - test);
    let train = n - test - val;
    if train == 0 || val == 0 || test == 0 {
        return Err(HybridError::Split(format!(
            "{n} examples give an empty split ({train}/{val}/{test})"
        )));
    }
    Ok((train, val, test))
}

/// Seeded shuffle, then test, validation and training in that order.
pub fn split(labels: &[FaultLabel], spec: &SplitSpec) -> Result<SplitAssignment, HybridError> {
    let n = labels.len();
    if n < 3 {
        return Err(HybridError::Split(format!("need at least 3 examples, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    if !spec.stratified {
        split_sizes(n, spec)?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        return Ok(carve(&idx, spec));
    }
    let mut out = SplitAssignment::default();
    for class in FaultLabel::ALL {
        let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let part = carve(&idx, spec);
        out.train.extend(part.train);
        out.val.extend(part.val);
        out.test.extend(part.test);
    }
    for (name, s) in [("train", &out.train), ("val", &out.val), ("test", &out.test)] {
        if s.is_empty() {
            return Err(HybridError::Split(format!("stratified {name} split is empty")));
        }
    }
    out.train.shuffle(&mut rng);
    out.val.shuffle(&mut rng);
    out.test.shuffle(&mut rng);
    Ok(out)
}

fn carve(shuffled: &[usize], spec: &SplitSpec) -> SplitAssignment {
    let n = shuffled.len();
    let test = ceil_fraction(spec.test_fraction, n);
    let val = ceil_fraction(spec.val_fraction_of_remainder, n - test);
    SplitAssignment {
        test: shuffled[..test].to_vec(),
        val: shuffled[test..test + val].to_vec(),
        train: shuffled[test + val..].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_totals() {
        assert_eq!(split_sizes(27900, &SplitSpec::default()).unwrap(), (20157, 3558, 4185));
    }

    #[test]
    fn twenty_examples() {
        assert_eq!(split_sizes(20, &SplitSpec::default()).unwrap(), (14, 3, 3));
    }

    #[test]
    fn rejects_degenerate() {
        let labels = vec![FaultLabel::Normal; 2];
        assert!(split(&labels, &SplitSpec::default()).is_err());
        let bad = SplitSpec { test_fraction: 1.0, ..SplitSpec::default() };
        assert!(split_sizes(100, &bad).is_err());
    }

    #[test]
    fn same_seed_same_membership() {
        let labels: Vec<FaultLabel> = (0..200).map(|i| FaultLabel::ALL[i % 5]).collect();
        let spec = SplitSpec { seed: 4, ..SplitSpec::default() };
        assert_eq!(split(&labels, &spec).unwrap(), split(&labels, &spec).unwrap());
        let other = SplitSpec { seed: 5, ..spec };
        assert_ne!(split(&labels, &spec).unwrap(), split(&labels, &other).unwrap());
    }

    #[test]
    fn stratified_keeps_class_shares() {
        let labels: Vec<FaultLabel> = (0..500).map(|i| FaultLabel::ALL[i % 5]).collect();
        let spec = SplitSpec { stratified: true, ..SplitSpec::default() };
        let s = split(&labels, &spec).unwrap();
        for class in FaultLabel::ALL {
            let count = s.test.iter().filter(|&&i| labels[i] == class).count();
            assert_eq!(count, 15);
        }
    }

    proptest! {
        #[test]
        fn disjoint_and_exhaustive(n in 3usize..400, seed in any::<u64>(), strat in any::<bool>()) {
            let labels: Vec<FaultLabel> = (0..n).map(|i| FaultLabel::ALL[(i * 7) % 5]).collect();
            let spec = SplitSpec { seed, stratified: strat, ..SplitSpec::default() };
            if let Ok(s) = split(&labels, &spec) {
                let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                if !strat {
                    let (tr, va, te) = split_sizes(n, &spec).unwrap();
                    prop_assert_eq!((s.train.len(), s.val.len(), s.test.len()), (tr, va, te));
                }
            }
        }
    }
}
