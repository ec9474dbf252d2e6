//! Recording → window → (image, N1/N2) featurization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::band_features::{extract_features, BandConfig, BandError, FeaturePair};
use crate::emd::{sift, EmdConfig, EmdError};
use crate::hht::{render_spectrum_image, HhtError, SpectrumImage, IMAGE_SIZE};
use crate::hybrid::{ExampleSet, HybridError};
use crate::segmentation::{segment, SegmentConfig, Window};
use crate::signal::Recording;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{window}: {source}")]
    Emd { window: String, source: EmdError },
    #[error("{window}: {source}")]
    Hht { window: String, source: HhtError },
    #[error("{window}: {source}")]
    Band { window: String, source: BandError },
    #[error(transparent)]
    Dataset(#[from] HybridError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturizeConfig {
    pub segmentation: SegmentConfig,
    pub emd: EmdConfig,
    pub image: crate::hht::ImageConfig,
    pub bands: BandConfig,
}

fn window_name(w: &Window) -> String {
    format!("{}@{}", w.recording_id, w.start_index)
}

/// Image from the linear channel, raw band pair from the angular channel.
pub fn featurize_window(w: &Window, cfg: &FeaturizeConfig) -> Result<(SpectrumImage, FeaturePair), PipelineError> {
    let imfs = sift(&w.linear, &cfg.emd).map_err(|source| PipelineError::Emd {
        window: window_name(w),
        source,
    })?;
    let mut image = render_spectrum_image(&imfs, w.dt, &cfg.image).map_err(|source| PipelineError::Hht {
        window: window_name(w),
        source,
    })?;
    image.recording_id = w.recording_id.clone();
    image.start_index = w.start_index;
    image.label = Some(w.label);
    let features = extract_features(&w.angular, w.sample_rate_hz(), &cfg.bands).map_err(|source| {
        PipelineError::Band {
            window: window_name(w),
            source,
        }
    })?;
    Ok((image, features))
}

/// Featurizes every window of every recording, in recording then window
/// order. `jobs` caps the worker threads (`None` uses rayon's default).
pub fn featurize(
    recordings: &[Recording],
    cfg: &FeaturizeConfig,
    jobs: Option<usize>,
) -> Result<ExampleSet, PipelineError> {
    let windows: Vec<Window> = recordings.iter().flat_map(|r| segment(r, &cfg.segmentation)).collect();
    let run = || -> Vec<Result<(SpectrumImage, FeaturePair), PipelineError>> {
        windows.par_iter().map(|w| featurize_window(w, cfg)).collect()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?
            .install(run),
        None => run(),
    };
    let mut set = ExampleSet::new([IMAGE_SIZE, IMAGE_SIZE, cfg.image.channels]);
    for (w, r) in windows.iter().zip(results) {
        let (image, features) = r?;
        set.push(&image, features, w.label)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::SplitSpec;
    use crate::signal::{synthesize_recording, FaultLabel, SyntheticSpec};

    fn short(label: FaultLabel, seed: u64) -> Recording {
        let spec = SyntheticSpec {
            duration_s: 0.3,
            ..SyntheticSpec::preset(label)
        };
        synthesize_recording(&spec, seed).unwrap()
    }

    #[test]
    fn one_example_per_window() {
        let recs = vec![short(FaultLabel::Normal, 1), short(FaultLabel::Ball, 2)];
        let cfg = FeaturizeConfig::default();
        let set = featurize(&recs, &cfg, Some(1)).unwrap();
        let expected: usize = recs
            .iter()
            .map(|r| crate::segmentation::window_count(r.len(), 3897, 1559))
            .sum();
        assert_eq!(set.len(), expected);
        assert!(set.images.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(set.image_shape, [32, 32, 3]);
        assert_eq!(set.provenance[0].start_index, 0);
        assert_eq!(set.provenance[1].start_index, 1559);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let recs = vec![short(FaultLabel::InnerRace, 3)];
        let cfg = FeaturizeConfig::default();
        assert_eq!(featurize(&recs, &cfg, Some(1)).unwrap(), featurize(&recs, &cfg, Some(3)).unwrap());
    }

    #[test]
    fn perturbing_test_rows_leaves_scaler_alone() {
        let recs: Vec<Recording> = FaultLabel::ALL.iter().enumerate().map(|(i, &l)| short(l, i as u64)).collect();
        let mut set = featurize(&recs, &FeaturizeConfig::default(), None).unwrap();
        let spec = SplitSpec { seed: 1, ..SplitSpec::default() };
        set.assign_split(&spec).unwrap();
        let before = set.scaler;
        let train_before = set.to_dataset(&set.split.as_ref().unwrap().train).unwrap();

        let mut moved = set.clone();
        for &i in &set.split.as_ref().unwrap().test {
            moved.features[i].n1 *= 1e6;
            moved.features[i].n2 = -5.0;
        }
        moved.assign_split(&spec).unwrap();
        assert_eq!(moved.scaler, before);
        assert_eq!(moved.to_dataset(&moved.split.as_ref().unwrap().train).unwrap(), train_before);
    }
}
