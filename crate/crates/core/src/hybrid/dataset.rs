use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{split, HybridError, SplitAssignment, SplitSpec};
use crate::band_features::{FeaturePair, MinMaxScaler};
use crate::hht::SpectrumImage;
use crate::nn::{Dataset, Tensor};
use crate::signal::FaultLabel;

pub const DATASET_MANIFEST: &str = "dataset.json";
pub const DATASET_BIN: &str = "dataset.bin";
const FORMAT: &str = "vibediag-dataset";

/// Where an example came from; unique within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub recording_id: String,
    pub start_index: usize,
}

impl Provenance {
    pub fn key(&self) -> String {
        format!("{}@{}", self.recording_id, self.start_index)
    }
}

/// Featurized windows: one image and one raw (N1, N2) pair per example.
///
/// Features stay raw on disk; the scaler fitted on the training split maps
/// them into [0, 1] when model inputs are built.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSet {
    /// `[height, width, channels]`
    pub image_shape: [usize; 3],
    /// Row-major images, one after another.
    pub images: Vec<f64>,
    pub features: Vec<FeaturePair>,
    pub labels: Vec<FaultLabel>,
    pub provenance: Vec<Provenance>,
    pub split: Option<SplitAssignment>,
    pub scaler: Option<MinMaxScaler>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Section {
    offset: usize,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SplitKeys {
    train: Vec<String>,
    val: Vec<String>,
    test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    count: usize,
    image_shape: [usize; 3],
    label_map: Vec<String>,
    class_counts: Vec<usize>,
    provenance: Vec<Provenance>,
    scaler: Option<MinMaxScaler>,
    split: Option<SplitKeys>,
    /// Byte ranges in `dataset.bin`: images, raw features, one-hot labels.
    images: Section,
    features: Section,
    targets: Section,
}

impl ExampleSet {
    pub fn new(image_shape: [usize; 3]) -> Self {
        ExampleSet {
            image_shape,
            images: Vec::new(),
            features: Vec::new(),
            labels: Vec::new(),
            provenance: Vec::new(),
            split: None,
            scaler: None,
        }
    }

    pub fn image_len(&self) -> usize {
        self.image_shape.iter().product()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let k = self.image_len();
        &self.images[i * k..(i + 1) * k]
    }

    pub fn push_raw(
        &mut self,
        image: &[f64],
        features: FeaturePair,
        label: FaultLabel,
        provenance: Provenance,
    ) -> Result<(), HybridError> {
        if image.len() != self.image_len() {
            return Err(HybridError::Format(format!(
                "image has {} values, dataset expects {}",
                image.len(),
                self.image_len()
            )));
        }
        self.images.extend_from_slice(image);
        self.features.push(features);
        self.labels.push(label);
        self.provenance.push(provenance);
        self.split = None;
        self.scaler = None;
        Ok(())
    }

    pub fn push(&mut self, image: &SpectrumImage, features: FeaturePair, label: FaultLabel) -> Result<(), HybridError> {
        let shape = [image.height, image.width, image.channels];
        if shape != self.image_shape {
            return Err(HybridError::Format(format!(
                "image shape {shape:?} does not match dataset {:?}",
                self.image_shape
            )));
        }
        let prov = Provenance {
            recording_id: image.recording_id.clone(),
            start_index: image.start_index,
        };
        self.push_raw(&image.pixels, features, label, prov)
    }

    pub fn class_counts(&self, indices: Option<&[usize]>) -> [usize; FaultLabel::COUNT] {
        let mut counts = [0; FaultLabel::COUNT];
        match indices {
            Some(idx) => idx.iter().for_each(|&i| counts[self.labels[i].index()] += 1),
            None => self.labels.iter().for_each(|l| counts[l.index()] += 1),
        }
        counts
    }

    /// Splits the examples and fits the feature scaler on the training part.
    pub fn assign_split(&mut self, spec: &SplitSpec) -> Result<&SplitAssignment, HybridError> {
        let s = split(&self.labels, spec)?;
        let scaler = MinMaxScaler::fit(s.train.iter().map(|&i| &self.features[i]))
            .map_err(|e| HybridError::Split(e.to_string()))?;
        self.scaler = Some(scaler);
        self.split = Some(s);
        Ok(self.split.as_ref().unwrap())
    }

    /// Model inputs for the given examples, features scaled to [0, 1].
    pub fn to_dataset(&self, indices: &[usize]) -> Result<Dataset, HybridError> {
        let scaler = self
            .scaler
            .ok_or_else(|| HybridError::Format("dataset has no fitted scaler; split it first".into()))?;
        let n = indices.len();
        let mut images = Vec::with_capacity(n * self.image_len());
        let mut feats = Vec::with_capacity(2 * n);
        let mut targets = vec![0.0; n * FaultLabel::COUNT];
        for (row, &i) in indices.iter().enumerate() {
            images.extend_from_slice(self.image(i));
            feats.extend(scaler.apply(&self.features[i]));
            targets[row * FaultLabel::COUNT + self.labels[i].index()] = 1.0;
        }
        let [h, w, c] = self.image_shape;
        Ok(Dataset::new(
            Some(Tensor::new(vec![n, h, w, c], images)?),
            Some(Tensor::new(vec![n, 2], feats)?),
            Tensor::new(vec![n, FaultLabel::COUNT], targets)?,
        )?)
    }

    /// `(train, val, test)` model inputs.
    pub fn splits(&self) -> Result<(Dataset, Dataset, Dataset), HybridError> {
        let s = self
            .split
            .as_ref()
            .ok_or_else(|| HybridError::Format("dataset has not been split".into()))?;
        Ok((self.to_dataset(&s.train)?, self.to_dataset(&s.val)?, self.to_dataset(&s.test)?))
    }

    pub fn save(&self, dir: &Path) -> Result<(), HybridError> {
        fs::create_dir_all(dir)?;
        let n = self.len();
        let mut bytes = Vec::with_capacity(8 * (self.images.len() + n * (2 + FaultLabel::COUNT)));
        let put = |bytes: &mut Vec<u8>, v: f64| bytes.extend_from_slice(&v.to_le_bytes());
        let images = Section { offset: 0, len: self.images.len() };
        for &v in &self.images {
            put(&mut bytes, v);
        }
        let features = Section { offset: bytes.len(), len: 2 * n };
        for f in &self.features {
            put(&mut bytes, f.n1);
            put(&mut bytes, f.n2);
        }
        let targets = Section { offset: bytes.len(), len: n * FaultLabel::COUNT };
        for l in &self.labels {
            for c in 0..FaultLabel::COUNT {
                put(&mut bytes, if c == l.index() { 1.0 } else { 0.0 });
            }
        }
        let keys = |idx: &[usize]| idx.iter().map(|&i| self.provenance[i].key()).collect();
        let manifest = Manifest {
            format: FORMAT.into(),
            version: 1,
            count: n,
            image_shape: self.image_shape,
            label_map: FaultLabel::ALL.iter().map(|l| l.name().to_string()).collect(),
            class_counts: self.class_counts(None).to_vec(),
            provenance: self.provenance.clone(),
            scaler: self.scaler,
            split: self.split.as_ref().map(|s| SplitKeys {
                train: keys(&s.train),
                val: keys(&s.val),
                test: keys(&s.test),
            }),
            images,
            features,
            targets,
        };
        fs::write(dir.join(DATASET_BIN), &bytes)?;
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| HybridError::Format(e.to_string()))?;
        fs::write(dir.join(DATASET_MANIFEST), json)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, HybridError> {
        let text = fs::read_to_string(dir.join(DATASET_MANIFEST))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| HybridError::Format(format!("{DATASET_MANIFEST}: {e}")))?;
        if m.format != FORMAT || m.version != 1 {
            return Err(HybridError::Format(format!("unsupported format {} v{}", m.format, m.version)));
        }
        let bytes = fs::read(dir.join(DATASET_BIN))?;
        let read = |s: &Section| -> Result<Vec<f64>, HybridError> {
            let raw = bytes
                .get(s.offset..s.offset + 8 * s.len)
                .ok_or_else(|| HybridError::Format(format!("{DATASET_BIN} is truncated")))?;
            Ok(raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let n = m.count;
        let image_len: usize = m.image_shape.iter().product();
        if m.images.len != n * image_len || m.features.len != 2 * n || m.targets.len != n * FaultLabel::COUNT {
            return Err(HybridError::Format("section lengths do not match count".into()));
        }
        if m.provenance.len() != n {
            return Err(HybridError::Format("provenance list does not match count".into()));
        }
        let images = read(&m.images)?;
        let features = read(&m.features)?
            .chunks(2)
            .map(|p| FeaturePair { n1: p[0], n2: p[1] })
            .collect();
        let labels = read(&m.targets)?
            .chunks(FaultLabel::COUNT)
            .enumerate()
            .map(|(i, row)| {
                let hot: Vec<usize> = (0..row.len()).filter(|&c| row[c] == 1.0).collect();
                match hot.as_slice() {
                    [c] if row.iter().filter(|&&v| v != 0.0).count() == 1 => Ok(FaultLabel::ALL[*c]),
                    _ => Err(HybridError::Format(format!("label row {i} is not one-hot"))),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;

        let split = match &m.split {
            None => None,
            Some(keys) => {
                let index: HashMap<String, usize> =
                    m.provenance.iter().enumerate().map(|(i, p)| (p.key(), i)).collect();
                if index.len() != n {
                    return Err(HybridError::Format("provenance keys are not unique".into()));
                }
                let resolve = |ks: &[String]| -> Result<Vec<usize>, HybridError> {
                    ks.iter()
                        .map(|k| {
                            index
                                .get(k)
                                .copied()
                                .ok_or_else(|| HybridError::Format(format!("split refers to unknown example {k}")))
                        })
                        .collect()
                };
                Some(SplitAssignment {
                    train: resolve(&keys.train)?,
                    val: resolve(&keys.val)?,
                    test: resolve(&keys.test)?,
                })
            }
        };
        Ok(ExampleSet {
            image_shape: m.image_shape,
            images,
            features,
            labels,
            provenance: m.provenance,
            split,
            scaler: m.scaler,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> ExampleSet {
        let mut set = ExampleSet::new([2, 2, 1]);
        for i in 0..n {
            let v = i as f64 / n as f64;
            set.push_raw(
                &[v, 1.0 - v, 0.5, 0.0],
                FeaturePair { n1: i as f64, n2: 100.0 - i as f64 },
                FaultLabel::ALL[i % 5],
                Provenance { recording_id: format!("r{}", i % 3), start_index: i },
            )
            .unwrap();
        }
        set
    }

    #[test]
    fn save_load_round_trip() {
        let mut set = toy(40);
        set.assign_split(&SplitSpec { seed: 3, ..SplitSpec::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        set.save(dir.path()).unwrap();
        let back = ExampleSet::load(dir.path()).unwrap();
        assert_eq!(back, set);
        let len = fs::metadata(dir.path().join(DATASET_BIN)).unwrap().len();
        assert_eq!(len as usize, 8 * 40 * (4 + 2 + 5));
    }

    #[test]
    fn scaler_comes_from_training_rows_only() {
        let mut set = toy(60);
        let s = set.assign_split(&SplitSpec::default()).unwrap().clone();
        let lo = s.train.iter().map(|&i| set.features[i].n1).fold(f64::INFINITY, f64::min);
        assert_eq!(set.scaler.unwrap().min[0], lo);

        let (tr, _, te) = set.splits().unwrap();
        assert_eq!(tr.len(), s.train.len());
        let f = te.features.unwrap();
        assert!(f.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn needs_split_before_datasets() {
        assert!(toy(10).splits().is_err());
        let mut set = toy(3);
        assert!(set.push_raw(&[0.0; 3], FeaturePair { n1: 0.0, n2: 0.0 }, FaultLabel::Ball, Provenance {
            recording_id: "x".into(),
            start_index: 0
        })
        .is_err());
    }
}
