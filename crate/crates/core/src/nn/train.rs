use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{softmax_cross_entropy, Adam, AdamConfig, Inputs, Mode, Model, NnError, Tensor};

/// Examples for one split. Targets are one-hot `[n, classes]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Option<Tensor>,
    pub features: Option<Tensor>,
    pub targets: Tensor,
}

impl Dataset {
    pub fn new(images: Option<Tensor>, features: Option<Tensor>, targets: Tensor) -> Result<Self, NnError> {
        let n = targets.batch();
        for t in images.iter().chain(features.iter()) {
            if t.batch() != n {
                return Err(NnError::Shape(format!(
                    "input has {} rows but targets have {n}",
                    t.batch()
                )));
            }
        }
        Ok(Dataset {
            images,
            features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            images: self.images.as_ref().map(|t| t.select(indices)),
            features: self.features.as_ref().map(|t| t.select(indices)),
            targets: self.targets.select(indices),
        }
    }

    pub fn inputs(&self) -> Inputs<'_> {
        Inputs {
            image: self.images.as_ref(),
            features: self.features.as_ref(),
        }
    }

    /// Class index of each row.
    pub fn labels(&self) -> Vec<usize> {
        let k = self.targets.item_len();
        self.targets
            .data()
            .chunks(k)
            .map(|r| r.iter().position(|&v| v == 1.0).unwrap_or(0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 20,
            max_epochs: 200,
            patience: 50,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        self.adam().validate()?;
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(NnError::Config("batch_size, max_epochs and patience must be positive".into()));
        }
        if self.patience > self.max_epochs {
            return Err(NnError::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were restored; 1-based.
    pub best_epoch: usize,
}

impl History {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|r| r.epoch == self.best_epoch)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,train_acc,val_loss,val_acc")?;
        for r in &self.epochs {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

const EVAL_CHUNK: usize = 64;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn correct(logits: &Tensor, targets: &Tensor) -> usize {
    let k = logits.item_len();
    logits
        .data()
        .chunks(k)
        .zip(targets.data().chunks(k))
        .filter(|(l, t)| t[argmax(l)] == 1.0)
        .count()
}

/// Mean loss and accuracy in eval mode.
pub fn evaluate_loss(model: &mut Model, data: &Dataset) -> Result<(f64, f64), NnError> {
    if data.is_empty() {
        return Err(NnError::Empty("evaluation set"));
    }
    let k = data.targets.item_len();
    let (mut loss, mut hits) = (0.0, 0);
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let part = data.select(chunk);
        let logits = model.forward_logits(part.inputs(), Mode::Eval)?;
        let (l, _, _) = softmax_cross_entropy(logits.data(), part.targets.data(), k)?;
        loss += l * chunk.len() as f64;
        hits += correct(&logits, &part.targets);
    }
    let n = data.len() as f64;
    Ok((loss / n, hits as f64 / n))
}

/// Trains with Adam and early stopping, leaving `model` at the best epoch.
pub fn train(model: &mut Model, train_set: &Dataset, val_set: &Dataset, cfg: &TrainConfig) -> Result<History, NnError> {
    train_with_callback(model, train_set, val_set, cfg, |_| {})
}

/// As [`train`], calling `on_epoch` after every epoch.
pub fn train_with_callback<F: FnMut(&EpochRecord)>(
    model: &mut Model,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<History, NnError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(NnError::Empty("training set"));
    }
    if val_set.is_empty() {
        return Err(NnError::Empty("validation set"));
    }
    let k = model.n_classes();
    if train_set.targets.item_len() != k || val_set.targets.item_len() != k {
        return Err(NnError::Shape(format!("targets must have {k} columns")));
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    model.reseed_dropout(cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut adam = Adam::new(cfg.adam());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History::default();
    let mut best_loss = f64::INFINITY;
    let mut best_params = model.snapshot();
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let (mut loss_sum, mut hits) = (0.0, 0);
        for batch in order.chunks(cfg.batch_size) {
            let part = train_set.select(batch);
            model.zero_grad();
            let logits = model.forward_logits(part.inputs(), Mode::Train)?;
            let (loss, _, grad) = softmax_cross_entropy(logits.data(), part.targets.data(), k)?;
            if !loss.is_finite() {
                return Err(NnError::Diverged { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            hits += correct(&logits, &part.targets);
            model.backward(&Tensor::new(logits.shape().to_vec(), grad)?)?;
            adam.step(&mut model.params_mut());
        }
        let n = train_set.len() as f64;
        let (val_loss, val_acc) = evaluate_loss(model, val_set)?;
        if !val_loss.is_finite() || model.params().iter().any(|p| p.value.iter().any(|v| !v.is_finite())) {
            return Err(NnError::Diverged { epoch });
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: hits as f64 / n,
            val_loss,
            val_acc,
        };
        history.epochs.push(record);
        on_epoch(&record);

        if val_loss < best_loss {
            best_loss = val_loss;
            best_params = model.snapshot();
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    model.restore(&best_params)?;
    Ok(history)
}
