//! Optimization loop: Adam updates over shuffled mini-batches with
//! patience-based early stopping.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CantmModel, Document, LossBreakdown, Noise, ParamGroup, Variant};

pub use crate::model::LossMode as TrainMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Adam denominator offset.
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub n_train_samples: usize,
    pub seed: u64,
    pub mode: TrainMode,
    /// Global gradient-norm clip; off when `None`.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 200,
            patience: 4,
            n_train_samples: 10,
            seed: 0,
            mode: TrainMode::Full,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("train config: {m}")));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 || self.n_train_samples == 0 {
            return bad("batch_size, max_epochs, patience and n_train_samples must be >= 1");
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return bad("grad_clip must be > 0");
        }
        Ok(())
    }

    /// Parse a JSON document using the field names above; missing fields take defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text).map_err(|e| Error::parse("train config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn trains(&self, variant: Variant, group: ParamGroup) -> bool {
        match (self.mode, variant) {
            (TrainMode::M2Only, _) => group.is_m2(),
            (TrainMode::Full, Variant::Cantm) => true,
            (TrainMode::Full, Variant::Nvdm) => matches!(
                group,
                ParamGroup::Encoder | ParamGroup::M1Inference | ParamGroup::M1Decoder
            ),
        }
    }
}

/// Adam with bias-corrected moments initialized at zero.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: &TrainConfig) -> Self {
        Adam {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.epsilon,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Update every tensor whose group passes `trainable`; others are untouched.
    pub fn step(&mut self, model: &mut CantmModel, grads: &[Vec<f64>], trainable: impl Fn(ParamGroup) -> bool) {
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let mut k = 0;
        model.for_each_param_mut(|group, _, params| {
            if trainable(group) {
                let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
                for i in 0..params.len() {
                    m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                    v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
            k += 1;
        });
    }
}

/// Stops after `patience` consecutive epochs without a strict decrease.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    /// Record the loss of `epoch` (1-based). Returns true when training should stop.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.since_best >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn improved_at(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<LossBreakdown>,
    /// The loss early stopping watches, one per epoch.
    pub monitored: Vec<f64>,
    pub stopped_epoch: usize,
    pub stop_reason: StopReason,
    pub best_epoch: usize,
    /// Model state at `best_epoch`.
    #[serde(skip)]
    pub best_model: Option<Box<CantmModel>>,
}

fn monitored_loss(model: &CantmModel, mode: TrainMode, l: &LossBreakdown) -> f64 {
    match (mode, model.config.variant) {
        (TrainMode::Full, Variant::Cantm) => l.cls,
        _ => l.total,
    }
}

fn clip(grads: &mut [Vec<f64>], max_norm: f64) {
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= k);
    }
}

/// Train until early stopping or `max_epochs`, returning the last-epoch model.
/// Deterministic for a given config seed.
pub fn train(mut model: CantmModel, data: &[Document], config: &TrainConfig) -> Result<(CantmModel, TrainHistory)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training data is empty".into()));
    }
    let variant = model.config.variant;
    if config.mode == TrainMode::Full && variant == Variant::Cantm {
        if let Some(d) = data.iter().find(|d| d.label.is_none()) {
            return Err(Error::Unlabeled(d.id.clone()));
        }
    }
    if config.mode == TrainMode::M2Only && variant != Variant::Cantm {
        return Err(Error::InvalidArgument("m2_only training needs a CANTM model".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let trainable = |g| config.trains(variant, g);
    let mut history = TrainHistory {
        epochs: Vec::new(),
        monitored: Vec::new(),
        stopped_epoch: 0,
        stop_reason: StopReason::MaxEpochs,
        best_epoch: 0,
        best_model: None,
    };

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = LossBreakdown::default();
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Document> = chunk.iter().map(|&i| data[i].clone()).collect();
            let noise = Noise::draw(batch.len(), config.n_train_samples, model.config.d_z, model.config.d_zs, &mut rng);
            let (loss, grads) = model.loss_and_grad(&batch, config.mode, &noise)?;
            if let Some(term) = loss.first_non_finite() {
                return Err(Error::NonFinite { epoch, term });
            }
            let mut flat = Vec::new();
            grads.for_each_param(|_, _, g| flat.push(g.to_vec()));
            if let Some(max_norm) = config.grad_clip {
                clip(&mut flat, max_norm);
            }
            adam.step(&mut model, &flat, trainable);
            let mut weighted = loss;
            weighted *= batch.len() as f64;
            epoch_loss += &weighted;
        }
        epoch_loss *= 1.0 / data.len() as f64;
        let watched = monitored_loss(&model, config.mode, &epoch_loss);
        history.epochs.push(epoch_loss);
        history.monitored.push(watched);
        history.stopped_epoch = epoch;
        let stop = stopper.observe(epoch, watched);
        if stopper.improved_at(epoch) {
            history.best_epoch = epoch;
            history.best_model = Some(Box::new(model.clone()));
        }
        if stop {
            history.stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    Ok((model, history))
}
