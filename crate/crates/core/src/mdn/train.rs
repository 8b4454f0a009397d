use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::backprop::{batch_gradients, Workspace};
use super::{Gradients, MdnModel, NetworkConfig, Optimizer, OptimizerState, Standardizer};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub sd_floor: f64,
}

impl TrainConfig {
    /// Adam at 1e-3, batch 32, 500 epochs.
    pub fn new(seed: u64) -> Self {
        Self {
            epochs: 500,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            seed,
            sd_floor: MdnModel::DEFAULT_SD_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.sd_floor > 0.0 && self.sd_floor.is_finite()) {
            return Err(Error::InvalidInput(format!("sd_floor must be positive, got {}", self.sd_floor)));
        }
        Ok(())
    }
}

/// Full-training-set loss (dropout off) before training and after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub initial_loss: f64,
    pub epoch_loss: Vec<f64>,
}

impl TrainLog {
    pub fn final_loss(&self) -> f64 {
        self.epoch_loss.last().copied().unwrap_or(self.initial_loss)
    }
}

pub fn train(data: &Dataset, nc: &NetworkConfig, tc: &TrainConfig) -> Result<MdnModel> {
    train_logged(data, nc, tc).map(|(m, _)| m)
}

/// Random streams: `derive_seed(seed, 0)` initializes weights,
/// `derive_seed(seed, 1)` drives shuffling and dropout masks.
pub fn train_logged(data: &Dataset, nc: &NetworkConfig, tc: &TrainConfig) -> Result<(MdnModel, TrainLog)> {
    nc.validate()?;
    tc.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("training dataset is empty".into()));
    }
    if nc.input_dim != data.n_features() {
        return Err(Error::Dimension {
            expected: nc.input_dim,
            got: data.n_features(),
            context: "network input_dim vs dataset features",
        });
    }

    let mut init_rng = rng::stream(rng::derive_seed(tc.seed, 0));
    let mut run_rng = rng::stream(rng::derive_seed(tc.seed, 1));

    let mut model = MdnModel::init(nc.clone(), tc.sd_floor, &mut init_rng)?;
    model.set_standardizer(Standardizer::fit(data.features(), data.n_features()))?;
    init_heads_from_response(&mut model, data.response());

    let features = data.features();
    let y = data.response();
    let all: Vec<usize> = (0..data.len()).collect();
    let mut ws = Workspace::default();
    let mut grads = Gradients::zeros_like(&model);
    let mut opt = OptimizerState::new(tc.optimizer, &model);

    let full_loss = |m: &MdnModel, ws: &mut Workspace, g: &mut Gradients| {
        batch_gradients(m, features, y, &all, None, ws, g)
    };
    let initial_loss = full_loss(&model, &mut ws, &mut grads);
    if !initial_loss.is_finite() {
        return Err(Error::NonFinite { epoch: 0, batch: 0 });
    }

    let mut order = all.clone();
    let mut epoch_loss = Vec::with_capacity(tc.epochs);
    for epoch in 1..=tc.epochs {
        order.shuffle(&mut run_rng);
        for (b, rows) in order.chunks(tc.batch_size).enumerate() {
            let loss = batch_gradients(&model, features, y, rows, Some(&mut run_rng), &mut ws, &mut grads);
            if !loss.is_finite() || !grads.norm().is_finite() {
                return Err(Error::NonFinite { epoch, batch: b + 1 });
            }
            opt.step(&mut model, &grads, tc.learning_rate);
        }
        let l = full_loss(&model, &mut ws, &mut grads);
        if !l.is_finite() {
            return Err(Error::NonFinite { epoch, batch: 0 });
        }
        epoch_loss.push(l);
    }
    Ok((model, TrainLog { initial_loss, epoch_loss }))
}

/// Start every mean-head bias at the response mean and the scale-head
/// biases at the log response spread. Components begin nearly coincident;
/// the random head weights break the symmetry.
fn init_heads_from_response(model: &mut MdnModel, y: &[f64]) {
    let k = model.k();
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    let floor = model.sd_floor();
    model.head_mut(0).bias.iter_mut().for_each(|b| *b = mean);
    let scale_bias = (sd / k as f64 - floor).max(floor).ln();
    model.head_mut(1).bias.iter_mut().for_each(|b| *b = scale_bias);
}
