use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dropnet::DropNet;
use crate::error::{Error, Result};
use crate::synthdrip::{mix_seed, SampleSource};
use crate::tensor_nn::{Mode, Sgd, Tensor4};

use super::eval::{evaluate_grids, load_batch, predict};
use super::{grid_loss, grid_loss_grad, LossKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub split_ratio: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub schedule: Schedule,
}

/// Learning-rate schedule over the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Constant,
    /// Half-cosine from `lr` at the first step down to zero after the last.
    Cosine,
}

impl Schedule {
    /// Learning rate for `step` out of `total` steps.
    pub fn rate(self, lr: f64, step: usize, total: usize) -> f64 {
        match self {
            Schedule::Constant => lr,
            Schedule::Cosine => {
                let frac = step as f64 / total.max(1) as f64;
                0.5 * lr * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            lr: 0.01,
            momentum: 0.9,
            split_ratio: 0.8,
            seed: 0,
            loss: LossKind::Bce,
            schedule: Schedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!("split_ratio must be in (0, 1), got {}", self.split_ratio)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("bad lr {} / momentum {}", self.lr, self.momentum)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_state_acc: f64,
    pub val_cell_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
}

/// Seeded permutation cut at `round(n·ratio)`, keeping both sides nonempty.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::EmptyDataset);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5911)));
    let cut = ((n as f64 * ratio).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(cut);
    Ok((idx, val))
}

/// Minibatch momentum SGD. Returns the network from the epoch with the
/// lowest validation loss, in inference mode.
pub fn train(mut net: DropNet, source: &dyn SampleSource, cfg: &TrainConfig) -> Result<(DropNet, TrainHistory)> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut train_idx, val_idx) = split_indices(source.len(), cfg.split_ratio, cfg.seed)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 2));
    let mut opt = Sgd::new(&net.network, cfg.lr, cfg.momentum)?;
    let grid = net.grid_size();
    let exec = net.network.exec;
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, DropNet)> = None;
    let total_steps = cfg.epochs * train_idx.len().div_ceil(cfg.batch_size);
    let mut step = 0;

    for epoch in 1..=cfg.epochs {
        net.set_mode(Mode::Train);
        train_idx.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            let (x, labels) = load_batch(source, chunk, grid, exec)?;
            let (y, cache) = net.network.forward(&x, Mode::Train, &mut dropout_rng)?;
            let scale = 1.0 / chunk.len() as f64;
            let mut upstream = Vec::with_capacity(y.data().len());
            for (b, label) in labels.iter().enumerate() {
                let target = label.values();
                let l = grid_loss(&target, y.sample(b), cfg.loss)?;
                if !l.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite loss in epoch {epoch}; lower the learning rate (lr = {})",
                        cfg.lr
                    )));
                }
                total += l;
                upstream.extend(grid_loss_grad(&target, y.sample(b), cfg.loss, scale)?);
            }
            let upstream = Tensor4::from_vec(y.dims(), upstream)?;
            let grads = net.network.backward(&cache, &upstream)?;
            if grads.flat().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite gradient in epoch {epoch}; lower the learning rate (lr = {})",
                    cfg.lr
                )));
            }
            opt.lr = cfg.schedule.rate(cfg.lr, step, total_steps);
            opt.step(&mut net.network, &grads)?;
            step += 1;
        }
        net.set_mode(Mode::Infer);
        let (grids, labels) = predict(&net, source, &val_idx)?;
        let m = evaluate_grids(&grids, &labels)?;
        let record = EpochRecord {
            epoch,
            train_loss: total / train_idx.len() as f64,
            val_loss: m.mean_loss,
            val_state_acc: m.state_accuracy,
            val_cell_acc: m.cell_accuracy,
        };
        log::info!(
            "epoch {epoch}: train loss {:.4}, val loss {:.4}, val state acc {:.4}, val cell acc {:.4}",
            record.train_loss,
            record.val_loss,
            record.val_state_acc,
            record.val_cell_acc
        );
        if !record.val_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite validation loss in epoch {epoch}")));
        }
        history.epochs.push(record);
        if best.as_ref().is_none_or(|(l, _)| record.val_loss < *l) {
            history.best_epoch = epoch;
            best = Some((record.val_loss, net.clone()));
        }
    }
    let (_, net) = best.expect("at least one epoch ran");
    Ok((net, history))
}

/// `epoch,train_loss,val_loss,val_state_acc`, one row per epoch.
pub fn write_history(path: impl AsRef<Path>, history: &TrainHistory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,train_loss,val_loss,val_state_acc")?;
    for r in &history.epochs {
        writeln!(w, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.val_state_acc)?;
    }
    w.flush()?;
    Ok(())
}
