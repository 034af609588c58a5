//! Deterministic mini-batch training with scheduled orthogonality penalties.
//!
//! Each epoch reads λ and λ₂ from the [`ScheduleConfig`], shuffles the
//! training set with a seeded stream, and runs SGD with classical momentum:
//!
//! ```text
//! v ← μ v + g
//! θ ← θ − η v
//! ```
//!
//! The objective is the mean softmax cross-entropy plus `λ₂ Σ ‖W‖²_F` over
//! all weight tensors plus the chosen regularizer over the regularized
//! layers. Biases are never penalized.

mod init;
mod model;
mod record;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::RngCore;
use thiserror::Error;

pub use init::{init_orthogonal, init_weight, Init};
pub use model::{argmax_rows, ForwardPass, Layer, LayerSpec, Network, Objective, ParamGrad, Shape3};
pub use record::{EpochRecord, LayerStats, TrainRecord};

use crate::analysis::mutual_coherence;
use crate::data::Dataset;
use crate::linalg::{gram, norm2, random_unit_vector, sym_spectral_norm, LinalgError};
use crate::regularizers::{srip_power, RegError, RegKind, RegOptions, SripMode};
use crate::rng;
use crate::schedule::{Breakpoint, ScheduleConfig, ScheduleError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite loss at epoch {epoch}, step {step} (loss = {loss})")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        loss: f64,
        /// Epochs completed before the failure.
        record: Box<TrainRecord>,
    },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Regularizer(#[from] RegError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub lr_init: f64,
    pub lr_breakpoints: Vec<Breakpoint>,
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr_init: 0.05,
            lr_breakpoints: vec![Breakpoint {
                epoch: 100,
                value: 0.005,
            }],
            momentum: 0.9,
        }
    }
}

impl OptimizerConfig {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        crate::schedule::piecewise(self.lr_init, &self.lr_breakpoints, epoch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub input_shape: Shape3,
    pub layers: Vec<LayerSpec>,
    pub reg_kind: RegKind,
    pub srip_mode: SripMode,
    pub power_iters: usize,
    /// Reuse each layer's last power-iteration direction as the next start.
    pub warm_start: bool,
    pub mc_off_diagonal_only: bool,
    /// Penalize the final weight layer as well.
    pub include_classifier: bool,
    pub schedule: ScheduleConfig,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Worker threads for per-layer regularizer evaluation; 1 runs inline.
    pub threads: usize,
}

impl TrainConfig {
    /// `inputs → hidden → classes` perceptron with a ReLU.
    pub fn mlp(inputs: usize, hidden: usize, classes: usize, init: Init) -> Self {
        Self {
            input_shape: Shape3::flat(inputs),
            layers: vec![
                LayerSpec::Dense {
                    inputs,
                    outputs: hidden,
                    init,
                },
                LayerSpec::Relu,
                LayerSpec::Dense {
                    inputs: hidden,
                    outputs: classes,
                    init,
                },
                LayerSpec::SoftmaxXent,
            ],
            reg_kind: RegKind::None,
            srip_mode: SripMode::Power,
            power_iters: crate::linalg::DEFAULT_POWER_ITERS,
            warm_start: false,
            mc_off_diagonal_only: false,
            include_classifier: true,
            schedule: ScheduleConfig::default(),
            optimizer: OptimizerConfig::default(),
            epochs: 150,
            batch_size: 32,
            seed: 0,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.power_iters == 0 {
            return bad("power_iters must be at least 1");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if !(self.optimizer.momentum >= 0.0 && self.optimizer.momentum < 1.0) {
            return bad("momentum must be in [0, 1)");
        }
        let lr_ok = |v: f64| v.is_finite() && v > 0.0;
        if !lr_ok(self.optimizer.lr_init) || !self.optimizer.lr_breakpoints.iter().all(|b| lr_ok(b.value)) {
            return bad("learning rates must be positive");
        }
        self.schedule.validate()?;
        Ok(())
    }

    fn objective(&self, epoch: usize) -> Objective {
        Objective {
            reg: self.reg_kind,
            lambda: self.schedule.lambda_at(epoch),
            weight_decay: self.schedule.weight_decay_at(self.reg_kind, epoch),
            opts: RegOptions {
                srip_mode: self.srip_mode,
                power_iters: self.power_iters,
                seed: 0,
                mc_off_diagonal_only: self.mc_off_diagonal_only,
            },
            include_classifier: self.include_classifier,
            power_starts: Vec::new(),
        }
    }
}

pub struct TrainOutcome {
    pub record: TrainRecord,
    pub network: Network,
}

fn accuracy(net: &Network, ds: &Dataset) -> Result<f64, TrainError> {
    let logits = net.predict(&ds.features)?;
    let hits = argmax_rows(&logits)
        .iter()
        .zip(&ds.labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / ds.len() as f64)
}

/// Orthogonality statistics for every weight layer of `net`.
pub fn layer_stats(net: &Network, power_iters: usize, seed: u64) -> Result<Vec<LayerStats>, TrainError> {
    net.weight_layers()
        .iter()
        .enumerate()
        .map(|(slot, &i)| {
            let w = net.layers[i].weight_matrix().unwrap();
            let sigma = sym_spectral_norm(&gram(&w).minus_identity()?)?;
            let start = random_unit_vector(w.cols(), seed.wrapping_add(slot as u64));
            let (_, est) = srip_power(&w, 1.0, power_iters, &start)?;
            let coherence = mutual_coherence(&w).unwrap_or(f64::NAN);
            let norms: Vec<f64> = (0..w.cols()).map(|j| norm2(&w.col(j))).collect();
            let mean = norms.iter().sum::<f64>() / norms.len() as f64;
            let var = norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / norms.len() as f64;
            Ok(LayerStats {
                layer: i,
                sigma,
                sigma_power: est.sigma,
                coherence,
                col_norm_mean: mean,
                col_norm_std: var.sqrt(),
            })
        })
        .collect()
}

pub fn train(cfg: &TrainConfig, train_set: &Dataset, val_set: &Dataset) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::InvalidConfig("training set is empty".into()));
    }
    if val_set.is_empty() {
        return Err(TrainError::InvalidConfig("validation set is empty".into()));
    }
    let mut net = Network::build(cfg.input_shape, &cfg.layers, cfg.seed)?;
    if net.num_outputs != train_set.num_classes.max(val_set.num_classes) {
        return Err(TrainError::ShapeMismatch(format!(
            "model has {} outputs for {} classes",
            net.num_outputs, train_set.num_classes
        )));
    }
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| TrainError::InvalidConfig(e.to_string()))?,
        )
    } else {
        None
    };

    let mut shuffle_rng = rng::stream(cfg.seed, 11);
    let mut power_rng = rng::stream(cfg.seed, 12);
    let mut stats_rng = rng::stream(cfg.seed, 13);
    let mut velocity: Vec<Vec<f64>> = net.params_mut().iter().map(|p| vec![0.0; p.len()]).collect();
    let reg_layers = net.regularized_layers(cfg.include_classifier);
    let mut warm: Vec<Vec<f64>> = Vec::new();
    let mut record = TrainRecord::new(net.weight_layers());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut obj = cfg.objective(epoch);
        let lr = cfg.optimizer.lr_at(epoch);
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let xb = train_set.subset(batch);
            obj.opts.seed = power_rng.next_u64();
            obj.power_starts = if cfg.warm_start { warm.clone() } else { Vec::new() };
            let pass = net.forward(&obj, &xb.features, &xb.labels, pool.as_ref())?;
            if !pass.loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    step,
                    loss: pass.loss,
                    record: Box::new(record),
                });
            }
            if cfg.warm_start && !pass.power_estimates.is_empty() {
                warm = reg_layers
                    .iter()
                    .map(|l| {
                        pass.power_estimates
                            .iter()
                            .find(|(i, _)| i == l)
                            .map(|(_, e)| e.direction.clone())
                            .unwrap_or_default()
                    })
                    .collect();
            }
            loss_sum += pass.loss * batch.len() as f64;
            hits += argmax_rows(&pass.logits)
                .iter()
                .zip(&xb.labels)
                .filter(|(p, l)| p == l)
                .count();

            let grads = net.backward(&obj, &pass);
            let flat = ParamGrad::buffers(&grads);
            let momentum = cfg.optimizer.momentum;
            for ((param, vel), grad) in net.params_mut().into_iter().zip(&mut velocity).zip(flat) {
                for ((p, v), g) in param.iter_mut().zip(vel.iter_mut()).zip(grad) {
                    *v = momentum * *v + g;
                    *p -= lr * *v;
                }
            }
            step += 1;
        }

        let layers = layer_stats(&net, cfg.power_iters, stats_rng.next_u64())?;
        record.epochs.push(EpochRecord {
            epoch,
            lambda: obj.lambda,
            weight_decay: obj.weight_decay,
            learning_rate: lr,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: hits as f64 / train_set.len() as f64,
            val_accuracy: accuracy(&net, val_set)?,
            layers,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutcome { record, network: net })
}
