use serde::{Deserialize, Serialize};
use std::time::Instant;

use super::loss::{loss_and_grad, physics_loss, LossBreakdown};
use super::{CollocationSet, PdeProblem, PinnError};
use crate::network::{init_params, NetworkParams, NetworkSpec};
use crate::optim::{adam_step, AdamConfig, AdamState};

/// Step decay: the learning rate is multiplied by `factor` every `every`
/// epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrDecay {
    pub factor: f64,
    pub every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub lr_decay: Option<LrDecay>,
    pub divergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            seed: 0,
            adam: AdamConfig::default(),
            lr_decay: None,
            divergence_threshold: 1e6,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) if d.every > 0 => self.adam.lr * d.factor.powi((epoch / d.every) as i32),
            _ => self.adam.lr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub lr: f64,
    pub seconds: f64,
}

/// Loss before each update, plus the loss of the returned parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub final_loss: LossBreakdown,
}

/// Full-batch Adam from a Glorot initialization seeded by `cfg.seed`.
pub fn train(
    problem: &PdeProblem,
    spec: &NetworkSpec,
    colloc: &CollocationSet,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, TrainLog), PinnError> {
    let params = init_params(spec, cfg.seed)?;
    train_from(problem, spec, params, colloc, cfg)
}

/// Full-batch Adam from the given parameters.
pub fn train_from(
    problem: &PdeProblem,
    spec: &NetworkSpec,
    params: NetworkParams,
    colloc: &CollocationSet,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, TrainLog), PinnError> {
    params.check(spec)?;
    let mut tensors = params.tensors();
    let mut state = AdamState::new(&tensors, cfg.adam);
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let current = NetworkParams::from_tensors(tensors.clone());
        let (loss, grads) = loss_and_grad(problem, spec, &current, colloc)?;
        if !loss.total.is_finite() || loss.total > cfg.divergence_threshold {
            log::error!("training diverged at epoch {epoch}: loss {}", loss.total);
            return Err(PinnError::Diverged {
                epoch,
                loss: loss.total,
                log: Box::new(log),
            });
        }
        let lr = cfg.learning_rate(epoch);
        state.config.lr = lr;
        adam_step(&mut tensors, &grads, &mut state)?;
        log.records.push(EpochRecord {
            epoch,
            loss,
            lr,
            seconds: start.elapsed().as_secs_f64(),
        });
        if epoch % 1000 == 0 {
            log::debug!("epoch {epoch}: loss {:.6e}", loss.total);
        }
    }
    let params = NetworkParams::from_tensors(tensors);
    log.final_loss = physics_loss(problem, spec, &params, colloc)?;
    if !log.final_loss.total.is_finite() {
        return Err(PinnError::Diverged {
            epoch: cfg.epochs,
            loss: log.final_loss.total,
            log: Box::new(log),
        });
    }
    Ok((params, log))
}
