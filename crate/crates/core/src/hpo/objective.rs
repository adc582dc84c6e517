use std::ops::Range;
use std::time::Instant;

use super::search::Trial;
use super::space::architecture_from_flat;
use crate::eegdata::Recording;
use crate::error::{Error, Result};
use crate::kv::FlatConfig;
use crate::models::{build_from_hpo, ArchitectureConfig, Nonlinearity, PoolKind};
use crate::training::{evaluate, train_until, TrainConfig};

/// `k` contiguous, near-equal index ranges covering `0..n`.
pub fn contiguous_folds(n: usize, k: usize) -> Vec<Range<usize>> {
    (0..k).map(|i| i * n / k..(i + 1) * n / k).collect()
}

/// Cross-validation on the earliest recordings: train on all folds but one,
/// score trial accuracy on the held-out fold.
#[derive(Debug, Clone)]
pub struct ArchitectureObjective {
    pub recordings: Vec<Recording>,
    pub n_folds: usize,
    pub train: TrainConfig,
    pub eval_crop_stride: usize,
    pub network_seed: u64,
    pub time_budget_s: f64,
}

pub const DEFAULT_TIME_BUDGET_S: f64 = 120.0;

impl ArchitectureObjective {
    /// Trial accuracy on `fold`; the time budget covers training and
    /// prediction.
    pub fn evaluate_architecture(&self, arch: &ArchitectureConfig, fold: usize) -> Result<f64> {
        let start = Instant::now();
        let folds = contiguous_folds(self.recordings.len(), self.n_folds);
        let held = folds.get(fold).ok_or_else(|| Error::Config(format!("fold {fold} of {}", self.n_folds)))?.clone();
        if held.is_empty() {
            return Err(Error::Data(format!("fold {fold} is empty")));
        }
        let mut net = build_from_hpo(arch, self.network_seed)?;
        let train_set: Vec<Recording> =
            self.recordings.iter().enumerate().filter(|(i, _)| !held.contains(i)).map(|(_, r)| r.clone()).collect();
        train_until(&mut net, &train_set, &self.train, Some((start, self.time_budget_s)))?;
        let result = evaluate(&net, &self.recordings[held], self.eval_crop_stride)?;
        if start.elapsed().as_secs_f64() > self.time_budget_s {
            return Err(Error::Timeout(self.time_budget_s));
        }
        Ok(result.trial_accuracy())
    }

    /// Objective over points of the architecture search space.
    pub fn evaluate(&self, config: &FlatConfig, fold: usize) -> Result<f64> {
        self.evaluate_architecture(&architecture_from_flat(config)?, fold)
    }
}

/// Differences from the default architecture of the same kind, the input
/// length in seconds and the accuracies.
pub fn describe_incumbent(trial: &Trial, sample_rate_hz: f64, eval_accuracy: Option<f64>) -> Result<String> {
    let arch = architecture_from_flat(&trial.config)?;
    let default = ArchitectureConfig::default_for(arch.kind).to_flat();
    let current = arch.to_flat();
    let mut lines = vec![format!("architecture: {}", arch.kind)];
    for (k, v) in current.iter() {
        let d = default.get(k);
        if d != Some(v) {
            lines.push(format!("  {k}: {} -> {v}", d.unwrap_or("unset")));
        }
    }
    lines.push(format!(
        "input length: {} samples ({:.1} s)",
        arch.input_len_samples,
        arch.input_len_samples as f64 / sample_rate_hz
    ));
    let identity = arch.blocks.iter().all(|b| b.nonlinearity == Nonlinearity::Identity);
    let max_pooled = arch.blocks.iter().any(|b| b.pool == PoolKind::Max && b.pool_len > 1);
    if identity && max_pooled {
        lines.push("only nonlinearity: max pooling".into());
    }
    lines.push(format!("cross-validation accuracy (fold {}): {:.4}", trial.fold, trial.score));
    if let Some(a) = eval_accuracy {
        lines.push(format!("evaluation accuracy: {a:.4}"));
        lines.push(format!("generalization gap: {:+.4}", a - trial.score));
    }
    Ok(lines.join("\n") + "\n")
}
