use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainConfig;
use crate::eegdata::{crop_batch, generate_crops, Crop, Recording};
use crate::error::{Error, Result};
use crate::models::Network;
use crate::numcore::{adam_step, Mode, Tape, Tensor};

/// Statistics of one pass over the training crops, measured on the
/// train-mode outputs seen during the pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub crop_accuracy: f64,
    pub trial_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// `epoch  loss  crop_acc  trial_acc` rows.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\tloss\tcrop_acc\ttrial_acc\n");
        for e in &self.epochs {
            s.push_str(&format!("{}\t{:.6}\t{:.4}\t{:.4}\n", e.epoch, e.loss, e.crop_accuracy, e.trial_accuracy));
        }
        s
    }
}

/// Class of a two-way score pair; ties go to class 0.
pub fn argmax2(scores: [f64; 2]) -> usize {
    usize::from(scores[1] > scores[0])
}

/// Every crop of every labelled recording, with its class.
pub(crate) fn labelled_crops(recordings: &[Recording], crop_len: usize, stride: usize) -> Result<Vec<(Crop, usize)>> {
    let mut out = Vec::new();
    for (i, rec) in recordings.iter().enumerate() {
        let class =
            rec.label.class().ok_or_else(|| Error::Data(format!("recording {} has no label", rec.subject_id)))?;
        out.extend(generate_crops(rec, i, crop_len, stride)?.into_iter().map(|c| (c, class)));
    }
    Ok(out)
}

/// Minibatch Adam on shuffled crops of `train_set`. The network's dropout
/// generator and the crop order are both derived from `cfg.seed`.
pub fn train(network: &mut Network, train_set: &[Recording], cfg: &TrainConfig) -> Result<TrainLog> {
    train_until(network, train_set, cfg, None)
}

/// [`train`] that gives up with a timeout error once `deadline` has passed,
/// checked after every batch.
pub fn train_until(
    network: &mut Network,
    train_set: &[Recording],
    cfg: &TrainConfig,
    deadline: Option<(Instant, f64)>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut crops = labelled_crops(train_set, network.input_len(), cfg.crop_stride)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    network.reseed(cfg.seed ^ 0x5eed_d20b);
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        crops.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut sums = vec![[0.0f64; 2]; train_set.len()];
        for chunk in crops.chunks(cfg.batch_size) {
            let (batch_crops, labels): (Vec<Crop>, Vec<usize>) = chunk.iter().copied().unzip();
            let x = crop_batch(train_set, &batch_crops)?;
            let (value, probs) = step(network, x, &labels, cfg).map_err(|e| match e {
                Error::NonFinite(_) => Error::Divergence { epoch },
                other => other,
            })?;
            if !value.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            for (i, (c, &y)) in batch_crops.iter().zip(&labels).enumerate() {
                let pair = [probs[2 * i], probs[2 * i + 1]];
                correct += usize::from(argmax2(pair) == y);
                sums[c.recording_index][0] += pair[0];
                sums[c.recording_index][1] += pair[1];
            }
            loss_sum += value * chunk.len() as f64;
            if let Some((start, budget_s)) = deadline {
                if start.elapsed().as_secs_f64() > budget_s {
                    return Err(Error::Timeout(budget_s));
                }
            }
        }
        let trial_correct = train_set.iter().zip(&sums).filter(|(r, s)| r.label.class() == Some(argmax2(**s))).count();
        log.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / crops.len() as f64,
            crop_accuracy: correct as f64 / crops.len() as f64,
            trial_accuracy: trial_correct as f64 / train_set.len() as f64,
        });
    }
    Ok(log)
}

/// One forward/backward/update; returns the batch loss and log-probabilities.
/// A non-finite loss skips the update.
fn step(network: &mut Network, x: Tensor, labels: &[usize], cfg: &TrainConfig) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let xi = tape.input(x);
    let lp = network.forward(&mut tape, xi, Mode::Train)?;
    let loss = tape.nll_loss(lp, labels)?;
    let value = tape.value(loss).item();
    let probs = tape.value(lp).data().to_vec();
    if value.is_finite() {
        tape.backward(loss, &mut network.params)?;
        adam_step(&mut network.params, &cfg.adam);
    }
    Ok((value, probs))
}
