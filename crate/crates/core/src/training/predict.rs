use rayon::prelude::*;

use super::fit::argmax2;
use super::MinutesLimit;
use crate::eegdata::{crop_batch, generate_crops, Crop, Recording};
use crate::error::{Error, Result};
use crate::models::Network;

const PREDICT_BATCH: usize = 64;

/// Crop-level and aggregated predictions for one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingPrediction {
    pub class: usize,
    pub mean_log_probs: [f64; 2],
    pub crops: Vec<Crop>,
    pub crop_log_probs: Vec<[f64; 2]>,
}

impl RecordingPrediction {
    pub fn crop_classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.crop_log_probs.iter().map(|&lp| argmax2(lp))
    }
}

/// Eval-mode log-probabilities of every crop, averaged per recording.
pub fn predict_recording(network: &mut Network, rec: &Recording, crop_stride: usize) -> Result<RecordingPrediction> {
    let crops = generate_crops(rec, 0, network.input_len(), crop_stride)?;
    let recs = std::slice::from_ref(rec);
    let mut crop_log_probs = Vec::with_capacity(crops.len());
    for chunk in crops.chunks(PREDICT_BATCH) {
        let lp = network.predict_log_probs(&crop_batch(recs, chunk)?)?;
        crop_log_probs.extend(lp.data().chunks(2).map(|r| [r[0], r[1]]));
    }
    let mean_log_probs = mean_pair(&crop_log_probs);
    Ok(RecordingPrediction { class: argmax2(mean_log_probs), mean_log_probs, crops, crop_log_probs })
}

fn mean_pair(rows: &[[f64; 2]]) -> [f64; 2] {
    let n = rows.len() as f64;
    let s = rows.iter().fold([0.0, 0.0], |a, r| [a[0] + r[0], a[1] + r[1]]);
    [s[0] / n, s[1] / n]
}

/// Predictions and true classes for an evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub predictions: Vec<RecordingPrediction>,
    pub labels: Vec<usize>,
}

impl TrialResult {
    pub fn trial_classes(&self) -> Vec<usize> {
        self.predictions.iter().map(|p| p.class).collect()
    }

    /// Per-recording classes recomputed from the stored crop log-probs.
    pub fn recomputed_trial_classes(&self) -> Vec<usize> {
        self.predictions.iter().map(|p| argmax2(mean_pair(&p.crop_log_probs))).collect()
    }

    pub fn trial_accuracy(&self) -> f64 {
        let hits = self.trial_classes().iter().zip(&self.labels).filter(|(a, b)| a == b).count();
        hits as f64 / self.labels.len() as f64
    }

    /// Pairs of (predicted, true) class for every crop.
    pub fn crop_pairs(&self) -> Vec<(usize, usize)> {
        self.predictions.iter().zip(&self.labels).flat_map(|(p, &y)| p.crop_classes().map(move |c| (c, y))).collect()
    }

    pub fn crop_accuracy(&self) -> f64 {
        let pairs = self.crop_pairs();
        pairs.iter().filter(|(a, b)| a == b).count() as f64 / pairs.len() as f64
    }
}

/// Predicts every recording in parallel, each worker on its own copy of the
/// network.
pub fn evaluate(network: &Network, eval_set: &[Recording], crop_stride: usize) -> Result<TrialResult> {
    if eval_set.is_empty() {
        return Err(Error::Data("evaluation set is empty".into()));
    }
    let labels = eval_set
        .iter()
        .map(|r| r.label.class().ok_or_else(|| Error::Data(format!("recording {} has no label", r.subject_id))))
        .collect::<Result<Vec<_>>>()?;
    let predictions = eval_set
        .par_iter()
        .map_init(|| network.clone(), |net, rec| predict_recording(net, rec, crop_stride))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialResult { predictions, labels })
}

/// The first `limit` of a recording, or all of it when shorter.
pub fn limit_recording(rec: &Recording, limit: MinutesLimit) -> Result<Recording> {
    match limit.seconds() {
        Some(s) => {
            let n = ((s * rec.sample_rate_hz).round() as usize).min(rec.n_samples());
            if n == rec.n_samples() {
                Ok(rec.clone())
            } else {
                rec.slice_time(0, n)
            }
        }
        None => Ok(rec.clone()),
    }
}

pub fn limit_all(recordings: &[Recording], limit: MinutesLimit) -> Result<Vec<Recording>> {
    recordings.iter().map(|r| limit_recording(r, limit)).collect()
}
