use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use super::fit::argmax2;
use super::predict::{evaluate, limit_all, predict_recording};
use super::{train, MinutesLimit, TrainConfig};
use crate::eegdata::Recording;
use crate::error::Result;
use crate::models::{ArchitectureConfig, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepMode {
    TrainOnly,
    TestOnly,
    Both,
}

impl SweepMode {
    pub const ALL: [SweepMode; 3] = [SweepMode::TrainOnly, SweepMode::TestOnly, SweepMode::Both];
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMode::TrainOnly => "train",
            SweepMode::TestOnly => "test",
            SweepMode::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub mode: SweepMode,
    pub train_minutes: MinutesLimit,
    pub test_minutes: MinutesLimit,
    pub crop_accuracy: f64,
    pub trial_accuracy: f64,
}

/// `mode  train_minutes  test_minutes  crop_acc  trial_acc` rows.
pub fn grid_to_tsv(cells: &[GridCell]) -> String {
    let mut s = String::from("mode\ttrain_minutes\ttest_minutes\tcrop_acc\ttrial_acc\n");
    for c in cells {
        s.push_str(&format!(
            "{}\t{}\t{}\t{:.4}\t{:.4}\n",
            c.mode, c.train_minutes, c.test_minutes, c.crop_accuracy, c.trial_accuracy
        ));
    }
    s
}

/// Accuracy when the training data, the test data, or both are cut to each
/// entry of `minutes`. One network is trained per distinct training limit
/// (from `network_seed` each time) and shared by every cell that uses it; the
/// limits in `cfg` are ignored.
pub fn reduced_duration_grid(
    arch: &ArchitectureConfig,
    network_seed: u64,
    train_set: &[Recording],
    eval_set: &[Recording],
    minutes: &[MinutesLimit],
    cfg: &TrainConfig,
) -> Result<Vec<GridCell>> {
    let mut train_limits: Vec<MinutesLimit> = minutes.to_vec();
    train_limits.push(MinutesLimit::All);
    train_limits.sort();
    train_limits.dedup();

    let trained: BTreeMap<MinutesLimit, Network> = train_limits
        .par_iter()
        .map(|&limit| {
            let data = limit_all(train_set, limit)?;
            let mut net = Network::build(arch, network_seed)?;
            train(&mut net, &data, cfg)?;
            Ok((limit, net))
        })
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for mode in SweepMode::ALL {
        for &m in minutes {
            let (tr, te) = match mode {
                SweepMode::TrainOnly => (m, MinutesLimit::All),
                SweepMode::TestOnly => (MinutesLimit::All, m),
                SweepMode::Both => (m, m),
            };
            jobs.push((mode, tr, te));
        }
    }
    jobs.par_iter()
        .map(|&(mode, tr, te)| {
            let test = limit_all(eval_set, te)?;
            let r = evaluate(&trained[&tr], &test, cfg.crop_stride)?;
            Ok(GridCell {
                mode,
                train_minutes: tr,
                test_minutes: te,
                crop_accuracy: r.crop_accuracy(),
                trial_accuracy: r.trial_accuracy(),
            })
        })
        .collect()
}

/// One point of a moving-average accuracy curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub center_s: f64,
    pub accuracy: f64,
    pub recordings: usize,
}

/// Cropwise accuracy in windows of `window_s` centred at `window_s/2 +
/// k·step_s`, first per recording, then averaged over the recordings that
/// span the window. A recording shorter than the window contributes a
/// single point at its midpoint.
pub fn moving_average_accuracy(
    network: &Network,
    eval_set: &[Recording],
    window_s: f64,
    step_s: f64,
    crop_stride: usize,
) -> Result<Vec<CurvePoint>> {
    let per_recording: Vec<Vec<(f64, f64)>> = eval_set
        .par_iter()
        .map_init(
            || network.clone(),
            |net, rec| -> Result<Vec<(f64, f64)>> {
                let p = predict_recording(net, rec, crop_stride)?;
                let y = rec.label.class();
                let fs = rec.sample_rate_hz;
                let hits: Vec<(f64, f64)> = p
                    .crops
                    .iter()
                    .zip(&p.crop_log_probs)
                    .map(|(c, &lp)| (c.center_s(fs), if Some(argmax2(lp)) == y { 1.0 } else { 0.0 }))
                    .collect();
                let duration = rec.duration_s();
                if duration < window_s {
                    let acc = hits.iter().map(|h| h.1).sum::<f64>() / hits.len() as f64;
                    return Ok(vec![(duration / 2.0, acc)]);
                }
                let half = window_s / 2.0;
                let mut out = Vec::new();
                let mut k = 0usize;
                loop {
                    let center = half + k as f64 * step_s;
                    if center + half > duration + 1e-9 {
                        break;
                    }
                    let inside: Vec<f64> =
                        hits.iter().filter(|(t, _)| (t - center).abs() <= half + 1e-9).map(|h| h.1).collect();
                    if !inside.is_empty() {
                        out.push((center, inside.iter().sum::<f64>() / inside.len() as f64));
                    }
                    k += 1;
                }
                Ok(out)
            },
        )
        .collect::<Result<_>>()?;

    let mut acc: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
    for points in per_recording {
        for (center, a) in points {
            let e = acc.entry((center * 1000.0).round() as i64).or_insert((center, 0.0, 0));
            e.1 += a;
            e.2 += 1;
        }
    }
    Ok(acc
        .into_values()
        .map(|(center_s, sum, n)| CurvePoint { center_s, accuracy: sum / n as f64, recordings: n })
        .collect())
}

/// `center_s  accuracy  recordings` rows.
pub fn curve_to_tsv(points: &[CurvePoint]) -> String {
    let mut s = String::from("center_s\taccuracy\trecordings\n");
    for p in points {
        s.push_str(&format!("{:.1}\t{:.4}\t{}\n", p.center_s, p.accuracy, p.recordings));
    }
    s
}
