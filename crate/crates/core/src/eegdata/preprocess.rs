use rayon::prelude::*;

use super::resample::resample;
use super::{Recording, STANDARD_ELECTRODES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub electrode_subset: Vec<String>,
    pub skip_head_seconds: f64,
    pub max_keep_seconds: f64,
    pub clip_uv: f64,
    pub target_rate_hz: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            electrode_subset: STANDARD_ELECTRODES.iter().map(|s| s.to_string()).collect(),
            skip_head_seconds: 60.0,
            max_keep_seconds: 1200.0,
            clip_uv: 800.0,
            target_rate_hz: 100.0,
        }
    }
}

pub fn clip(x: f64, limit: f64) -> f64 {
    x.clamp(-limit, limit)
}

/// Electrode selection, head removal, duration cap, amplitude clipping and
/// resampling, in that order.
pub fn preprocess(rec: &Recording, cfg: &PreprocessConfig) -> Result<Recording> {
    let rows: Vec<usize> = cfg
        .electrode_subset
        .iter()
        .map(|name| rec.electrode_index(name).ok_or_else(|| Error::Electrode(name.clone())))
        .collect::<Result<_>>()?;
    if rec.duration_s() <= cfg.skip_head_seconds {
        return Err(Error::TooShort(format!(
            "{:.1} s recording does not outlast the {:.0} s head",
            rec.duration_s(),
            cfg.skip_head_seconds
        )));
    }
    let fs = rec.sample_rate_hz;
    let start = (cfg.skip_head_seconds * fs).round() as usize;
    let keep = (cfg.max_keep_seconds * fs).round() as usize;
    let end = rec.n_samples().min(start.saturating_add(keep));
    let out: Vec<Vec<f32>> = rows
        .par_iter()
        .map(|&e| {
            let x: Vec<f64> = rec.channel(e)[start..end].iter().map(|&v| clip(v as f64, cfg.clip_uv)).collect();
            resample(&x, fs, cfg.target_rate_hz).into_iter().map(|v| v as f32).collect()
        })
        .collect();
    Recording::from_rows(
        cfg.electrode_subset.clone(),
        cfg.target_rate_hz,
        &out,
        rec.label,
        rec.report_text.clone(),
        rec.subject_id.clone(),
    )
}
