use super::Recording;
use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// A window `[start, start + len)` of one recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Crop {
    pub recording_index: usize,
    pub start_sample: usize,
    pub length_samples: usize,
}

impl Crop {
    pub fn end(&self) -> usize {
        self.start_sample + self.length_samples
    }

    pub fn center_s(&self, sample_rate_hz: f64) -> f64 {
        (self.start_sample as f64 + self.length_samples as f64 / 2.0) / sample_rate_hz
    }
}

/// Start offsets `0, stride, 2·stride, …` plus one window ending at the last
/// sample.
pub fn crop_starts(n_samples: usize, crop_len: usize, stride: usize) -> Result<Vec<usize>> {
    if crop_len == 0 || stride == 0 {
        return Err(Error::Config("crop length and stride must be positive".into()));
    }
    if crop_len > n_samples {
        return Err(Error::TooShort(format!("{n_samples} samples cannot hold a {crop_len}-sample crop")));
    }
    let last = n_samples - crop_len;
    let mut starts: Vec<usize> = (0..=last).step_by(stride).collect();
    if starts.last() != Some(&last) {
        starts.push(last);
    }
    Ok(starts)
}

pub fn generate_crops(rec: &Recording, recording_index: usize, crop_len: usize, stride: usize) -> Result<Vec<Crop>> {
    Ok(crop_starts(rec.n_samples(), crop_len, stride)?
        .into_iter()
        .map(|start_sample| Crop { recording_index, start_sample, length_samples: crop_len })
        .collect())
}

/// Stacks crops into a `[crops, 1, electrodes, len]` batch.
pub fn crop_batch(recordings: &[Recording], crops: &[Crop]) -> Result<Tensor> {
    let first = crops.first().ok_or(Error::EmptyInput("crop batch"))?;
    let len = first.length_samples;
    let e = recordings[first.recording_index].n_electrodes();
    let mut data = Vec::with_capacity(crops.len() * e * len);
    for c in crops {
        let rec = &recordings[c.recording_index];
        if c.length_samples != len || rec.n_electrodes() != e {
            return Err(Error::dim("crops in one batch must share length and electrode count"));
        }
        if c.end() > rec.n_samples() {
            return Err(Error::TooShort(format!("crop ends at {} past {} samples", c.end(), rec.n_samples())));
        }
        for row in rec.rows() {
            data.extend(row[c.start_sample..c.end()].iter().map(|&v| v as f64));
        }
    }
    Tensor::new(vec![crops.len(), 1, e, len], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_crop_when_lengths_match() {
        assert_eq!(crop_starts(600, 600, 60).unwrap(), [0]);
    }

    #[test]
    fn stride_equal_to_crop_tiles() {
        assert_eq!(crop_starts(1200, 600, 600).unwrap(), [0, 600]);
    }

    #[test]
    fn final_crop_is_appended() {
        let s = crop_starts(1000, 600, 60).unwrap();
        assert_eq!(s, [0, 60, 120, 180, 240, 300, 360, 400]);
    }

    #[test]
    fn too_long_crop_is_rejected() {
        assert!(matches!(crop_starts(599, 600, 1), Err(Error::TooShort(_))));
    }
}
