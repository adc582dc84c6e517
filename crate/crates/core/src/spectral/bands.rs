use rayon::prelude::*;

use super::stft::Stft;
use super::TopoMap;
use crate::eegdata::Recording;
use crate::error::{Error, Result};

/// Half-open frequency range `[lo_hz, hi_hz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSpec {
    pub name: String,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl BandSpec {
    pub fn new(name: &str, lo_hz: f64, hi_hz: f64) -> Self {
        Self { name: name.to_string(), lo_hz, hi_hz }
    }

    pub fn contains(&self, f: f64) -> bool {
        // Bin frequencies are products of a rounded spacing; snap before
        // comparing so that 48 · (100/1200) counts as 4 Hz.
        let f = (f * 1e9).round() / 1e9;
        f >= self.lo_hz && f < self.hi_hz
    }
}

pub fn default_bands() -> Vec<BandSpec> {
    vec![
        BandSpec::new("delta", 0.0, 4.0),
        BandSpec::new("theta", 4.0, 8.0),
        BandSpec::new("alpha", 8.0, 14.0),
        BandSpec::new("low_beta", 14.0, 20.0),
        BandSpec::new("high_beta", 20.0, 30.0),
        BandSpec::new("low_gamma", 30.0, 50.0),
    ]
}

/// A value per (electrode, frequency bin), electrode-major. Non-finite
/// entries mark absent cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeSpectrum {
    pub electrodes: Vec<String>,
    pub n_bins: usize,
    pub bin_hz: f64,
    pub values: Vec<f64>,
}

impl ElectrodeSpectrum {
    pub fn get(&self, electrode: usize, bin: usize) -> f64 {
        self.values[electrode * self.n_bins + bin]
    }

    pub fn row(&self, electrode: usize) -> &[f64] {
        &self.values[electrode * self.n_bins..(electrode + 1) * self.n_bins]
    }

    pub fn electrode_index(&self, name: &str) -> Option<usize> {
        self.electrodes.iter().position(|e| e.eq_ignore_ascii_case(name))
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.bin_hz * (self.n_bins - 1) as f64
    }

    fn check_matches(&self, other: &Self) -> Result<()> {
        if self.electrodes != other.electrodes {
            return Err(Error::Electrode(format!("{:?} vs {:?}", self.electrodes, other.electrodes)));
        }
        if self.n_bins != other.n_bins || self.bin_hz != other.bin_hz {
            return Err(Error::dim("spectra differ in frequency bins"));
        }
        Ok(())
    }
}

/// Median of `values`; the mean of the two central values for even counts.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let n = values.len();
    let cmp = |a: &f64, b: &f64| a.total_cmp(b);
    let (_, &mut hi, _) = values.select_nth_unstable_by(n / 2, cmp);
    if n % 2 == 1 {
        return hi;
    }
    let lo = values[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo + hi) / 2.0
}

/// Median power over every window of every recording, per electrode and bin.
pub fn median_bandpower(recordings: &[&Recording], stft: &Stft) -> Result<ElectrodeSpectrum> {
    let first = recordings.first().ok_or(Error::EmptyInput("median_bandpower needs recordings"))?;
    for r in recordings {
        if r.electrode_labels != first.electrode_labels {
            return Err(Error::Electrode(format!(
                "recording {} has electrodes {:?}, expected {:?}",
                r.subject_id, r.electrode_labels, first.electrode_labels
            )));
        }
        if r.sample_rate_hz != first.sample_rate_hz {
            return Err(Error::Data(format!("mixed sample rates {} and {}", r.sample_rate_hz, first.sample_rate_hz)));
        }
    }
    let n_bins = stft.n_bins();
    let rows: Vec<Vec<f64>> = (0..first.n_electrodes())
        .into_par_iter()
        .map(|e| {
            let specs = recordings
                .iter()
                .map(|r| stft.process(&r.channel(e).iter().map(|&v| v as f64).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            let total: usize = specs.iter().map(|s| s.n_windows).sum();
            let mut column = vec![0.0; total];
            Ok((0..n_bins)
                .map(|b| {
                    let mut k = 0;
                    for s in &specs {
                        for w in 0..s.n_windows {
                            column[k] = s.power[w * n_bins + b];
                            k += 1;
                        }
                    }
                    median(&mut column)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(ElectrodeSpectrum {
        electrodes: first.electrode_labels.clone(),
        n_bins,
        bin_hz: stft.bin_hz(),
        values: rows.concat(),
    })
}

pub const RATIO_FLOOR: f64 = 1e-20;

/// `ln(pathological / normal)` per cell, both floored at [`RATIO_FLOOR`];
/// also returns how many cells needed the floor.
pub fn class_log_ratio(
    pathological: &ElectrodeSpectrum,
    normal: &ElectrodeSpectrum,
) -> Result<(ElectrodeSpectrum, usize)> {
    pathological.check_matches(normal)?;
    let mut floored = 0;
    let values = pathological
        .values
        .iter()
        .zip(&normal.values)
        .map(|(&p, &n)| {
            if p < RATIO_FLOOR || n < RATIO_FLOOR {
                floored += 1;
            }
            p.max(RATIO_FLOOR).ln() - n.max(RATIO_FLOOR).ln()
        })
        .collect();
    Ok((ElectrodeSpectrum { values, ..pathological.clone() }, floored))
}

/// Mean over the bins of each band, per electrode, skipping absent cells.
pub fn band_aggregate(grid: &ElectrodeSpectrum, bands: &[BandSpec]) -> Result<Vec<TopoMap>> {
    let nyquist = grid.nyquist_hz();
    bands
        .iter()
        .map(|band| {
            if band.lo_hz >= nyquist || band.lo_hz >= band.hi_hz {
                return Err(Error::Band { name: band.name.clone(), lo: band.lo_hz, hi: band.hi_hz, nyquist });
            }
            let bins = band_bins(band, grid.n_bins, grid.bin_hz);
            if bins.is_empty() {
                return Err(Error::Band { name: band.name.clone(), lo: band.lo_hz, hi: band.hi_hz, nyquist });
            }
            let values = (0..grid.electrodes.len())
                .map(|e| {
                    let (sum, n) = bins
                        .iter()
                        .map(|&b| grid.get(e, b))
                        .filter(|v| v.is_finite())
                        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                    if n == 0 {
                        f64::NAN
                    } else {
                        sum / n as f64
                    }
                })
                .collect();
            Ok(TopoMap { band: band.name.clone(), electrodes: grid.electrodes.clone(), values })
        })
        .collect()
}

/// Bin indices of `band` for a spectrum with the given spacing.
pub fn band_bins(band: &BandSpec, n_bins: usize, bin_hz: f64) -> Vec<usize> {
    (0..n_bins).filter(|&b| band.contains(b as f64 * bin_hz)).collect()
}
