//! Class-contrast spectral analysis: STFT power, class medians, log ratios,
//! band maps and their scalp rendering.

mod bands;
mod stft;
pub(crate) mod topo;

pub use bands::{
    band_aggregate, band_bins, class_log_ratio, default_bands, median, median_bandpower, BandSpec, ElectrodeSpectrum,
    RATIO_FLOOR,
};
pub use stft::{blackman_harris, stft, Spectrogram, Stft};
pub use topo::{diverging_color, electrode_position, render_topomap, topomaps_to_tsv, TopoMap};

use crate::eegdata::{Label, Recording};
use crate::error::{Error, Result};

pub const WINDOW_S: f64 = 12.0;
pub const OVERLAP_S: f64 = 6.0;

/// Output of [`class_contrast`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassContrast {
    pub log_ratio: ElectrodeSpectrum,
    /// Cells whose medians were raised to [`RATIO_FLOOR`].
    pub floored_cells: usize,
    pub maps: Vec<TopoMap>,
}

/// Splits labelled recordings by class, takes per-class median power, the
/// pathological/normal log ratio and its band means.
pub fn class_contrast(recordings: &[Recording], bands: &[BandSpec]) -> Result<ClassContrast> {
    let first = recordings.first().ok_or(Error::EmptyInput("class_contrast needs recordings"))?;
    let stft = Stft::new(first.sample_rate_hz, WINDOW_S, OVERLAP_S)?;
    let of = |l: Label| recordings.iter().filter(|r| r.label == l).collect::<Vec<_>>();
    let (path, normal) = (of(Label::Pathological), of(Label::Normal));
    if path.is_empty() || normal.is_empty() {
        return Err(Error::Data("both classes need at least one recording".into()));
    }
    let pm = median_bandpower(&path, &stft)?;
    let nm = median_bandpower(&normal, &stft)?;
    let (log_ratio, floored_cells) = class_log_ratio(&pm, &nm)?;
    let maps = band_aggregate(&log_ratio, bands)?;
    Ok(ClassContrast { log_ratio, floored_cells, maps })
}

#[cfg(test)]
mod tests;
