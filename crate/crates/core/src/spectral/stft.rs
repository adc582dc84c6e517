use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const BH: [f64; 4] = [0.35875, 0.48829, 0.14128, 0.01168];

/// Periodic 4-term Blackman-Harris window of length `n`.
pub fn blackman_harris(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = 2.0 * PI * i as f64 / n as f64;
            BH[0] - BH[1] * x.cos() + BH[2] * (2.0 * x).cos() - BH[3] * (3.0 * x).cos()
        })
        .collect()
}

/// One-sided power spectra of consecutive windows, `|X_k|² / Σw²` for bins
/// `0..=n/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_windows: usize,
    pub n_bins: usize,
    pub bin_hz: f64,
    pub power: Vec<f64>,
}

impl Spectrogram {
    pub fn row(&self, w: usize) -> &[f64] {
        &self.power[w * self.n_bins..(w + 1) * self.n_bins]
    }

    pub fn freq(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }
}

/// Reusable plan for windows of a fixed length.
pub struct Stft {
    len: usize,
    hop: usize,
    window: Vec<f64>,
    window_energy: f64,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    bin_hz: f64,
}

impl Stft {
    pub fn new(sample_rate_hz: f64, window_s: f64, overlap_s: f64) -> Result<Self> {
        let len = (window_s * sample_rate_hz).round() as usize;
        let overlap = (overlap_s * sample_rate_hz).round() as usize;
        if len < 2 || overlap >= len {
            return Err(Error::Config(format!("window of {len} samples with {overlap} overlap")));
        }
        let window = blackman_harris(len);
        let window_energy = window.iter().map(|w| w * w).sum();
        Ok(Self {
            len,
            hop: len - overlap,
            window,
            window_energy,
            fft: FftPlanner::new().plan_fft_forward(len),
            bin_hz: sample_rate_hz / len as f64,
        })
    }

    pub fn window_len(&self) -> usize {
        self.len
    }

    pub fn n_bins(&self) -> usize {
        self.len / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    /// Trailing samples that do not fill a window are dropped.
    pub fn process(&self, signal: &[f64]) -> Result<Spectrogram> {
        if signal.len() < self.len {
            return Err(Error::TooShort(format!(
                "{} samples are shorter than one {}-sample window",
                signal.len(),
                self.len
            )));
        }
        let n_windows = (signal.len() - self.len) / self.hop + 1;
        let n_bins = self.n_bins();
        let mut power = Vec::with_capacity(n_windows * n_bins);
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        for w in 0..n_windows {
            let seg = &signal[w * self.hop..w * self.hop + self.len];
            for ((b, &x), &win) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex::new(x * win, 0.0);
            }
            self.fft.process(&mut buf);
            power.extend(buf[..n_bins].iter().map(|c| c.norm_sqr() / self.window_energy));
        }
        Ok(Spectrogram { n_windows, n_bins, bin_hz: self.bin_hz, power })
    }
}

pub fn stft(signal: &[f64], sample_rate_hz: f64, window_s: f64, overlap_s: f64) -> Result<Spectrogram> {
    Stft::new(sample_rate_hz, window_s, overlap_s)?.process(signal)
}
