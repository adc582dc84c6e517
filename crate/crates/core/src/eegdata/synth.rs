//! Synthetic recordings with a known class-dependent spectral signature.
//!
//! Each channel is white Gaussian noise shaped in the frequency domain to a
//! 1/f power spectrum, with a posterior alpha peak. Pathological recordings
//! multiply the amplitude spectrum by `slow_gain` over `slow_band_hz` at the
//! signature electrodes and by `fast_gain` over `fast_band_hz` everywhere, so
//! the expected class log power ratio is `2·ln(gain)` inside those cells.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Label, Recording, STANDARD_ELECTRODES};
use crate::kv::FlatConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureConfig {
    pub electrodes: Vec<String>,
    pub slow_band_hz: (f64, f64),
    pub slow_gain: f64,
    pub fast_band_hz: (f64, f64),
    pub fast_gain: f64,
    pub sample_rate_hz: f64,
    pub background_uv: f64,
    pub alpha_hz: f64,
    pub alpha_gain: f64,
    /// Standard deviation of the per-recording log amplitude factor.
    pub amplitude_jitter: f64,
}

impl Default for SignatureConfig {
    fn default() -> Self {
        Self {
            electrodes: vec!["T3".into(), "T4".into()],
            slow_band_hz: (0.0, 8.0),
            slow_gain: 2.5,
            fast_band_hz: (14.0, 50.0),
            fast_gain: 0.7,
            sample_rate_hz: 100.0,
            background_uv: 20.0,
            alpha_hz: 10.0,
            alpha_gain: 2.0,
            amplitude_jitter: 0.1,
        }
    }
}

impl SignatureConfig {
    /// No class difference at all.
    pub fn null() -> Self {
        Self { slow_gain: 1.0, fast_gain: 1.0, ..Self::default() }
    }

    /// Pathological/normal amplitude gain at `f` Hz on `electrode`.
    pub fn gain(&self, electrode: &str, f: f64) -> f64 {
        let mut g = 1.0;
        let (lo, hi) = self.slow_band_hz;
        if f >= lo && f < hi && self.electrodes.iter().any(|e| e.eq_ignore_ascii_case(electrode)) {
            g *= self.slow_gain;
        }
        let (lo, hi) = self.fast_band_hz;
        if f >= lo && f < hi {
            g *= self.fast_gain;
        }
        g
    }

    pub fn to_flat(&self) -> FlatConfig {
        let mut c = FlatConfig::new();
        c.set("signature.electrodes", self.electrodes.join(","));
        c.set("signature.slow_band_hz", format!("{},{}", self.slow_band_hz.0, self.slow_band_hz.1));
        c.set("signature.slow_gain", self.slow_gain);
        c.set("signature.fast_band_hz", format!("{},{}", self.fast_band_hz.0, self.fast_band_hz.1));
        c.set("signature.fast_gain", self.fast_gain);
        c.set("signature.sample_rate_hz", self.sample_rate_hz);
        c.set("signature.background_uv", self.background_uv);
        c.set("signature.alpha_hz", self.alpha_hz);
        c.set("signature.alpha_gain", self.alpha_gain);
        c.set("signature.amplitude_jitter", self.amplitude_jitter);
        c
    }

    pub fn from_flat(c: &FlatConfig) -> crate::Result<Self> {
        let d = Self::default();
        let band = |key: &str, default: (f64, f64)| -> crate::Result<(f64, f64)> {
            let Some(v) = c.get(key) else { return Ok(default) };
            let parsed = v.split_once(',').and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            parsed.ok_or_else(|| crate::Error::Config(format!("{key}: expected `lo,hi`, got {v:?}")))
        };
        Ok(Self {
            electrodes: c
                .get("signature.electrodes")
                .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
                .unwrap_or(d.electrodes),
            slow_band_hz: band("signature.slow_band_hz", d.slow_band_hz)?,
            slow_gain: c.parsed_or("signature.slow_gain", d.slow_gain)?,
            fast_band_hz: band("signature.fast_band_hz", d.fast_band_hz)?,
            fast_gain: c.parsed_or("signature.fast_gain", d.fast_gain)?,
            sample_rate_hz: c.parsed_or("signature.sample_rate_hz", d.sample_rate_hz)?,
            background_uv: c.parsed_or("signature.background_uv", d.background_uv)?,
            alpha_hz: c.parsed_or("signature.alpha_hz", d.alpha_hz)?,
            alpha_gain: c.parsed_or("signature.alpha_gain", d.alpha_gain)?,
            amplitude_jitter: c.parsed_or("signature.amplitude_jitter", d.amplitude_jitter)?,
        })
    }
}

/// Generated recordings plus the signature that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub recordings: Vec<Recording>,
    pub signature: SignatureConfig,
}

fn alpha_weight(electrode: &str) -> f64 {
    match electrode {
        "O1" | "O2" => 1.0,
        "P3" | "P4" | "Pz" | "T5" | "T6" => 0.5,
        _ => 0.15,
    }
}

fn background(f: f64) -> f64 {
    1.0 / f.max(1.0).sqrt()
}

const NORMAL_PHRASES: &[&str] = &[
    "Normal EEG.",
    "The background is well organized and symmetric.",
    "A posterior dominant rhythm of 10 Hz is seen.",
    "Drowsiness and light sleep were recorded.",
    "Normal for age.",
    "No epileptiform discharges.",
];

const PATHOLOGICAL_PHRASES: &[&str] = &[
    "Abnormal EEG.",
    "There is a small amount of temporal slowing.",
    "Intermittent focal slowing over the temporal regions.",
    "Excess delta and theta activity.",
    "Reduced beta activity.",
    "Clinical correlation is advised.",
];

fn report(label: Label, rng: &mut ChaCha8Rng) -> String {
    let phrases = if label == Label::Pathological { PATHOLOGICAL_PHRASES } else { NORMAL_PHRASES };
    let mut parts = vec![phrases[0]];
    for p in &phrases[1..] {
        if rng.random_bool(0.5) {
            parts.push(p);
        }
    }
    parts.join(" ")
}

/// `2·n_per_class` recordings of `duration_s` seconds, alternating normal
/// and pathological in generation order. Recording `i` draws from its own
/// stream of a generator seeded by `seed`.
pub fn synth_dataset(n_per_class: usize, duration_s: f64, seed: u64, sig: &SignatureConfig) -> SynthDataset {
    let fs = sig.sample_rate_hz;
    let n = (duration_s * fs).round() as usize;
    let freqs: Vec<f64> = (0..n).map(|k| k.min(n - k) as f64 * fs / n as f64).collect();
    let mean_power = freqs.iter().map(|&f| background(f).powi(2)).sum::<f64>() / n.max(1) as f64;
    let scale = sig.background_uv / mean_power.sqrt();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let labels: Vec<String> = STANDARD_ELECTRODES.iter().map(|s| s.to_string()).collect();

    let recordings = (0..2 * n_per_class)
        .into_par_iter()
        .map(|i| {
            let label = if i % 2 == 0 { Label::Normal } else { Label::Pathological };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let amp: f64 = (sig.amplitude_jitter * rng.sample::<f64, _>(StandardNormal)).exp();
            let alpha_hz = sig.alpha_hz + rng.random_range(-0.5..0.5);
            let mut rows = Vec::with_capacity(labels.len());
            let mut buf = vec![Complex::new(0.0, 0.0); n];
            for name in &labels {
                for b in buf.iter_mut() {
                    *b = Complex::new(rng.sample(StandardNormal), 0.0);
                }
                fft.process(&mut buf);
                let w = alpha_weight(name);
                for (b, &f) in buf.iter_mut().zip(&freqs) {
                    let alpha = 1.0 + sig.alpha_gain * w * (-(f - alpha_hz).powi(2) / 2.0).exp();
                    let class = if label == Label::Pathological { sig.gain(name, f) } else { 1.0 };
                    *b *= background(f) * alpha * class;
                }
                buf[0] = Complex::new(0.0, 0.0);
                ifft.process(&mut buf);
                let k = scale * amp / n as f64;
                rows.push(buf.iter().map(|c| (c.re * k) as f32).collect::<Vec<f32>>());
            }
            let text = report(label, &mut rng);
            Recording::from_rows(labels.clone(), fs, &rows, label, Some(text), format!("s{i:04}"))
                .expect("generated recording is well formed")
        })
        .collect();
    SynthDataset { recordings, signature: sig.clone() }
}
