//! Correlation between random amplitude perturbations of the input spectrum
//! and the change of the pathological output unit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::models::Network;
use crate::numcore::Tensor;
use crate::spectral::{band_aggregate, BandSpec, ElectrodeSpectrum, TopoMap};

/// Amplitudes and unit phasors of bins `0..=T/2` for every crop and
/// electrode of a `[B, 1, E, T]` batch.
#[derive(Debug, Clone)]
pub struct BatchSpectra {
    pub batch: usize,
    pub electrodes: usize,
    pub len: usize,
    amp: Vec<f64>,
    phase: Vec<Complex<f64>>,
}

impl BatchSpectra {
    pub fn new(x: &Tensor) -> Result<Self> {
        let [b, c, e, t] = x.dims4()?;
        if c != 1 || t < 2 {
            return Err(Error::dim(format!("expected [batch, 1, electrodes, time], got {:?}", x.shape())));
        }
        let nb = t / 2 + 1;
        let fft = FftPlanner::new().plan_fft_forward(t);
        let mut amp = Vec::with_capacity(b * e * nb);
        let mut phase = Vec::with_capacity(b * e * nb);
        let mut buf = vec![Complex::new(0.0, 0.0); t];
        for row in x.data().chunks(t) {
            for (z, &v) in buf.iter_mut().zip(row) {
                *z = Complex::new(v, 0.0);
            }
            fft.process(&mut buf);
            for (k, z) in buf[..nb].iter().enumerate() {
                let a = z.norm();
                let self_conjugate = k == 0 || 2 * k == t;
                let p = if self_conjugate {
                    Complex::new(if z.re < 0.0 { -1.0 } else { 1.0 }, 0.0)
                } else if a > 0.0 {
                    z / a
                } else {
                    Complex::new(1.0, 0.0)
                };
                amp.push(a);
                phase.push(p);
            }
        }
        Ok(Self { batch: b, electrodes: e, len: t, amp, phase })
    }

    pub fn n_bins(&self) -> usize {
        self.len / 2 + 1
    }

    fn cells(&self) -> usize {
        self.electrodes * self.n_bins()
    }

    /// Standard deviation of each (electrode, bin) amplitude over the batch.
    pub fn amplitude_std(&self) -> Vec<f64> {
        let cells = self.cells();
        let n = self.batch as f64;
        let mut mean = vec![0.0; cells];
        for crop in self.amp.chunks(cells) {
            mean.iter_mut().zip(crop).for_each(|(m, a)| *m += a / n);
        }
        let mut var = vec![0.0; cells];
        for crop in self.amp.chunks(cells) {
            for ((v, a), m) in var.iter_mut().zip(crop).zip(&mean) {
                *v += (a - m).powi(2) / n;
            }
        }
        var.into_iter().map(f64::sqrt).collect()
    }

    /// Adds `noise` (one value per electrode and bin, electrode-major) to every
    /// crop's amplitudes, floors them at zero and transforms back with the
    /// original phases.
    pub fn synthesize(&self, noise: &[f64]) -> Result<Perturbed> {
        let cells = self.cells();
        if noise.len() != cells {
            return Err(Error::dim(format!("{} noise values for {cells} cells", noise.len())));
        }
        let (t, nb) = (self.len, self.n_bins());
        let ifft = FftPlanner::new().plan_fft_inverse(t);
        let mut out = Vec::with_capacity(self.batch * self.electrodes * t);
        let mut applied = vec![0.0; cells];
        let mut max_imag: f64 = 0.0;
        let mut buf = vec![Complex::new(0.0, 0.0); t];
        for row in 0..self.batch * self.electrodes {
            let e = row % self.electrodes;
            let base = row * nb;
            for k in 0..nb {
                let a = self.amp[base + k];
                let new = (a + noise[e * nb + k]).max(0.0);
                applied[e * nb + k] += (new - a) / self.batch as f64;
                buf[k] = self.phase[base + k] * new;
                if k > 0 && 2 * k != t {
                    buf[t - k] = buf[k].conj();
                }
            }
            ifft.process(&mut buf);
            for z in &buf {
                max_imag = max_imag.max((z.im / t as f64).abs());
                out.push(z.re / t as f64);
            }
        }
        Ok(Perturbed {
            batch: Tensor::new(vec![self.batch, 1, self.electrodes, t], out)?,
            applied,
            max_imag_residue: max_imag,
        })
    }
}

/// A perturbed batch with the mean amplitude change applied to each
/// (electrode, bin) and the largest imaginary part left by the inverse FFT.
#[derive(Debug, Clone)]
pub struct Perturbed {
    pub batch: Tensor,
    pub applied: Vec<f64>,
    pub max_imag_residue: f64,
}

fn gaussian(std: &[f64], scale: f64, seed: u64, sign: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std.iter()
        .map(|s| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sign * scale * s * z
        })
        .collect()
}

/// Gaussian amplitude noise with per-cell standard deviation `scale` times
/// the batch's amplitude spread.
pub fn perturb_amplitudes(batch: &Tensor, noise_scale: f64, seed: u64) -> Result<Perturbed> {
    let spectra = BatchSpectra::new(batch)?;
    spectra.synthesize(&gaussian(&spectra.amplitude_std(), noise_scale, seed, 1.0))
}

/// Pathological-class pre-softmax output of each crop.
pub fn pathological_outputs(network: &mut Network, batch: &Tensor) -> Result<Vec<f64>> {
    let [b, c, e, t] = batch.dims4()?;
    let mut out = Vec::with_capacity(b);
    let step = 64;
    for start in (0..b).step_by(step) {
        let n = step.min(b - start);
        let slice = batch.data()[start * c * e * t..(start + n) * c * e * t].to_vec();
        let logits = network.predict_logits(&Tensor::new(vec![n, c, e, t], slice)?)?;
        out.extend(logits.data().chunks(2).map(|r| r[1]));
    }
    Ok(out)
}

/// Mean over crops of the pathological output, perturbed minus original.
pub fn prediction_delta(network: &mut Network, original: &Tensor, perturbed: &Tensor) -> Result<f64> {
    if original.shape() != perturbed.shape() {
        return Err(Error::dim(format!("batch shapes {:?} and {:?} differ", original.shape(), perturbed.shape())));
    }
    let a = pathological_outputs(network, original)?;
    let b = pathological_outputs(network, perturbed)?;
    Ok(b.iter().zip(&a).map(|(p, o)| p - o).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    pub n_repetitions: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self { n_repetitions: 200, noise_scale: 1.0, seed: 0 }
    }
}

pub const MAX_CROPS: usize = 1000;
pub const MIN_REPETITIONS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRun {
    pub n_repetitions: usize,
    pub noise_scale: f64,
    pub electrodes: Vec<String>,
    pub n_bins: usize,
    pub bin_hz: f64,
    /// Applied amplitude change per repetition, electrode-major cells.
    pub perturbations: Vec<Vec<f64>>,
    pub deltas: Vec<f64>,
    pub max_imag_residue: f64,
}

/// Repetition `r` draws noise from seed `seed + r/2` and negates it for odd
/// `r`, so the sampled noise sums to zero over each pair. `predict` maps a
/// batch to one output per crop; each worker uses its own clone.
pub fn run_perturbations<P>(
    predict: P,
    batch: &Tensor,
    electrodes: &[String],
    sample_rate_hz: f64,
    cfg: &PerturbConfig,
) -> Result<PerturbationRun>
where
    P: FnMut(&Tensor) -> Result<Vec<f64>> + Clone + Send + Sync,
{
    let spectra = BatchSpectra::new(batch)?;
    if electrodes.len() != spectra.electrodes {
        return Err(Error::Electrode(format!("{} names for {} electrodes", electrodes.len(), spectra.electrodes)));
    }
    if cfg.n_repetitions == 0 {
        return Err(Error::Config("at least one repetition is required".into()));
    }
    let std = spectra.amplitude_std();
    let mut base = predict.clone();
    let original = base(batch)?;
    let reps: Vec<(Vec<f64>, f64, f64)> = (0..cfg.n_repetitions)
        .into_par_iter()
        .map_init(
            || predict.clone(),
            |p, r| {
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                let noise = gaussian(&std, cfg.noise_scale, cfg.seed.wrapping_add(r as u64 / 2), sign);
                let out = spectra.synthesize(&noise)?;
                let y = p(&out.batch)?;
                let delta = y.iter().zip(&original).map(|(a, b)| a - b).sum::<f64>() / y.len() as f64;
                Ok((out.applied, delta, out.max_imag_residue))
            },
        )
        .collect::<Result<_>>()?;
    let max_imag_residue = reps.iter().fold(0.0f64, |m, r| m.max(r.2));
    let (perturbations, deltas) = reps.into_iter().map(|(a, d, _)| (a, d)).unzip();
    Ok(PerturbationRun {
        n_repetitions: cfg.n_repetitions,
        noise_scale: cfg.noise_scale,
        electrodes: electrodes.to_vec(),
        n_bins: spectra.n_bins(),
        bin_hz: sample_rate_hz / spectra.len as f64,
        perturbations,
        deltas,
        max_imag_residue,
    })
}

/// Wraps a network as a predictor of the pathological output.
pub fn network_predictor(network: &Network) -> impl FnMut(&Tensor) -> Result<Vec<f64>> + Clone + Send + Sync {
    let mut net = network.clone();
    move |b: &Tensor| pathological_outputs(&mut net, b)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    /// Per-(electrode, bin) correlation; NaN where a cell has no variance.
    pub cells: ElectrodeSpectrum,
    pub maps: Vec<TopoMap>,
    pub low_repetitions: bool,
}

pub fn correlation_map(run: &PerturbationRun, bands: &[BandSpec]) -> Result<CorrelationMap> {
    let cells = run.electrodes.len() * run.n_bins;
    if run.perturbations.len() != run.deltas.len() || run.perturbations.iter().any(|p| p.len() != cells) {
        return Err(Error::dim("perturbation record is inconsistent"));
    }
    let values: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|c| {
            let x: Vec<f64> = run.perturbations.iter().map(|p| p[c]).collect();
            pearson(&x, &run.deltas).unwrap_or(f64::NAN)
        })
        .collect();
    let grid = ElectrodeSpectrum { electrodes: run.electrodes.clone(), n_bins: run.n_bins, bin_hz: run.bin_hz, values };
    let maps = band_aggregate(&grid, bands)?;
    Ok(CorrelationMap { cells: grid, maps, low_repetitions: run.n_repetitions < MIN_REPETITIONS })
}
