use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::eegdata::{synth_dataset, SignatureConfig, STANDARD_ELECTRODES};

fn sine(freq: f64, rate: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate).sin()).collect()
}

fn grid(values: Vec<f64>, electrodes: usize, n_bins: usize, bin_hz: f64) -> ElectrodeSpectrum {
    ElectrodeSpectrum {
        electrodes: STANDARD_ELECTRODES[..electrodes].iter().map(|s| s.to_string()).collect(),
        n_bins,
        bin_hz,
        values,
    }
}

#[test]
fn window_coefficients() {
    let w = blackman_harris(8);
    assert!((w[0] - (0.35875 - 0.48829 + 0.14128 - 0.01168)).abs() < 1e-15);
    assert!((w[4] - 1.0).abs() < 1e-15);
    assert!((w[1] - w[7]).abs() < 1e-15);
}

#[test]
fn ten_hz_sine_concentrates_at_bin_120() {
    let spec = stft(&sine(10.0, 100.0, 6000), 100.0, 12.0, 6.0).unwrap();
    assert_eq!(spec.n_windows, 9);
    assert_eq!(spec.n_bins, 601);
    assert!((spec.bin_hz - 1.0 / 12.0).abs() < 1e-15);
    for w in 0..spec.n_windows {
        let row = spec.row(w);
        let peak = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(peak, 120);
        let total: f64 = row.iter().sum();
        let near: f64 = row[117..=123].iter().sum();
        assert!(near / total >= 0.9999);
        let far = row.iter().enumerate().filter(|(k, _)| k.abs_diff(120) > 3).map(|(_, &p)| p).fold(0.0, f64::max);
        assert!(10.0 * (far / row[120]).log10() <= -92.0);
    }
}

#[test]
fn zero_signal_gives_zero_power() {
    let spec = stft(&vec![0.0; 3000], 100.0, 12.0, 6.0).unwrap();
    assert!(spec.power.iter().all(|&p| p == 0.0));
}

#[test]
fn too_short_signal_is_rejected() {
    assert!(matches!(stft(&[0.0; 1199], 100.0, 12.0, 6.0), Err(Error::TooShort(_))));
}

#[test]
fn parseval_per_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..4000).map(|_| rng.random_range(-50.0..50.0)).collect();
    let plan = Stft::new(100.0, 12.0, 6.0).unwrap();
    let spec = plan.process(&x).unwrap();
    let w = blackman_harris(1200);
    let w2: f64 = w.iter().map(|v| v * v).sum();
    for i in 0..spec.n_windows {
        let seg = &x[i * 600..i * 600 + 1200];
        let energy: f64 = seg.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum::<f64>() / w2;
        let row = spec.row(i);
        let two_sided = row[0] + 2.0 * row[1..600].iter().sum::<f64>() + row[600];
        let rel = (two_sided / 1200.0 - energy).abs() / energy;
        assert!(rel < 1e-9, "window {i}: {rel}");
    }
}

#[test]
fn periodic_signal_gives_identical_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let seg: Vec<f64> = (0..600).map(|_| rng.random()).collect();
    let x: Vec<f64> = seg.iter().cycle().take(3600).copied().collect();
    let spec = stft(&x, 100.0, 12.0, 6.0).unwrap();
    for w in 1..spec.n_windows {
        assert_eq!(spec.row(w), spec.row(0));
    }
}

#[test]
fn median_rules() {
    assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    assert_eq!(median(&mut [7.0]), 7.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..40 {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let oracle = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
        assert_eq!(median(&mut v.clone()), oracle);
    }
}

#[test]
fn median_over_one_window_is_that_window() {
    let ds = synth_dataset(1, 12.0, 1, &SignatureConfig::default());
    let rec = &ds.recordings[0];
    let plan = Stft::new(100.0, 12.0, 6.0).unwrap();
    let m = median_bandpower(&[rec], &plan).unwrap();
    let direct = plan.process(&rec.channel(7).iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
    assert_eq!(m.row(7), direct.row(0));
}

#[test]
fn median_rejects_mixed_electrodes() {
    let ds = synth_dataset(1, 12.0, 1, &SignatureConfig::default());
    let mut other = ds.recordings[1].clone();
    other.electrode_labels.swap(0, 1);
    let plan = Stft::new(100.0, 12.0, 6.0).unwrap();
    assert!(matches!(median_bandpower(&[&ds.recordings[0], &other], &plan), Err(Error::Electrode(_))));
}

#[test]
fn log_ratio_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = grid((0..42).map(|_| rng.random_range(0.1..5.0)).collect(), 2, 21, 1.0);
    let b = grid((0..42).map(|_| rng.random_range(0.1..5.0)).collect(), 2, 21, 1.0);
    let (same, _) = class_log_ratio(&a, &a).unwrap();
    assert!(same.values.iter().all(|&v| v == 0.0));
    let scaled = ElectrodeSpectrum { values: a.values.iter().map(|v| v * std::f64::consts::E).collect(), ..a.clone() };
    let (one, _) = class_log_ratio(&scaled, &a).unwrap();
    assert!(one.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    let (ab, _) = class_log_ratio(&a, &b).unwrap();
    let (ba, _) = class_log_ratio(&b, &a).unwrap();
    for (x, y) in ab.values.iter().zip(&ba.values) {
        assert_eq!(x.to_bits(), (-y).to_bits());
    }
    let zero = ElectrodeSpectrum { values: vec![0.0; 42], ..a.clone() };
    let (_, floored) = class_log_ratio(&zero, &a).unwrap();
    assert_eq!(floored, 42);
}

#[test]
fn default_band_bins_at_100_hz() {
    let bands = default_bands();
    let expect = [(0, 48), (48, 96), (96, 168), (168, 240), (240, 360), (360, 600)];
    for (band, (lo, hi)) in bands.iter().zip(expect) {
        assert_eq!(band_bins(band, 601, 100.0 / 1200.0), (lo..hi).collect::<Vec<_>>(), "{}", band.name);
    }
}

#[test]
fn band_means() {
    let g = grid((0..3 * 13).map(|i| i as f64).collect(), 3, 13, 1.0);
    let single = band_aggregate(&g, &[BandSpec::new("one", 5.0, 6.0)]).unwrap();
    assert_eq!(single[0].values, [5.0, 18.0, 31.0]);
    let uniform = grid(vec![0.75; 3 * 13], 3, 13, 1.0);
    for m in band_aggregate(&uniform, &[BandSpec::new("a", 0.0, 4.0), BandSpec::new("b", 4.0, 12.0)]).unwrap() {
        assert!(m.values.iter().all(|&v| v == 0.75));
    }
    let err = band_aggregate(&g, &[BandSpec::new("high", 12.0, 20.0)]).unwrap_err();
    assert!(matches!(err, Error::Band { .. }));
}

#[test]
fn synthetic_signature_is_recovered() {
    let sig = SignatureConfig::default();
    let ds = synth_dataset(20, 120.0, 11, &sig);
    let c = class_contrast(&ds.recordings, &default_bands()).unwrap();
    let expect = 2.0 * sig.slow_gain.ln();
    for e in ["T3", "T4"] {
        for band in &c.maps[..2] {
            let v = band.value(e).unwrap();
            assert!((v - expect).abs() < 0.2, "{e} {}: {v} vs {expect}", band.band);
        }
    }
    let fast = 2.0 * sig.fast_gain.ln();
    for band in &c.maps[3..] {
        for &v in &band.values {
            assert!(v < 0.0 && (v - fast).abs() < 0.2, "{}: {v}", band.band);
        }
    }
    let cz = c.maps[0].value("Cz").unwrap();
    assert!(cz.abs() < 0.2, "uninjected delta at Cz {cz}");
}

fn sample_map() -> TopoMap {
    TopoMap {
        band: "delta".into(),
        electrodes: STANDARD_ELECTRODES.iter().map(|s| s.to_string()).collect(),
        values: (0..21).map(|i| (i as f64 - 10.0) / 10.0).collect(),
    }
}

#[test]
fn zero_map_is_uniform_mid_colour() {
    let mut m = sample_map();
    m.values = vec![0.0; 21];
    let svg = render_topomap(&m);
    let fills: std::collections::BTreeSet<_> = svg
        .lines()
        .filter(|l| l.starts_with("<rect x=") && l.contains("width=\"5.00\""))
        .map(|l| l.split("fill=\"").nth(1).unwrap().to_string())
        .collect();
    assert_eq!(fills.len(), 1);
    assert!(fills.iter().next().unwrap().starts_with(&diverging_color(0.0)));
}

#[test]
fn sign_flip_mirrors_colours() {
    let m = sample_map();
    let flipped = TopoMap { values: m.values.iter().map(|v| -v).collect(), ..m.clone() };
    let (fa, va) = topo::field(&m);
    let (fb, vb) = topo::field(&flipped);
    assert_eq!(va, vb);
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(*x, -*y);
    }
    let (a, b) = (render_topomap(&m), render_topomap(&flipped));
    let ca: Vec<_> = fa.iter().map(|&t| diverging_color(t / va)).collect();
    let cb: Vec<_> = fa.iter().map(|&t| diverging_color(-t / va)).collect();
    let fills = |svg: &str| -> Vec<String> {
        svg.lines()
            .filter(|l| l.contains("width=\"5.00\""))
            .map(|l| l.split("fill=\"").nth(1).unwrap().trim_end_matches("\"/>").to_string())
            .collect()
    };
    assert_eq!(fills(&a), ca);
    assert_eq!(fills(&b), cb);
}

#[test]
fn topomap_matches_golden_file() {
    let svg = render_topomap(&sample_map());
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/topomap_delta.svg");
    if std::env::var_os("EEGPATH_BLESS").is_some() {
        std::fs::write(path, &svg).unwrap();
    }
    assert_eq!(svg, std::fs::read_to_string(path).unwrap());
}

#[test]
fn tsv_lists_every_cell() {
    let text = topomaps_to_tsv(&[sample_map()]);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 22);
    assert_eq!(lines[0], "electrode\tband\tvalue");
    assert_eq!(lines[1], "Fp1\tdelta\t-1.000000");
}
