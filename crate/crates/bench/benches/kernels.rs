use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eegpath::eegdata::resample;
use eegpath::models::{ArchitectureConfig, Network};
use eegpath::numcore::{adam_step, AdamConfig, Mode, Tape};
use eegpath::spectral::stft;
use eegpath_bench::{pattern, signal};

fn conv(c: &mut Criterion) {
    let x = pattern(&[16, 1, 21, 601]);
    let k = pattern(&[25, 1, 1, 10]);
    c.bench_function("conv_temporal 16x21x601 k10", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let (xi, ki) = (tape.input(x.clone()), tape.input(k.clone()));
            tape.conv_temporal(xi, ki, None, 1).unwrap()
        })
    });
}

fn networks(c: &mut Criterion) {
    let mut group = c.benchmark_group("network");
    group.sample_size(10);
    for cfg in [ArchitectureConfig::deep_default(), ArchitectureConfig::shallow_default()] {
        let mut net = Network::build(&cfg, 1).unwrap();
        let x = pattern(&[16, 1, 21, cfg.input_len_samples]);
        let labels: Vec<usize> = (0..16).map(|i| i % 2).collect();
        group.bench_with_input(BenchmarkId::new("train_step", cfg.kind), &x, |b, x| {
            b.iter(|| {
                let mut tape = Tape::new();
                let xi = tape.input(x.clone());
                let lp = net.forward(&mut tape, xi, Mode::Train).unwrap();
                let loss = tape.nll_loss(lp, &labels).unwrap();
                tape.backward(loss, &mut net.params).unwrap();
                adam_step(&mut net.params, &AdamConfig::default());
            })
        });
        group.bench_with_input(BenchmarkId::new("predict", cfg.kind), &x, |b, x| {
            b.iter(|| net.predict_log_probs(x).unwrap())
        });
    }
    group.finish();
}

fn spectra(c: &mut Criterion) {
    let x = signal(100 * 600);
    c.bench_function("stft 10 min at 100 Hz", |b| b.iter(|| stft(&x, 100.0, 12.0, 6.0).unwrap()));
    let y = signal(250 * 60);
    c.bench_function("resample 1 min 250 -> 100 Hz", |b| b.iter(|| resample(&y, 250.0, 100.0)));
}

criterion_group!(benches, conv, networks, spectra);
criterion_main!(benches);
