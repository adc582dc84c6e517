use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::kv::FlatConfig;
use crate::numcore::{Mode, Tape, Tensor};

fn random_batch(b: usize, e: usize, t: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[b, 1, e, t], |_| rng.random_range(-1.0..1.0))
}

fn deep_param_count() -> usize {
    let mut n = 25 * 10 + 25 + 25 * 25 * 21 + 2 * 25;
    let mut c_in = 25;
    for f in [50, 100, 200] {
        n += f * c_in * 10 + 2 * f;
        c_in = f;
    }
    n + 2 * 200 + 2
}

#[test]
fn parameter_counts_match_layer_shapes() {
    let deep = build_deep(&ArchitectureConfig::deep_default(), 0).unwrap();
    assert_eq!(deep.n_params(), deep_param_count());
    let shallow = build_shallow(&ArchitectureConfig::shallow_default(), 0).unwrap();
    assert_eq!(shallow.n_params(), 40 * 25 + 40 + 40 * 40 * 21 + 80 + 2 * 40 * 35 + 2);
    let linear = build_linear(&ArchitectureConfig::linear_default(), 0).unwrap();
    assert_eq!(linear.n_params(), 25202);
}

#[test]
fn builders_reject_other_kinds() {
    let shallow = ArchitectureConfig::shallow_default();
    assert!(matches!(build_deep(&shallow, 0), Err(crate::Error::Config(_))));
    assert!(build_linear(&shallow, 0).is_err());
    assert!(build_from_hpo(&ArchitectureConfig::linear_default(), 0).is_err());
}

#[test]
fn zero_input_gives_normalized_rows() {
    for cfg in [ArchitectureConfig::deep_default(), ArchitectureConfig::shallow_default()] {
        let mut net = Network::build(&cfg, 1).unwrap();
        let mut tape = Tape::new();
        let x = tape.input(Tensor::zeros(&[2, 1, 21, cfg.input_len_samples]));
        let out = net.forward(&mut tape, x, Mode::Train).unwrap();
        let lp = tape.value(out);
        assert_eq!(lp.shape(), &[2, 2]);
        for row in lp.data().chunks(2) {
            assert!(row.iter().all(|v| v.is_finite()));
            assert!((row.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn linear_with_zero_weights_is_uniform() {
    let mut net = build_linear(&ArchitectureConfig::linear_default(), 0).unwrap();
    for p in net.params.iter_mut() {
        p.value.fill(0.0);
    }
    let lp = net.predict_log_probs(&random_batch(3, 21, 600, 2)).unwrap();
    for &v in lp.data() {
        assert!((v + std::f64::consts::LN_2).abs() < 1e-15);
    }
}

#[test]
fn shallow_has_square_then_log_once() {
    let net = build_shallow(&ArchitectureConfig::shallow_default(), 0).unwrap();
    let names: Vec<_> = net.layers().iter().map(Layer::name).collect();
    assert_eq!(names.iter().filter(|&&n| n == "square").count(), 1);
    assert_eq!(names.iter().filter(|&&n| n == "safe_log").count(), 1);
    let sq = names.iter().position(|&n| n == "square").unwrap();
    let lg = names.iter().position(|&n| n == "safe_log").unwrap();
    assert_eq!(lg, sq + 2, "{names:?}");
    assert_eq!(names[sq + 1], "mean_pool");
}

#[test]
fn square_stage_probe() {
    let mut net = build_shallow(&ArchitectureConfig::shallow_default(), 3).unwrap();
    let trace = net.trace(&random_batch(2, 21, 609, 4), Mode::Train).unwrap();
    let sq = trace.iter().position(|(n, _)| *n == "square").unwrap();
    let (before, after) = (&trace[sq - 1].1, &trace[sq].1);
    assert_eq!(before.shape(), after.shape());
    for (&x, &y) in before.data().iter().zip(after.data()) {
        assert_eq!(y, x * x);
    }
}

fn two_block_config(k0: usize, final_len: usize, input_len: usize) -> ArchitectureConfig {
    let mut cfg = ArchitectureConfig::deep_default();
    cfg.blocks.truncate(2);
    cfg.blocks[0].kernel_len = k0;
    for b in &mut cfg.blocks {
        b.nonlinearity = Nonlinearity::Identity;
    }
    cfg.final_filter_len = final_len;
    cfg.input_len_samples = input_len;
    cfg
}

#[test]
fn short_searched_inputs_are_buildable() {
    for (k0, f, len) in [(12, 14, 180), (13, 35, 370)] {
        let cfg = two_block_config(k0, f, len);
        let net = build_from_hpo(&cfg, 0).unwrap();
        assert_eq!(net.receptive_field(), len);
    }
}

#[test]
fn identity_selectors_leave_only_max_pools_nonlinear() {
    let mut net = build_from_hpo(&two_block_config(12, 14, 180), 0).unwrap();
    let nonlinear: Vec<_> = net.layers().iter().filter(|l| l.is_nonlinear()).map(Layer::name).collect();
    assert_eq!(nonlinear, ["max_pool", "max_pool"]);
    let mut tape = Tape::new();
    let x = tape.input(random_batch(2, 21, 180, 5));
    let out = net.forward(&mut tape, x, Mode::Train).unwrap();
    assert_eq!(tape.value(out).shape(), &[2, 2]);
}

#[test]
fn config_survives_build_and_serialization() {
    for cfg in [
        ArchitectureConfig::deep_default(),
        ArchitectureConfig::shallow_default(),
        ArchitectureConfig::linear_default(),
        two_block_config(12, 14, 180),
    ] {
        let net = Network::build(&cfg, 0).unwrap();
        let text = net.config().to_flat().to_text();
        assert_eq!(ArchitectureConfig::from_flat(&FlatConfig::parse(&text).unwrap()).unwrap(), cfg);
    }
}

#[test]
fn saved_network_predicts_identically() {
    let cfg = ArchitectureConfig::shallow_default();
    let mut net = Network::build(&cfg, 8).unwrap();
    let batch = random_batch(3, 21, 609, 9);
    net.calibrate_batch_norm(&batch).unwrap();
    let bytes = encode_network(&net);
    let mut back = decode_network(&bytes).unwrap();
    assert_eq!(back.config(), net.config());
    assert_eq!(net.predict_log_probs(&batch).unwrap(), back.predict_log_probs(&batch).unwrap());

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_network(&bad), Err(crate::Error::Format(_))));
    assert!(matches!(decode_network(&bytes[..bytes.len() - 3]), Err(crate::Error::Corruption(_))));
}

#[test]
fn eval_before_training_is_rejected() {
    let mut net = Network::build(&ArchitectureConfig::deep_default(), 0).unwrap();
    let err = net.predict_log_probs(&random_batch(1, 21, 601, 0)).unwrap_err();
    assert!(matches!(err, crate::Error::UninitializedStatistics));
}

#[test]
fn longer_inputs_give_one_output_per_stride() {
    let cfg = ArchitectureConfig::deep_default();
    let mut net = Network::build(&cfg, 0).unwrap();
    let s = net.temporal_output_stride();
    let mut tape = Tape::new();
    let x = tape.input(random_batch(2, 21, 601 + 4 * s, 1));
    let out = net.forward_dense(&mut tape, x, Mode::Train).unwrap();
    assert_eq!(tape.value(out).shape(), &[2, 2, 1, 5]);
    let mut tape = Tape::new();
    let x = tape.input(random_batch(1, 21, 600, 1));
    assert!(matches!(
        net.forward_dense(&mut tape, x, Mode::Train),
        Err(crate::Error::InsufficientLength { needed: 601, .. })
    ));
}

fn random_config(rng: &mut ChaCha8Rng) -> ArchitectureConfig {
    let nonlin = [Nonlinearity::Elu, Nonlinearity::SquareLog, Nonlinearity::Identity];
    let blocks = (0..rng.random_range(1..=3))
        .map(|_| BlockConfig {
            filters: rng.random_range(1..=3),
            kernel_len: rng.random_range(1..=5),
            conv_stride: rng.random_range(1..=3),
            nonlinearity: nonlin[rng.random_range(0..3)],
            pool: PoolKind::Mean,
            pool_len: rng.random_range(1..=4),
            pool_stride: rng.random_range(1..=3),
        })
        .collect();
    let mut cfg = ArchitectureConfig {
        kind: ArchKind::Deep,
        input_len_samples: 0,
        n_electrodes: 2,
        blocks,
        final_filter_len: rng.random_range(1..=3),
        batch_norm: false,
        dropout: 0.0,
    };
    cfg.input_len_samples = cfg.receptive_field();
    cfg
}

#[test]
fn receptive_field_formula_matches_perturbation_span() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let cfg = random_config(&mut rng);
        let mut net = Network::build(&cfg, rng.random()).unwrap();
        let rf = net.receptive_field();
        let s = net.temporal_output_stride();
        let n_out = 3;
        let len = rf + (n_out - 1) * s;
        let base = random_batch(1, 2, len, rng.random()).map(|v| v + 2.0);
        let eval = |net: &mut Network, x: &Tensor| {
            let mut tape = Tape::new();
            let v = tape.input(x.clone());
            let out = net.forward_dense(&mut tape, v, Mode::Eval).unwrap();
            tape.value(out).data()[..n_out].to_vec()
        };
        let reference = eval(&mut net, &base);
        let mut span = vec![(usize::MAX, 0usize); n_out];
        for t in 0..len {
            let mut x = base.clone();
            x.data_mut()[t] += 0.5;
            for (j, (&a, &b)) in eval(&mut net, &x).iter().zip(&reference).enumerate() {
                if (a - b).abs() > 1e-12 {
                    span[j].0 = span[j].0.min(t);
                    span[j].1 = span[j].1.max(t);
                }
            }
        }
        for (j, &(lo, hi)) in span.iter().enumerate() {
            assert_eq!(lo, j * s, "{cfg:?}");
            assert_eq!(hi - lo + 1, rf, "{cfg:?}");
        }
    }
}

/// Central-difference check of every parameter tensor on a sample of its
/// entries against the tape gradient of the mean NLL on a 2-crop batch.
fn gradient_check(cfg: &ArchitectureConfig, seed: u64, entries_per_param: usize) {
    let mut net = Network::build(cfg, seed).unwrap();
    let batch = random_batch(2, cfg.n_electrodes, cfg.input_len_samples, seed + 1);
    let labels = [0usize, 1];
    let loss = |net: &mut Network| {
        let mut tape = Tape::new();
        let x = tape.input(batch.clone());
        let lp = net.forward(&mut tape, x, Mode::Train).unwrap();
        let l = tape.nll_loss(lp, &labels).unwrap();
        tape.value(l).item()
    };
    {
        let mut tape = Tape::new();
        let x = tape.input(batch.clone());
        let lp = net.forward(&mut tape, x, Mode::Train).unwrap();
        let l = tape.nll_loss(lp, &labels).unwrap();
        tape.backward(l, &mut net.params).unwrap();
    }
    let ids: Vec<_> = net.params.ids().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    let h = 1e-6;
    for id in ids {
        let n = net.params.get(id).numel();
        for _ in 0..entries_per_param.min(n) {
            let j = rng.random_range(0..n);
            let analytic = net.params.get(id).grad.data()[j];
            let orig = net.params.get(id).value.data()[j];
            net.params.get_mut(id).value.data_mut()[j] = orig + h;
            let up = loss(&mut net);
            net.params.get_mut(id).value.data_mut()[j] = orig - h;
            let down = loss(&mut net);
            net.params.get_mut(id).value.data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4);
            let name = &net.params.get(id).name;
            assert!(rel < 1e-5, "{name}[{j}]: tape {analytic:e} vs fd {numeric:e} (rel {rel:e})");
        }
    }
}

#[test]
fn deep_default_gradient_check() {
    gradient_check(&ArchitectureConfig::deep_default(), 10, 3);
}

#[test]
fn shallow_default_gradient_check() {
    gradient_check(&ArchitectureConfig::shallow_default(), 20, 3);
}
