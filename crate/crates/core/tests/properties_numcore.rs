use eegpath::numcore::{ParamStore, Tape, Tensor, Var};
use eegpath::Result;
use proptest::prelude::*;

fn tensor(shape: Vec<usize>) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-1.0f64..1.0, n).prop_map(move |d| Tensor::new(shape.clone(), d).unwrap())
}

fn conv_temporal_oracle(x: &Tensor, k: &Tensor, stride: usize) -> Vec<f64> {
    let s = x.shape();
    let (b, ci, e, tt) = (s[0], s[1], s[2], s[3]);
    let (co, kt) = (k.shape()[0], k.shape()[3]);
    let to = (tt - kt) / stride + 1;
    let mut out = vec![0.0; b * co * e * to];
    for bb in 0..b {
        for o in 0..co {
            for ee in 0..e {
                for t in 0..to {
                    let mut acc = 0.0;
                    for i in 0..ci {
                        for tau in 0..kt {
                            acc += x.data()[((bb * ci + i) * e + ee) * tt + t * stride + tau]
                                * k.data()[(o * ci + i) * kt + tau];
                        }
                    }
                    out[((bb * co + o) * e + ee) * to + t] = acc;
                }
            }
        }
    }
    out
}

fn conv_spatial_oracle(x: &Tensor, k: &Tensor, stride: usize) -> Vec<f64> {
    let s = x.shape();
    let (b, ci, e, tt) = (s[0], s[1], s[2], s[3]);
    let co = k.shape()[0];
    let to = (tt - 1) / stride + 1;
    let mut out = vec![0.0; b * co * to];
    for bb in 0..b {
        for o in 0..co {
            for t in 0..to {
                let mut acc = 0.0;
                for i in 0..ci {
                    for ee in 0..e {
                        acc += x.data()[((bb * ci + i) * e + ee) * tt + t * stride] * k.data()[(o * ci + i) * e + ee];
                    }
                }
                out[(bb * co + o) * to + t] = acc;
            }
        }
    }
    out
}

/// (input, kernel, stride) with the kernel no longer than the input.
fn temporal_case() -> impl Strategy<Value = (Tensor, Tensor, usize)> {
    (1usize..3, 1usize..3, 1usize..4, 1usize..4, 1usize..6, 0usize..12, 1usize..4).prop_flat_map(
        |(b, ci, co, e, k, extra, stride)| {
            (tensor(vec![b, ci, e, k + extra]), tensor(vec![co, ci, 1, k]), Just(stride))
        },
    )
}

fn spatial_case() -> impl Strategy<Value = (Tensor, Tensor, usize)> {
    (1usize..3, 1usize..3, 1usize..4, 1usize..5, 1usize..12, 1usize..4).prop_flat_map(|(b, ci, co, e, t, stride)| {
        (tensor(vec![b, ci, e, t]), tensor(vec![co, ci, e, 1]), Just(stride))
    })
}

type Op = Box<dyn Fn(&mut Tape, Var) -> Result<Var>>;

fn weighted_sum(tape: &mut Tape, y: Var, w: &[f64]) -> Result<Var> {
    let n = tape.value(y).len();
    let flat = tape.reshape(y, &[1, n])?;
    let wv = tape.input(Tensor::new(vec![1, n], w.to_vec())?);
    let d = tape.dense(flat, wv, None)?;
    Ok(tape.sum(d))
}

/// Largest relative difference between tape and central-difference
/// gradients of a random linear functional of `op(x)`.
fn fd_error(op: impl Fn(&mut Tape, Var) -> Result<Var>, x: &Tensor, w_seed: u64) -> f64 {
    let mut probe = Tape::new();
    let v = probe.input(x.clone());
    let n_out = op(&mut probe, v).map(|y| probe.value(y).len()).unwrap();
    let w: Vec<f64> =
        (0..n_out).map(|i| (((i as u64 + 1) * 2654435761 + w_seed) % 2001) as f64 / 1000.0 - 1.0).collect();
    let loss = |xt: &Tensor| {
        let mut tape = Tape::new();
        let v = tape.input(xt.clone());
        let y = op(&mut tape, v).unwrap();
        let l = weighted_sum(&mut tape, y, &w).unwrap();
        tape.value(l).item()
    };
    let mut tape = Tape::new();
    let v = tape.input_with_grad(x.clone());
    let y = op(&mut tape, v).unwrap();
    let l = weighted_sum(&mut tape, y, &w).unwrap();
    let g = tape.backward(l, &mut ParamStore::new()).unwrap().get(v).unwrap().clone();
    let h = 1e-6;
    (0..x.len())
        .map(|j| {
            let (mut p, mut m) = (x.clone(), x.clone());
            p.data_mut()[j] += h;
            m.data_mut()[j] -= h;
            let fd = (loss(&p) - loss(&m)) / (2.0 * h);
            let a = g.data()[j];
            (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4)
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_temporal_equals_loop_oracle((x, k, stride) in temporal_case()) {
        let mut tape = Tape::new();
        let (xv, kv) = (tape.input(x.clone()), tape.input(k.clone()));
        let y = tape.conv_temporal(xv, kv, None, stride).unwrap();
        let oracle = conv_temporal_oracle(&x, &k, stride);
        prop_assert_eq!(tape.value(y).len(), oracle.len());
        for (a, b) in tape.value(y).data().iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_spatial_equals_loop_oracle((x, k, stride) in spatial_case()) {
        let mut tape = Tape::new();
        let (xv, kv) = (tape.input(x.clone()), tape.input(k.clone()));
        let y = tape.conv_spatial(xv, kv, None, stride).unwrap();
        let oracle = conv_spatial_oracle(&x, &k, stride);
        prop_assert_eq!(tape.value(y).len(), oracle.len());
        for (a, b) in tape.value(y).data().iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn log_softmax_rows_normalize(rows in 1usize..6, scale in 1e-3f64..1e3, seed in 0u64..1000) {
        let x = Tensor::from_fn(&[rows, 2], |i| scale * ((((i as u64 + seed) * 7919) % 1000) as f64 / 500.0 - 1.0));
        let mut tape = Tape::new();
        let v = tape.input(x);
        let y = tape.log_softmax(v).unwrap();
        for r in tape.value(y).data().chunks(2) {
            prop_assert!((r[0].exp() + r[1].exp() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stride_relocation_preserves_length(t in 40usize..400, k in 1usize..12, s in 1usize..4, l in 1usize..5) {
        prop_assume!(t >= k + (l - 1) * s);
        let x = Tensor::zeros(&[1, 1, 1, t]);
        let kern = Tensor::full(&[1, 1, 1, k], 1.0);
        let mut tape = Tape::new();
        let (xv, kv) = (tape.input(x), tape.input(kern));
        let a = tape.conv_temporal(xv, kv, None, s).unwrap();
        let a = tape.max_pool_t(a, l, 1).unwrap();
        let b = tape.conv_temporal(xv, kv, None, 1).unwrap();
        let b = tape.max_pool_t(b, (l - 1) * s + 1, s).unwrap();
        prop_assert_eq!(tape.value(a).shape(), tape.value(b).shape());
    }

    #[test]
    fn ops_stay_finite_on_finite_input(x in tensor(vec![2, 2, 2, 9]), scale in 1e-6f64..1e6) {
        let x = x.map(|v| v * scale);
        let mut tape = Tape::new();
        let v = tape.input(x);
        let ys = [
            tape.elu(v),
            tape.square(v),
            tape.max_pool_t(v, 3, 2).unwrap(),
            tape.mean_pool_t(v, 4, 1).unwrap(),
        ];
        let sq = tape.square(v);
        let lg = tape.safe_log(sq);
        let flat = tape.reshape(v, &[36, 2]).unwrap();
        let ls = tape.log_softmax(flat).unwrap();
        for y in ys.into_iter().chain([lg, ls]) {
            prop_assert!(tape.value(y).all_finite());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tape_gradients_match_finite_differences(x in tensor(vec![2, 2, 3, 10]), k in tensor(vec![2, 2, 1, 3]), ks in tensor(vec![2, 2, 3, 1]), seed in 0u64..1000) {
        let shifted = x.map(|v| v + 0.05 * v.signum());
        let ops: Vec<(&str, Op)> = vec![
            ("elu", Box::new(|t: &mut Tape, v| Ok(t.elu(v)))),
            ("square", Box::new(|t: &mut Tape, v| Ok(t.square(v)))),
            ("mean_pool", Box::new(|t: &mut Tape, v| t.mean_pool_t(v, 3, 2))),
            ("conv_temporal", Box::new(move |t: &mut Tape, v| { let kv = t.input(k.clone()); t.conv_temporal(v, kv, None, 2) })),
            ("conv_spatial", Box::new(move |t: &mut Tape, v| { let kv = t.input(ks.clone()); t.conv_spatial(v, kv, None, 1) })),
        ];
        for (name, op) in &ops {
            let err = fd_error(op, &shifted, seed);
            prop_assert!(err < 1e-5, "{}: {}", name, err);
        }
        let pos = x.map(|v| v.abs() + 0.1);
        prop_assert!(fd_error(|t, v| Ok(t.safe_log(v)), &pos, seed) < 1e-5);
    }
}
