use eegpath::eegdata::{synth_dataset, SignatureConfig};
use eegpath::hpo::{smbo_search, ConfigSpace, HyperParam, SmboConfig, TrialStatus};
use eegpath::kv::FlatConfig;
use eegpath::models::{ArchitectureConfig, Network};
use eegpath::training::{evaluate, train, TrainConfig};
use eegpath::Error;
use proptest::prelude::*;

fn space() -> ConfigSpace {
    ConfigSpace::new(vec![
        HyperParam::int("a", 0, 20, 3),
        HyperParam::choice("mode", &["x", "y"], "x"),
        HyperParam::int("b", -5, 5, 0).when("mode", "y"),
    ])
    .unwrap()
}

/// Deterministic in (config, fold); fails for some configurations.
fn objective(c: &FlatConfig, fold: usize, crash_mod: i64) -> eegpath::Result<f64> {
    let a: i64 = c.require_parsed("a")?;
    let b: i64 = c.parsed_or("b", 0)?;
    if crash_mod > 0 && (a + b).rem_euclid(crash_mod) == 0 {
        return Err(Error::Config("unbuildable".into()));
    }
    Ok(1.0 / (1.0 + ((a - 11) * (a - 11) + (b - 2) * (b - 2)) as f64) + 0.001 * fold as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn incumbent_trace_never_decreases(seed in any::<u64>(), crash_mod in 0i64..5, budget in 10usize..30) {
        let r = smbo_search(&space(), |c: &FlatConfig, f: usize| objective(c, f, crash_mod), &SmboConfig::new(budget, seed));
        let r = match r {
            Err(Error::NoIncumbent) => return Ok(()),
            other => other.unwrap(),
        };
        prop_assert_eq!(r.history.len(), budget);
        prop_assert!(r.incumbent_trace.windows(2).all(|w| w[1] >= w[0]));
        for t in &r.history {
            match objective(&t.config, t.fold, crash_mod) {
                Ok(s) => prop_assert_eq!((t.status, t.score), (TrialStatus::Ok, s)),
                Err(_) => prop_assert_eq!((t.status, t.score), (TrialStatus::Crash, 0.0)),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn training_is_reproducible_and_aggregation_consistent(seed in 0u64..1000) {
        let data = synth_dataset(2, 10.0, seed, &SignatureConfig::default()).recordings;
        let mut cfg = ArchitectureConfig::shallow_default();
        cfg.blocks[0].filters = 4;
        let tc = TrainConfig { epochs: 1, crop_stride: 200, batch_size: 8, ..TrainConfig::new(seed) };
        let run = || {
            let mut net = Network::build(&cfg, seed).unwrap();
            train(&mut net, &data, &tc).unwrap();
            evaluate(&net, &data, 150).unwrap()
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.trial_classes(), a.recomputed_trial_classes());
    }
}
