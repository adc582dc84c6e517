use super::*;
use crate::eegdata::{synth_dataset, Label, Recording, SignatureConfig};
use crate::models::{ArchitectureConfig, Network};
use crate::numcore::Tensor;
use crate::Error;

fn toy_set(n_per_class: usize, seconds: f64) -> Vec<Recording> {
    synth_dataset(n_per_class, seconds, 21, &SignatureConfig::default()).recordings
}

fn quick(seed: u64) -> TrainConfig {
    TrainConfig { epochs: 3, crop_stride: 100, batch_size: 16, ..TrainConfig::new(seed) }
}

fn shallow() -> Network {
    Network::build(&ArchitectureConfig::shallow_default(), 3).unwrap()
}

fn flat_params(net: &Network) -> Vec<f64> {
    net.params.iter().flat_map(|p| p.value.data().to_vec()).collect()
}

#[test]
fn loss_decreases_on_toy_set() {
    let data = toy_set(1, 20.0);
    let mut net = shallow();
    let log = train(&mut net, &data, &quick(1)).unwrap();
    let l = log.losses();
    assert_eq!(l.len(), 3);
    assert!(l[2] < l[0], "{l:?}");
    assert!(log.to_tsv().starts_with("epoch\tloss\tcrop_acc\ttrial_acc\n1\t"));
}

#[test]
fn training_is_deterministic() {
    let data = toy_set(1, 12.0);
    let mut a = shallow();
    let mut b = shallow();
    let cfg = TrainConfig { epochs: 1, ..quick(5) };
    assert_eq!(train(&mut a, &data, &cfg).unwrap(), train(&mut b, &data, &cfg).unwrap());
    let (pa, pb) = (flat_params(&a), flat_params(&b));
    assert!(pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let data = toy_set(1, 12.0);
    let mut net = shallow();
    let before = flat_params(&net);
    let mut cfg = TrainConfig { epochs: 1, ..quick(2) };
    cfg.adam.lr = 0.0;
    train(&mut net, &data, &cfg).unwrap();
    assert_eq!(flat_params(&net), before);
}

#[test]
fn training_errors() {
    let mut net = shallow();
    assert!(matches!(train(&mut net, &[], &quick(0)), Err(Error::Data(_))));
    let data = toy_set(1, 12.0);
    let mut cfg = TrainConfig { epochs: 2, batch_size: 4, ..quick(0) };
    cfg.adam.lr = f64::INFINITY;
    let r = train(&mut net, &data, &cfg);
    assert!(matches!(r, Err(Error::Divergence { epoch: 1 })), "{r:?}");
    let mut unlabeled = data[0].clone();
    unlabeled.label = Label::Unlabeled;
    assert!(matches!(train(&mut net, &[unlabeled], &quick(0)), Err(Error::Data(_))));
}

#[test]
fn single_crop_recording_prediction_equals_crop() {
    let data = toy_set(1, 10.0);
    let mut net = shallow();
    net.calibrate_batch_norm(
        &crate::eegdata::crop_batch(&data, &crate::eegdata::generate_crops(&data[0], 0, 609, 100).unwrap()).unwrap(),
    )
    .unwrap();
    let rec = data[0].slice_time(0, 609).unwrap();
    let p = predict_recording(&mut net, &rec, 60).unwrap();
    assert_eq!(p.crops.len(), 1);
    assert_eq!(p.mean_log_probs, p.crop_log_probs[0]);
    assert_eq!(p.class, argmax2(p.crop_log_probs[0]));
    let short = data[0].slice_time(0, 608).unwrap();
    assert!(matches!(predict_recording(&mut net, &short, 60), Err(Error::TooShort(_))));
}

#[test]
fn ties_go_to_normal() {
    assert_eq!(argmax2([-0.5, -0.5]), 0);
    assert_eq!(argmax2([-0.7, -0.6]), 1);
    let lp = [[0.2f64.ln(), 0.8f64.ln()], [0.8f64.ln(), 0.2f64.ln()]];
    let r = TrialResult {
        predictions: vec![RecordingPrediction {
            class: 0,
            mean_log_probs: [(lp[0][0] + lp[1][0]) / 2.0, (lp[0][1] + lp[1][1]) / 2.0],
            crops: vec![],
            crop_log_probs: lp.to_vec(),
        }],
        labels: vec![1],
    };
    assert_eq!(r.recomputed_trial_classes(), [0]);
    assert_eq!(r.crop_pairs(), [(1, 1), (0, 1)]);
    assert_eq!(r.crop_accuracy(), 0.5);
    assert_eq!(r.trial_accuracy(), 0.0);
}

#[test]
fn evaluation_aggregates_consistently() {
    let data = toy_set(2, 15.0);
    let mut net = shallow();
    train(&mut net, &data, &TrainConfig { epochs: 1, ..quick(4) }).unwrap();
    let r = evaluate(&net, &data, 150).unwrap();
    assert_eq!(r.trial_classes(), r.recomputed_trial_classes());
    assert_eq!(r.labels, [0, 1, 0, 1]);
    let again = evaluate(&net, &data, 150).unwrap();
    assert_eq!(r, again);
}

#[test]
fn minutes_limits() {
    assert_eq!("all".parse::<MinutesLimit>().unwrap(), MinutesLimit::All);
    assert_eq!("4".parse::<MinutesLimit>().unwrap(), MinutesLimit::Minutes(4));
    assert!("3".parse::<MinutesLimit>().is_err());
    assert_eq!(MinutesLimit::GRID.map(|m| m.to_string()), ["1", "2", "4", "8", "16", "all"]);
    let rec = &toy_set(1, 90.0)[0];
    assert_eq!(limit_recording(rec, MinutesLimit::Minutes(1)).unwrap().n_samples(), 6000);
    assert_eq!(limit_recording(rec, MinutesLimit::Minutes(2)).unwrap(), *rec);
    assert_eq!(limit_recording(rec, MinutesLimit::All).unwrap(), *rec);
}

#[test]
fn config_flat_round_trip() {
    let mut cfg = TrainConfig::new(9);
    cfg.train_minutes = MinutesLimit::Minutes(8);
    cfg.adam.lr = 5e-4;
    assert_eq!(TrainConfig::from_flat(&cfg.to_flat()).unwrap(), cfg);
    assert!(TrainConfig::from_flat(&crate::kv::FlatConfig::new()).is_err());
}

#[test]
fn moving_average_window_spanning_recording_is_overall_accuracy() {
    let data: Vec<Recording> = toy_set(1, 30.0);
    let mut net = shallow();
    train(&mut net, &data, &TrainConfig { epochs: 1, ..quick(1) }).unwrap();
    let r = evaluate(&net, &data, 100).unwrap();
    let curve = moving_average_accuracy(&net, &data, 30.0, 10.0, 100).unwrap();
    assert_eq!(curve.len(), 1);
    let per_rec: Vec<f64> = r
        .predictions
        .iter()
        .zip(&r.labels)
        .map(|(p, &y)| p.crop_classes().filter(|&c| c == y).count() as f64 / p.crops.len() as f64)
        .collect();
    assert!((curve[0].accuracy - per_rec.iter().sum::<f64>() / 2.0).abs() < 1e-12);
    assert_eq!(curve[0].center_s, 15.0);
    let longer = moving_average_accuracy(&net, &data, 60.0, 10.0, 100).unwrap();
    assert_eq!(longer, curve);
    let sliding = moving_average_accuracy(&net, &data, 10.0, 5.0, 100).unwrap();
    assert_eq!(sliding.iter().map(|p| p.center_s).collect::<Vec<_>>(), [5.0, 10.0, 15.0, 20.0, 25.0]);
}

#[test]
fn constant_predictor_gives_flat_curve() {
    let cfg = ArchitectureConfig::linear_default();
    let mut net = Network::build(&cfg, 0).unwrap();
    for p in net.params.iter_mut() {
        p.value = Tensor::zeros(p.value.shape());
    }
    let data = toy_set(2, 40.0);
    let curve = moving_average_accuracy(&net, &data, 10.0, 5.0, 50).unwrap();
    assert!(curve.len() > 3);
    assert!(curve.iter().all(|p| p.accuracy == 0.5));
}
