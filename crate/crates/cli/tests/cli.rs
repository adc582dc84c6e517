use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eegpath(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eegpath")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = eegpath(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, out: &str) {
    ok(dir, &["synth", "--n-per-class", "4", "--duration-s", "30", "--seed", "7", "--out", out]);
}

const TRAIN: &[&str] =
    &["train", "--data", "data", "--arch", "deep", "--epochs", "2", "--crop-stride", "300", "--seed", "1"];

#[test]
fn synth_train_eval_writes_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "data");
    assert_eq!(fs::read_to_string(d.join("data/dataset.tsv")).unwrap().lines().count(), 8);
    let stdout = ok(d, &[TRAIN, &["--out", "model"]].concat());
    assert!(stdout.starts_with("# eegpath train\n"));
    assert!(stdout.contains("train.epochs=2\n") && stdout.contains("arch=deep\n"));
    assert!(d.join("model/model.bin").exists());
    assert_eq!(fs::read_to_string(d.join("model/train_log.tsv")).unwrap().lines().count(), 3);

    ok(d, &["eval", "--data", "data", "--model", "model/model.bin", "--crop-stride", "300", "--out", "eval"]);
    let metrics = fs::read_to_string(d.join("eval/metrics.tsv")).unwrap();
    assert!(metrics.starts_with("trial_accuracy\t") && metrics.contains("\ncrop_accuracy\t"), "{metrics}");
    for f in ["confusion.svg", "confusion.txt", "predictions.tsv", "crop_metrics.tsv", "manifest.txt"] {
        assert!(d.join("eval").join(f).exists(), "{f}");
    }
    let manifest = fs::read_to_string(d.join("eval/manifest.txt")).unwrap();
    assert!(manifest.contains("run.command=eval\n") && manifest.contains("run.inputs=data,model/model.bin\n"));
}

#[test]
fn eval_without_model_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "data");
    let out = eegpath(tmp.path(), &["eval", "--data", "data", "--out", "e"]);
    assert_eq!(out.status.code(), Some(2));
    let out = eegpath(tmp.path(), &["eval", "--data", "data", "--model", "absent.bin", "--out", "e2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.bin"));
}

#[test]
fn missing_dataset_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = eegpath(tmp.path(), &["spectral-map", "--data", "nowhere", "--out", "s"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
}

#[test]
fn unknown_flag_is_a_usage_error_with_suggestion() {
    let tmp = tempfile::tempdir().unwrap();
    let out = eegpath(tmp.path(), &["train", "--seeds", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    let out = eegpath(tmp.path(), &["train", "--train-minutes", "3", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    let out = eegpath(tmp.path(), &["train", "--data", "d"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn spectral_map_writes_six_band_maps_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "data");
    ok(d, &["spectral-map", "--data", "data", "--out", "a"]);
    ok(d, &["spectral-map", "--data", "data", "--out", "b"]);
    for band in ["delta", "theta", "alpha", "low_beta", "high_beta", "low_gamma"] {
        let f = format!("{band}.svg");
        let a = fs::read(d.join("a").join(&f)).unwrap();
        assert!(a.starts_with(b"<svg"));
        assert_eq!(a, fs::read(d.join("b").join(&f)).unwrap(), "{f}");
    }
    let svgs = fs::read_dir(d.join("a"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
        .count();
    assert_eq!(svgs, 6);
}

#[test]
fn output_directory_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "data");
    let again = eegpath(d, &["synth", "--n-per-class", "4", "--duration-s", "30", "--out", "data"]);
    assert_eq!(again.status.code(), Some(1));
    ok(d, &["synth", "--n-per-class", "4", "--duration-s", "30", "--seed", "7", "--out", "data", "--force"]);
}

#[test]
fn reruns_are_byte_identical_and_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "data");
    fs::write(d.join("run.cfg"), "train.epochs=5\ntrain.batch_size=16\n").unwrap();
    ok(d, &[TRAIN, &["--config", "run.cfg", "--out", "m1"]].concat());
    ok(d, &[TRAIN, &["--config", "run.cfg", "--out", "m2"]].concat());
    let manifest = fs::read_to_string(d.join("m1/manifest.txt")).unwrap();
    assert!(manifest.contains("train.epochs=2\n") && manifest.contains("train.batch_size=16\n"));
    for f in ["model.bin", "train_log.tsv", "architecture.txt"] {
        assert_eq!(fs::read(d.join("m1").join(f)).unwrap(), fs::read(d.join("m2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn synthetic_dataset_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d, "a");
    synth(d, "b");
    assert_eq!(fs::read(d.join("a/dataset.tsv")).unwrap(), fs::read(d.join("b/dataset.tsv")).unwrap());
    assert_eq!(
        fs::read(d.join("a/recordings/s0003.eegrec")).unwrap(),
        fs::read(d.join("b/recordings/s0003.eegrec")).unwrap()
    );
}
