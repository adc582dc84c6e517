use std::fmt::Write;

use eegpath::eegdata::{
    crop_batch, generate_crops, load_recording, preprocess, save_recording, subject_split, synth_dataset, Crop,
    Manifest, PreprocessConfig, Recording, SignatureConfig, Split,
};
use eegpath::evaluation::{metrics_file, render_confusion_svg, render_confusion_text, ConfusionMatrix};
use eegpath::hpo::{
    architecture_from_flat, architecture_space, describe_incumbent, history_to_text, smbo_search,
    ArchitectureObjective, SmboConfig, DEFAULT_TIME_BUDGET_S,
};
use eegpath::kv::FlatConfig;
use eegpath::models::{build_from_hpo, load_network, save_network, ArchKind, ArchitectureConfig, Network};
use eegpath::perturbviz::{correlation_map, network_predictor, run_perturbations, PerturbConfig, MAX_CROPS};
use eegpath::reports::{top_words, word_ratios, word_stats_tsv, DEFAULT_MIN_COUNT};
use eegpath::spectral::{class_contrast, default_bands, render_topomap, topomaps_to_tsv, TopoMap};
use eegpath::training::{
    curve_to_tsv, evaluate, grid_to_tsv, limit_all, moving_average_accuracy, reduced_duration_grid, train,
    MinutesLimit, TrainConfig, TrialResult,
};
use eegpath::Error;

use crate::args::Command;
use crate::run::{CliError, CliResult, Run, DATASET_FILE};

fn defaults(command: &Command) -> FlatConfig {
    let mut c = FlatConfig::new();
    c.set("seed", 0);
    let train = |c: &mut FlatConfig| {
        let mut t = TrainConfig::new(0).to_flat();
        t.remove("train.seed");
        c.merge(&t);
        c.set("arch", "deep");
    };
    match command {
        Command::Synth(_) => {
            c.set("synth.n_per_class", 100);
            c.set("synth.duration_s", 120);
            c.set("synth.train_fraction", 0.8);
            c.merge(&SignatureConfig::default().to_flat());
        }
        Command::Preprocess(_) => {
            let p = PreprocessConfig::default();
            c.set("preprocess.electrodes", p.electrode_subset.join(","));
            c.set("preprocess.skip_head_s", p.skip_head_seconds);
            c.set("preprocess.max_keep_s", p.max_keep_seconds);
            c.set("preprocess.clip_uv", p.clip_uv);
            c.set("preprocess.target_rate_hz", p.target_rate_hz);
        }
        Command::SpectralMap(_) => {}
        Command::Train(_) | Command::ReducedGrid(_) | Command::Eval(_) | Command::ReportWords(_) => train(&mut c),
        Command::MovingAvg(_) => {
            train(&mut c);
            c.set("curve.window_s", 60);
            c.set("curve.step_s", 30);
        }
        Command::PerturbMap(_) => {
            train(&mut c);
            let p = PerturbConfig::default();
            c.set("perturb.repetitions", p.n_repetitions);
            c.set("perturb.noise_scale", p.noise_scale);
            c.set("perturb.max_crops", MAX_CROPS);
        }
        Command::HpoSearch(_) => {
            train(&mut c);
            c.set("hpo.budget", 30);
            c.set("hpo.subset", 1500);
            c.set("hpo.n_folds", 10);
            c.set("hpo.time_budget_s", DEFAULT_TIME_BUDGET_S);
            c.set("hpo.evaluate_incumbent", false);
        }
    }
    if matches!(command, Command::ReportWords(_)) {
        c.set("words.top_k", 20);
        c.set("words.min_count", DEFAULT_MIN_COUNT);
    }
    c
}

pub fn execute(command: &Command) -> CliResult<()> {
    let common = command.common();
    let run = Run::start(command.name(), defaults(command), common.config.as_deref(), &command.flags(), common.force)?;
    match command {
        Command::Synth(_) => synth(&run),
        Command::Preprocess(_) => preprocess_cmd(&run),
        Command::Train(_) => train_cmd(&run),
        Command::Eval(_) => eval_cmd(&run),
        Command::ReducedGrid(_) => reduced_grid(&run),
        Command::MovingAvg(_) => moving_avg(&run),
        Command::SpectralMap(_) => spectral_map(&run),
        Command::PerturbMap(_) => perturb_map(&run),
        Command::ReportWords(_) => report_words(&run),
        Command::HpoSearch(_) => hpo_search(&run),
    }
}

fn write_dataset(run: &Run, recs: &[Recording], split_of: impl Fn(usize) -> Split) -> CliResult<()> {
    let mut manifest = Manifest::default();
    for (i, r) in recs.iter().enumerate() {
        let rel = format!("recordings/{}.eegrec", r.subject_id);
        let path = run.path(&rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
        }
        save_recording(r, &path)?;
        manifest.entries.push((rel.into(), split_of(i)));
    }
    run.write(DATASET_FILE, manifest.to_text())
}

fn synth(run: &Run) -> CliResult<()> {
    let sig = SignatureConfig::from_flat(&run.cfg)?;
    let n: usize = run.get("synth.n_per_class")?;
    let duration: f64 = run.get("synth.duration_s")?;
    let fraction: f64 = run.get("synth.train_fraction")?;
    if n == 0 || duration.is_nan() || duration <= 0.0 || !(0.0..=1.0).contains(&fraction) {
        return Err(CliError::Usage("need n_per_class > 0, duration_s > 0, train_fraction in [0, 1]".into()));
    }
    let seed: u64 = run.get("seed")?;
    let data = synth_dataset(n, duration, seed, &sig);
    let (train_idx, _) = subject_split(&data.recordings, fraction, seed);
    write_dataset(
        run,
        &data.recordings,
        |i| if train_idx.binary_search(&i).is_ok() { Split::Train } else { Split::Eval },
    )?;
    println!("wrote {} recordings ({} train)", data.recordings.len(), train_idx.len());
    Ok(())
}

fn preprocess_cmd(run: &Run) -> CliResult<()> {
    let cfg = PreprocessConfig {
        electrode_subset: run
            .get::<String>("preprocess.electrodes")?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect(),
        skip_head_seconds: run.get("preprocess.skip_head_s")?,
        max_keep_seconds: run.get("preprocess.max_keep_s")?,
        clip_uv: run.get("preprocess.clip_uv")?,
        target_rate_hz: run.get("preprocess.target_rate_hz")?,
    };
    let manifest = run.dataset()?;
    let mut recs = Vec::new();
    let mut splits = Vec::new();
    for (path, split) in &manifest.entries {
        recs.push(preprocess(&load_recording(path)?, &cfg)?);
        splits.push(*split);
    }
    write_dataset(run, &recs, |i| splits[i])?;
    println!("preprocessed {} recordings", recs.len());
    Ok(())
}

fn train_config(run: &Run) -> CliResult<TrainConfig> {
    Ok(TrainConfig::from_flat(&run.cfg)?)
}

fn architecture(run: &Run, n_electrodes: usize) -> CliResult<ArchitectureConfig> {
    let kind: ArchKind = run.cfg.require_parsed("arch")?;
    let mut arch = ArchitectureConfig::default_for(kind);
    arch.n_electrodes = n_electrodes;
    Ok(arch)
}

fn train_cmd(run: &Run) -> CliResult<()> {
    let cfg = train_config(run)?;
    let recs = limit_all(&run.load_split(Split::Train)?, cfg.train_minutes)?;
    let arch = architecture(run, recs[0].n_electrodes())?;
    let mut net = Network::build(&arch, run.get("seed")?)?;
    let log = train(&mut net, &recs, &cfg)?;
    save_network(&net, &run.path("model.bin"))?;
    run.write("train_log.tsv", log.to_tsv())?;
    run.write("architecture.txt", arch.to_flat().to_text())?;
    if let Some(last) = log.epochs.last() {
        println!("epoch {} loss {:.6} trial accuracy {:.4}", last.epoch, last.loss, last.trial_accuracy);
    }
    Ok(())
}

fn model(run: &Run) -> CliResult<Network> {
    let path = run.cfg.get("model").ok_or_else(|| Error::Data("no trained model given; pass --model".into()))?;
    Ok(load_network(path.as_ref())?)
}

fn eval_set(run: &Run, cfg: &TrainConfig) -> CliResult<Vec<Recording>> {
    Ok(limit_all(&run.load_split(Split::Eval)?, cfg.test_minutes)?)
}

fn eval_cmd(run: &Run) -> CliResult<()> {
    let cfg = train_config(run)?;
    let net = model(run)?;
    let recs = eval_set(run, &cfg)?;
    let result = evaluate(&net, &recs, cfg.crop_stride)?;
    let trial = ConfusionMatrix::from_pairs(result.trial_classes().into_iter().zip(result.labels.iter().copied()))?;
    let crop = ConfusionMatrix::from_pairs(result.crop_pairs())?;
    let extra = [("trial_accuracy", result.trial_accuracy()), ("crop_accuracy", result.crop_accuracy())];
    run.write("metrics.tsv", metrics_file(&extra, &trial)?)?;
    run.write("crop_metrics.tsv", metrics_file(&[], &crop)?)?;
    run.write("confusion.txt", render_confusion_text(&trial)?)?;
    run.write("confusion.svg", render_confusion_svg(&trial)?)?;
    run.write("predictions.tsv", predictions_tsv(&recs, &result))?;
    println!("trial accuracy {:.4}, crop accuracy {:.4}", result.trial_accuracy(), result.crop_accuracy());
    Ok(())
}

fn predictions_tsv(recs: &[Recording], result: &TrialResult) -> String {
    let mut s = String::from("subject\tlabel\tpredicted\tlog_p_normal\tlog_p_pathological\tcrops\n");
    for ((r, p), &y) in recs.iter().zip(&result.predictions).zip(&result.labels) {
        let _ = writeln!(
            s,
            "{}\t{y}\t{}\t{:.6}\t{:.6}\t{}",
            r.subject_id,
            p.class,
            p.mean_log_probs[0],
            p.mean_log_probs[1],
            p.crops.len()
        );
    }
    s
}

fn reduced_grid(run: &Run) -> CliResult<()> {
    let cfg = train_config(run)?;
    let train_set = run.load_split(Split::Train)?;
    let eval_set = run.load_split(Split::Eval)?;
    let arch = architecture(run, train_set[0].n_electrodes())?;
    let cells = reduced_duration_grid(&arch, run.get("seed")?, &train_set, &eval_set, &MinutesLimit::GRID, &cfg)?;
    run.write("grid.tsv", grid_to_tsv(&cells))?;
    println!("{} grid cells", cells.len());
    Ok(())
}

fn moving_avg(run: &Run) -> CliResult<()> {
    let cfg = train_config(run)?;
    let net = model(run)?;
    let recs = eval_set(run, &cfg)?;
    let points =
        moving_average_accuracy(&net, &recs, run.get("curve.window_s")?, run.get("curve.step_s")?, cfg.crop_stride)?;
    run.write("curve.tsv", curve_to_tsv(&points))?;
    println!("{} curve points", points.len());
    Ok(())
}

fn write_maps(run: &Run, maps: &[TopoMap], table: &str) -> CliResult<()> {
    for m in maps {
        run.write(&format!("{}.svg", m.band), render_topomap(m))?;
    }
    run.write(table, topomaps_to_tsv(maps))
}

fn spectral_map(run: &Run) -> CliResult<()> {
    let manifest = run.dataset()?;
    let recs: Vec<Recording> =
        manifest.entries.iter().map(|(p, _)| load_recording(p)).collect::<eegpath::Result<_>>()?;
    let contrast = class_contrast(&recs, &default_bands())?;
    write_maps(run, &contrast.maps, "log_ratio.tsv")?;
    println!("{} band maps, {} floored cells", contrast.maps.len(), contrast.floored_cells);
    Ok(())
}

fn perturb_map(run: &Run) -> CliResult<()> {
    let cfg = train_config(run)?;
    let net = model(run)?;
    let recs = eval_set(run, &cfg)?;
    let max_crops: usize = run.get("perturb.max_crops")?;
    if max_crops == 0 || max_crops > MAX_CROPS {
        return Err(CliError::Usage(format!("perturb.max_crops must be in 1..={MAX_CROPS}")));
    }
    let len = net.input_len();
    let mut crops: Vec<Crop> = Vec::new();
    for (i, r) in recs.iter().enumerate() {
        crops.extend(generate_crops(r, i, len, len)?);
    }
    if crops.len() > max_crops {
        let n = crops.len();
        crops = (0..max_crops).map(|k| crops[k * n / max_crops]).collect();
    }
    let batch = crop_batch(&recs, &crops)?;
    let pcfg = PerturbConfig {
        n_repetitions: run.get("perturb.repetitions")?,
        noise_scale: run.get("perturb.noise_scale")?,
        seed: run.get("seed")?,
    };
    let result =
        run_perturbations(network_predictor(&net), &batch, &recs[0].electrode_labels, recs[0].sample_rate_hz, &pcfg)?;
    let map = correlation_map(&result, &default_bands())?;
    write_maps(run, &map.maps, "correlation.tsv")?;
    if map.low_repetitions {
        println!("warning: {} repetitions give noisy correlations", pcfg.n_repetitions);
    }
    println!("{} crops, {} repetitions", crops.len(), pcfg.n_repetitions);
    Ok(())
}

fn report_words(run: &Run) -> CliResult<()> {
    let cfg = train_config(run)?;
    let net = model(run)?;
    let recs = eval_set(run, &cfg)?;
    let result = evaluate(&net, &recs, cfg.crop_stride)?;
    let (mut incorrect, mut correct) = (Vec::new(), Vec::new());
    for ((r, p), &y) in recs.iter().zip(result.trial_classes()).zip(&result.labels) {
        let text = r.report_text.as_deref().unwrap_or("");
        if p == y { &mut correct } else { &mut incorrect }.push(text);
    }
    let stats = word_ratios(&incorrect, &correct)?;
    run.write("words.tsv", word_stats_tsv(&stats))?;
    let top = top_words(&stats, run.get("words.top_k")?, run.get("words.min_count")?);
    let mut s = String::new();
    for (title, list) in [("infinite", &top.infinite), ("largest", &top.largest), ("smallest", &top.smallest)] {
        let _ = writeln!(s, "# {title}");
        s.push_str(&word_stats_tsv(list).lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
    }
    run.write("top_words.txt", s)?;
    println!("{} misclassified of {} recordings, {} words", incorrect.len(), recs.len(), stats.len());
    Ok(())
}

fn hpo_search(run: &Run) -> CliResult<()> {
    let cfg = train_config(run)?;
    let subset: usize = run.get("hpo.subset")?;
    let mut recs = run.load_split(Split::Train)?;
    recs.truncate(subset);
    let n_folds: usize = run.get("hpo.n_folds")?;
    if n_folds < 2 || recs.len() < n_folds {
        return Err(CliError::Usage(format!("need 2 <= n_folds <= {} recordings", recs.len())));
    }
    let seed: u64 = run.get("seed")?;
    let objective = ArchitectureObjective {
        recordings: limit_all(&recs, cfg.train_minutes)?,
        n_folds,
        train: cfg.clone(),
        eval_crop_stride: cfg.crop_stride,
        network_seed: seed,
        time_budget_s: run.get("hpo.time_budget_s")?,
    };
    let smbo = SmboConfig { n_folds, ..SmboConfig::new(run.get("hpo.budget")?, seed) };
    let result = smbo_search(&architecture_space(), |c: &FlatConfig, f: usize| objective.evaluate(c, f), &smbo)?;
    run.write("history.tsv", history_to_text(&result.history))?;
    run.write("incumbent.cfg", result.incumbent.config.to_text())?;

    let eval_accuracy = if run.get::<bool>("hpo.evaluate_incumbent")? {
        let arch = architecture_from_flat(&result.incumbent.config)?;
        let mut net = build_from_hpo(&arch, seed)?;
        train(&mut net, &objective.recordings, &cfg)?;
        let eval_set = eval_set(run, &cfg)?;
        Some(evaluate(&net, &eval_set, cfg.crop_stride)?.trial_accuracy())
    } else {
        None
    };
    let fs = recs[0].sample_rate_hz;
    let summary = describe_incumbent(&result.incumbent, fs, eval_accuracy)?;
    run.write("incumbent.txt", &summary)?;
    print!("{summary}");
    let ok = result.history.iter().filter(|t| t.score > 0.0).count();
    println!("{} trials, {ok} scored above zero", result.history.len());
    Ok(())
}
