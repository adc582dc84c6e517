use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use eegpath::kv::FlatConfig;

#[derive(Debug, Parser)]
#[command(name = "eegpath", version, about = "Decode pathological versus normal EEG with ConvNets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic dataset with a train/eval split.
    Synth(SynthArgs),
    /// Select electrodes, drop the head, cap the duration, clip and resample.
    Preprocess(DataArgs),
    /// Train a network on the train split.
    Train(TrainArgs),
    /// Evaluate a trained network on the eval split.
    Eval(ModelArgs),
    /// Accuracy with reduced training and test durations.
    ReducedGrid(TrainArgs),
    /// Crop accuracy in sliding windows over recording time.
    MovingAvg(MovingAvgArgs),
    /// Pathological/normal band-power log ratio topomaps.
    SpectralMap(DataArgs),
    /// Input-perturbation correlation topomaps of a trained network.
    PerturbMap(PerturbArgs),
    /// Report words over- and under-represented among misclassified recordings.
    ReportWords(ReportWordsArgs),
    /// Model-based architecture search by cross-validation on the train split.
    HpoSearch(HpoArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Preprocess(_) => "preprocess",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::ReducedGrid(_) => "reduced-grid",
            Command::MovingAvg(_) => "moving-avg",
            Command::SpectralMap(_) => "spectral-map",
            Command::PerturbMap(_) => "perturb-map",
            Command::ReportWords(_) => "report-words",
            Command::HpoSearch(_) => "hpo-search",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Synth(a) => &a.common,
            Command::Preprocess(a) | Command::SpectralMap(a) => &a.common,
            Command::Train(a) | Command::ReducedGrid(a) => &a.data.common,
            Command::Eval(a) => &a.data.common,
            Command::MovingAvg(a) => &a.model.data.common,
            Command::PerturbMap(a) => &a.model.data.common,
            Command::ReportWords(a) => &a.model.data.common,
            Command::HpoSearch(a) => &a.train.data.common,
        }
    }

    /// Settings given explicitly on the command line.
    pub fn flags(&self) -> FlatConfig {
        let mut c = FlatConfig::new();
        self.common().apply(&mut c);
        match self {
            Command::Synth(a) => {
                put(&mut c, "synth.n_per_class", a.n_per_class);
                put(&mut c, "synth.duration_s", a.duration_s);
                put(&mut c, "synth.train_fraction", a.train_fraction);
            }
            Command::Preprocess(a) | Command::SpectralMap(a) => a.apply(&mut c),
            Command::Train(a) | Command::ReducedGrid(a) => a.apply(&mut c),
            Command::Eval(a) => a.apply(&mut c),
            Command::MovingAvg(a) => {
                a.model.apply(&mut c);
                put(&mut c, "curve.window_s", a.window_s);
                put(&mut c, "curve.step_s", a.step_s);
            }
            Command::PerturbMap(a) => {
                a.model.apply(&mut c);
                put(&mut c, "perturb.repetitions", a.repetitions);
                put(&mut c, "perturb.noise_scale", a.noise_scale);
                put(&mut c, "perturb.max_crops", a.max_crops);
            }
            Command::ReportWords(a) => {
                a.model.apply(&mut c);
                put(&mut c, "words.top_k", a.top_k);
                put(&mut c, "words.min_count", a.min_count);
            }
            Command::HpoSearch(a) => {
                a.train.apply(&mut c);
                put(&mut c, "hpo.budget", a.budget);
                put(&mut c, "hpo.subset", a.subset);
                put(&mut c, "hpo.n_folds", a.n_folds);
                put(&mut c, "hpo.time_budget_s", a.time_budget_s);
                if a.evaluate_incumbent {
                    c.set("hpo.evaluate_incumbent", true);
                }
            }
        }
        c
    }
}

fn put<T: std::fmt::Display>(c: &mut FlatConfig, key: &str, v: Option<T>) {
    if let Some(v) = v {
        c.set(key, v);
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed for data generation, initialization and crop order.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum number of worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; must not exist yet unless --force is given.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write into an existing output directory.
    #[arg(long)]
    pub force: bool,
}

impl Common {
    fn apply(&self, c: &mut FlatConfig) {
        put(c, "seed", self.seed);
        put(c, "workers", self.workers);
        put(c, "out", self.out.as_ref().map(|p| p.display()));
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Recordings per class.
    #[arg(long)]
    pub n_per_class: Option<usize>,
    /// Seconds per recording.
    #[arg(long)]
    pub duration_s: Option<f64>,
    /// Fraction of subjects assigned to the train split.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory holding dataset.tsv.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

impl DataArgs {
    fn apply(&self, c: &mut FlatConfig) {
        put(c, "data", self.data.as_ref().map(|p| p.display()));
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = ["deep", "shallow", "linear"])]
    pub arch: Option<String>,
    /// Samples between consecutive crop starts.
    #[arg(long)]
    pub crop_stride: Option<usize>,
    /// Minutes of each training recording used.
    #[arg(long, value_parser = ["1", "2", "4", "8", "16", "all"])]
    pub train_minutes: Option<String>,
    /// Minutes of each evaluation recording used.
    #[arg(long, value_parser = ["1", "2", "4", "8", "16", "all"])]
    pub test_minutes: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

impl TrainArgs {
    fn apply(&self, c: &mut FlatConfig) {
        self.data.apply(c);
        put(c, "arch", self.arch.as_ref());
        put(c, "train.crop_stride", self.crop_stride);
        put(c, "train.train_minutes", self.train_minutes.as_ref());
        put(c, "train.test_minutes", self.test_minutes.as_ref());
        put(c, "train.epochs", self.epochs);
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Trained network file written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub crop_stride: Option<usize>,
    #[arg(long, value_parser = ["1", "2", "4", "8", "16", "all"])]
    pub test_minutes: Option<String>,
}

impl ModelArgs {
    fn apply(&self, c: &mut FlatConfig) {
        self.data.apply(c);
        put(c, "model", self.model.as_ref().map(|p| p.display()));
        put(c, "train.crop_stride", self.crop_stride);
        put(c, "train.test_minutes", self.test_minutes.as_ref());
    }
}

#[derive(Debug, Args)]
pub struct MovingAvgArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub window_s: Option<f64>,
    #[arg(long)]
    pub step_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Noise standard deviation relative to the amplitude spread per cell.
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long)]
    pub max_crops: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportWordsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub min_count: Option<u64>,
}

#[derive(Debug, Args)]
pub struct HpoArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Number of trials.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Earliest train-split recordings used for cross-validation.
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long)]
    pub n_folds: Option<usize>,
    /// Per-trial limit in seconds.
    #[arg(long)]
    pub time_budget_s: Option<f64>,
    /// Retrain the incumbent on the subset and report eval-split accuracy.
    #[arg(long)]
    pub evaluate_incumbent: bool,
}
