use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use eegpath::eegdata::{load_recording, Manifest, Recording, Split};
use eegpath::kv::FlatConfig;
use eegpath::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const DATASET_FILE: &str = "dataset.tsv";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::Config(_)) => EXIT_USAGE,
            CliError::Core(
                Error::Io { .. }
                | Error::Data(_)
                | Error::Format(_)
                | Error::Corruption(_)
                | Error::Electrode(_)
                | Error::TooShort(_)
                | Error::Parse { .. }
                | Error::EmptyInput(_)
                | Error::EmptyCorpus(_)
                | Error::Label { .. }
                | Error::InsufficientLength { .. }
                | Error::Band { .. },
            ) => EXIT_DATA,
            CliError::Core(_) => EXIT_RUNTIME,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Resolved configuration and output directory of one invocation.
pub struct Run {
    pub cfg: FlatConfig,
    pub out: PathBuf,
}

impl Run {
    /// Defaults, then the config file, then flags. Prints the result, checks
    /// and creates the output directory and writes its manifest.
    pub fn start(
        command: &str,
        defaults: FlatConfig,
        config_file: Option<&Path>,
        flags: &FlatConfig,
        force: bool,
    ) -> CliResult<Self> {
        let mut cfg = defaults;
        if let Some(path) = config_file {
            let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
            cfg.merge(&FlatConfig::parse(&text)?);
        }
        cfg.merge(flags);
        if !cfg.contains("train.seed") {
            if let Some(seed) = cfg.get("seed").map(str::to_string) {
                cfg.set("train.seed", seed);
            }
        }
        let out = PathBuf::from(cfg.get("out").ok_or_else(|| CliError::Usage("--out is required".into()))?);
        if let Some(n) = cfg.parsed::<usize>("workers")? {
            if n == 0 {
                return Err(CliError::Usage("--workers must be positive".into()));
            }
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }

        print!("# eegpath {command}\n{}", cfg.to_text());
        let occupied = out.exists() && fs::read_dir(&out).map_or(true, |mut d| d.next().is_some());
        if occupied && !force {
            return Err(CliError::Usage(format!(
                "output directory {} already exists; choose a new one or pass --force",
                out.display()
            )));
        }
        fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;

        let mut manifest = cfg.clone();
        manifest.set("run.command", command);
        manifest.set("run.version", env!("CARGO_PKG_VERSION"));
        manifest.set("run.out", out.display());
        let inputs: Vec<&str> = ["config", "data", "model"].iter().filter_map(|k| cfg.get(k)).collect();
        manifest.set("run.inputs", inputs.join(","));
        if let Some(p) = config_file {
            manifest.set("run.config_file", p.display());
        }
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        manifest.set("run.started_unix_s", now);
        let run = Run { cfg, out };
        run.write(MANIFEST_FILE, manifest.to_text())?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write(&self, name: &str, content: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
        }
        fs::write(&path, content).map_err(|e| Error::Io { path, source: e })?;
        Ok(())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.cfg.require_parsed(key)?)
    }

    pub fn input(&self, key: &str, flag: &str) -> CliResult<PathBuf> {
        self.cfg.get(key).map(PathBuf::from).ok_or_else(|| CliError::Usage(format!("{flag} is required")))
    }

    pub fn dataset(&self) -> CliResult<Manifest> {
        let data = self.input("data", "--data")?;
        let file = if data.is_dir() { data.join(DATASET_FILE) } else { data };
        Ok(Manifest::read(&file)?)
    }

    pub fn load_split(&self, split: Split) -> CliResult<Vec<Recording>> {
        let manifest = self.dataset()?;
        let recs: Vec<Recording> = manifest.paths(split).map(load_recording).collect::<eegpath::Result<_>>()?;
        if recs.is_empty() {
            return Err(Error::Data(format!("dataset has no {split} recordings")).into());
        }
        Ok(recs)
    }
}
