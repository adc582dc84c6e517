use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::FlatConfig;
use crate::numcore::AdamConfig;

/// How much of each recording to use, counted from its (already trimmed)
/// start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum MinutesLimit {
    Minutes(u32),
    #[default]
    All,
}

impl MinutesLimit {
    pub const GRID: [MinutesLimit; 6] = [
        MinutesLimit::Minutes(1),
        MinutesLimit::Minutes(2),
        MinutesLimit::Minutes(4),
        MinutesLimit::Minutes(8),
        MinutesLimit::Minutes(16),
        MinutesLimit::All,
    ];

    pub fn seconds(self) -> Option<f64> {
        match self {
            MinutesLimit::Minutes(m) => Some(60.0 * m as f64),
            MinutesLimit::All => None,
        }
    }
}

impl fmt::Display for MinutesLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MinutesLimit::Minutes(m) => write!(f, "{m}"),
            MinutesLimit::All => f.write_str("all"),
        }
    }
}

impl FromStr for MinutesLimit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" | "inf" | "∞" => Ok(MinutesLimit::All),
            other => match other.parse::<u32>() {
                Ok(m @ (1 | 2 | 4 | 8 | 16)) => Ok(MinutesLimit::Minutes(m)),
                _ => Err(Error::Config(format!("minutes limit must be one of 1, 2, 4, 8, 16, all; got {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub crop_stride: usize,
    pub seed: u64,
    pub train_minutes: MinutesLimit,
    pub test_minutes: MinutesLimit,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            adam: AdamConfig::default(),
            crop_stride: 60,
            seed,
            train_minutes: MinutesLimit::All,
            test_minutes: MinutesLimit::All,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.crop_stride == 0 {
            return Err(Error::Config("epochs, batch_size and crop_stride must be positive".into()));
        }
        let a = &self.adam;
        if !(a.lr >= 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return Err(Error::Config(format!("invalid Adam settings {a:?}")));
        }
        Ok(())
    }

    pub fn to_flat(&self) -> FlatConfig {
        let mut c = FlatConfig::new();
        c.set("train.epochs", self.epochs);
        c.set("train.batch_size", self.batch_size);
        c.set("train.lr", self.adam.lr);
        c.set("train.beta1", self.adam.beta1);
        c.set("train.beta2", self.adam.beta2);
        c.set("train.epsilon", self.adam.epsilon);
        c.set("train.crop_stride", self.crop_stride);
        c.set("train.seed", self.seed);
        c.set("train.train_minutes", self.train_minutes);
        c.set("train.test_minutes", self.test_minutes);
        c
    }

    /// The seed is required; other keys default.
    pub fn from_flat(c: &FlatConfig) -> Result<Self> {
        let d = Self::new(c.require_parsed("train.seed")?);
        let cfg = Self {
            epochs: c.parsed_or("train.epochs", d.epochs)?,
            batch_size: c.parsed_or("train.batch_size", d.batch_size)?,
            adam: AdamConfig {
                lr: c.parsed_or("train.lr", d.adam.lr)?,
                beta1: c.parsed_or("train.beta1", d.adam.beta1)?,
                beta2: c.parsed_or("train.beta2", d.adam.beta2)?,
                epsilon: c.parsed_or("train.epsilon", d.adam.epsilon)?,
            },
            crop_stride: c.parsed_or("train.crop_stride", d.crop_stride)?,
            seed: d.seed,
            train_minutes: c.parsed_or("train.train_minutes", d.train_minutes)?,
            test_minutes: c.parsed_or("train.test_minutes", d.test_minutes)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
