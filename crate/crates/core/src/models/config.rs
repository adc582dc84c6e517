use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::FlatConfig;

/// Number of output classes: normal and pathological.
pub const N_CLASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchKind {
    Deep,
    Shallow,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Nonlinearity {
    Elu,
    /// Square before pooling, logarithm after it.
    SquareLog,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolKind {
    Max,
    Mean,
}

macro_rules! text_enum {
    ($ty:ident { $($var:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$var),+];

            pub fn name(self) -> &'static str {
                match self { $($ty::$var => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($ty::$var),)+
                    other => Err(format!("unknown {} {other:?}", stringify!($ty))),
                }
            }
        }
    };
}

text_enum!(ArchKind { Deep => "deep", Shallow => "shallow", Linear => "linear" });
text_enum!(Nonlinearity { Elu => "elu", SquareLog => "square_log", Identity => "identity" });
text_enum!(PoolKind { Max => "max", Mean => "mean" });

/// One conv → batch norm → nonlinearity → pool stage. In the first block the
/// convolution is split into a temporal and a spatial part and `conv_stride`
/// applies to the spatial part.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockConfig {
    pub filters: usize,
    pub kernel_len: usize,
    pub conv_stride: usize,
    pub nonlinearity: Nonlinearity,
    pub pool: PoolKind,
    pub pool_len: usize,
    pub pool_stride: usize,
}

impl BlockConfig {
    fn deep(filters: usize) -> Self {
        Self {
            filters,
            kernel_len: 10,
            conv_stride: 3,
            nonlinearity: Nonlinearity::Elu,
            pool: PoolKind::Max,
            pool_len: 3,
            pool_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureConfig {
    pub kind: ArchKind,
    pub input_len_samples: usize,
    pub n_electrodes: usize,
    /// Ignored for [`ArchKind::Linear`].
    pub blocks: Vec<BlockConfig>,
    pub final_filter_len: usize,
    pub batch_norm: bool,
    /// Dropout probability before every convolution after the first block.
    pub dropout: f64,
}

impl ArchitectureConfig {
    /// 25-filter split first block, then 50/100/200-filter blocks; stride 3
    /// on each convolution preceding a stride-1 max pool.
    pub fn deep_default() -> Self {
        Self {
            kind: ArchKind::Deep,
            input_len_samples: 601,
            n_electrodes: 21,
            blocks: vec![BlockConfig::deep(25), BlockConfig::deep(50), BlockConfig::deep(100), BlockConfig::deep(200)],
            final_filter_len: 1,
            batch_norm: true,
            dropout: 0.0,
        }
    }

    /// 40 temporal and spatial filters, squaring, mean pooling 75/15, log.
    pub fn shallow_default() -> Self {
        Self {
            kind: ArchKind::Shallow,
            input_len_samples: 609,
            n_electrodes: 21,
            blocks: vec![BlockConfig {
                filters: 40,
                kernel_len: 25,
                conv_stride: 1,
                nonlinearity: Nonlinearity::SquareLog,
                pool: PoolKind::Mean,
                pool_len: 75,
                pool_stride: 15,
            }],
            final_filter_len: 35,
            batch_norm: true,
            dropout: 0.0,
        }
    }

    pub fn linear_default() -> Self {
        Self {
            kind: ArchKind::Linear,
            input_len_samples: 600,
            n_electrodes: 21,
            blocks: Vec::new(),
            final_filter_len: 1,
            batch_norm: false,
            dropout: 0.0,
        }
    }

    pub fn default_for(kind: ArchKind) -> Self {
        match kind {
            ArchKind::Deep => Self::deep_default(),
            ArchKind::Shallow => Self::shallow_default(),
            ArchKind::Linear => Self::linear_default(),
        }
    }

    /// Input samples feeding one output, computed back from the final layer.
    pub fn receptive_field(&self) -> usize {
        if self.kind == ArchKind::Linear {
            return self.input_len_samples;
        }
        self.blocks.iter().rev().fold(self.final_filter_len, |rf, b| {
            let pooled = (rf - 1) * b.pool_stride + b.pool_len;
            (pooled - 1) * b.conv_stride + b.kernel_len
        })
    }

    /// Product of all strides: shift in input samples between neighbouring
    /// outputs when the network is applied to longer inputs.
    pub fn temporal_output_stride(&self) -> usize {
        self.blocks.iter().map(|b| b.pool_stride * b.conv_stride).product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_len_samples == 0 || self.n_electrodes == 0 {
            return Err(Error::Config("input length and electrode count must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.kind == ArchKind::Linear {
            return Ok(());
        }
        if self.blocks.is_empty() {
            return Err(Error::Config("at least one block required".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            let extents = [b.filters, b.kernel_len, b.conv_stride, b.pool_len, b.pool_stride];
            if extents.contains(&0) {
                return Err(Error::Config(format!("block {i} has a zero extent")));
            }
        }
        if self.final_filter_len == 0 {
            return Err(Error::Config("final filter length must be positive".into()));
        }
        let rf = self.receptive_field();
        if rf != self.input_len_samples {
            return Err(Error::Config(format!(
                "receptive field {rf} samples does not equal input length {}",
                self.input_len_samples
            )));
        }
        Ok(())
    }

    pub fn to_flat(&self) -> FlatConfig {
        let mut c = FlatConfig::new();
        c.set("kind", self.kind);
        c.set("input_len_samples", self.input_len_samples);
        c.set("n_electrodes", self.n_electrodes);
        if self.kind == ArchKind::Linear {
            return c;
        }
        c.set("final_filter_len", self.final_filter_len);
        c.set("batch_norm", self.batch_norm);
        c.set("dropout", self.dropout);
        c.set("n_blocks", self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            c.set(format!("block{i}.filters"), b.filters);
            c.set(format!("block{i}.kernel_len"), b.kernel_len);
            c.set(format!("block{i}.conv_stride"), b.conv_stride);
            c.set(format!("block{i}.nonlinearity"), b.nonlinearity);
            c.set(format!("block{i}.pool"), b.pool);
            c.set(format!("block{i}.pool_len"), b.pool_len);
            c.set(format!("block{i}.pool_stride"), b.pool_stride);
        }
        c
    }

    /// Missing keys fall back to the default architecture of the given kind.
    pub fn from_flat(c: &FlatConfig) -> Result<Self> {
        let kind: ArchKind = c.require_parsed("kind")?;
        let base = Self::default_for(kind);
        let mut cfg = Self {
            kind,
            input_len_samples: c.parsed_or("input_len_samples", base.input_len_samples)?,
            n_electrodes: c.parsed_or("n_electrodes", base.n_electrodes)?,
            blocks: Vec::new(),
            final_filter_len: c.parsed_or("final_filter_len", base.final_filter_len)?,
            batch_norm: c.parsed_or("batch_norm", base.batch_norm)?,
            dropout: c.parsed_or("dropout", base.dropout)?,
        };
        if kind == ArchKind::Linear {
            return Ok(cfg);
        }
        let n_blocks = c.parsed_or("n_blocks", base.blocks.len())?;
        for i in 0..n_blocks {
            let d = base.blocks.get(i).or(base.blocks.last()).cloned().unwrap();
            let key = |f: &str| format!("block{i}.{f}");
            cfg.blocks.push(BlockConfig {
                filters: c.parsed_or(&key("filters"), d.filters)?,
                kernel_len: c.parsed_or(&key("kernel_len"), d.kernel_len)?,
                conv_stride: c.parsed_or(&key("conv_stride"), d.conv_stride)?,
                nonlinearity: c.parsed_or(&key("nonlinearity"), d.nonlinearity)?,
                pool: c.parsed_or(&key("pool"), d.pool)?,
                pool_len: c.parsed_or(&key("pool_len"), d.pool_len)?,
                pool_stride: c.parsed_or(&key("pool_stride"), d.pool_stride)?,
            });
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_receptive_fields_near_six_seconds() {
        for cfg in [ArchitectureConfig::deep_default(), ArchitectureConfig::shallow_default()] {
            let rf = cfg.receptive_field();
            assert!((590..=610).contains(&rf), "{:?} rf {rf}", cfg.kind);
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn mismatched_input_length_names_receptive_field() {
        let mut cfg = ArchitectureConfig::deep_default();
        cfg.input_len_samples = 600;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("601"), "{msg}");
    }

    #[test]
    fn flat_round_trip() {
        for kind in ArchKind::ALL {
            let cfg = ArchitectureConfig::default_for(*kind);
            let text = cfg.to_flat().to_text();
            let back = ArchitectureConfig::from_flat(&FlatConfig::parse(&text).unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
    }
}
