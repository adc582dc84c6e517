use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ArchKind, ArchitectureConfig, Nonlinearity, PoolKind, N_CLASSES};
use crate::error::{Error, Result};
use crate::numcore::{Mode, ParamId, ParamStore, Parameter, RunningStats, Tape, Tensor, Var};

/// One stage of a [`Network`]'s forward pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    ConvTemporal { kernel: ParamId, bias: Option<ParamId>, stride: usize },
    ConvSpatial { kernel: ParamId, bias: Option<ParamId>, stride: usize },
    BatchNorm { gamma: ParamId, beta: ParamId, stats: usize },
    Elu,
    Square,
    SafeLog,
    MaxPool { len: usize, stride: usize },
    MeanPool { len: usize, stride: usize },
    Dropout { p: f64 },
    Flatten,
    Dense { weight: ParamId, bias: ParamId },
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::ConvTemporal { .. } => "conv_temporal",
            Layer::ConvSpatial { .. } => "conv_spatial",
            Layer::BatchNorm { .. } => "batch_norm",
            Layer::Elu => "elu",
            Layer::Square => "square",
            Layer::SafeLog => "safe_log",
            Layer::MaxPool { .. } => "max_pool",
            Layer::MeanPool { .. } => "mean_pool",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(self, Layer::Elu | Layer::Square | Layer::SafeLog | Layer::MaxPool { .. })
    }
}

/// A built classifier: layers, parameters, batch-norm statistics and the
/// dropout generator. Inputs are `[batch, 1, electrodes, time]`.
#[derive(Debug, Clone)]
pub struct Network {
    config: ArchitectureConfig,
    pub params: ParamStore,
    layers: Vec<Layer>,
    pub bn_stats: Vec<RunningStats>,
    rng: ChaCha8Rng,
}

struct Builder {
    params: ParamStore,
    layers: Vec<Layer>,
    bn_stats: Vec<RunningStats>,
    rng: ChaCha8Rng,
}

impl Builder {
    fn weight(&mut self, name: String, shape: &[usize], fan_in: usize) -> ParamId {
        let p = Parameter::scaled_uniform(name, shape, fan_in, &mut self.rng);
        self.params.add(p)
    }

    fn zeros(&mut self, name: String, shape: &[usize]) -> ParamId {
        self.params.add(Parameter::zeros(name, shape))
    }

    fn batch_norm(&mut self, prefix: &str, channels: usize) {
        let gamma = self.params.add(Parameter::new(format!("{prefix}.bn_gamma"), Tensor::full(&[channels], 1.0)));
        let beta = self.zeros(format!("{prefix}.bn_beta"), &[channels]);
        self.bn_stats.push(RunningStats::new(channels));
        let stats = self.bn_stats.len() - 1;
        self.layers.push(Layer::BatchNorm { gamma, beta, stats });
    }
}

pub fn build_deep(config: &ArchitectureConfig, seed: u64) -> Result<Network> {
    expect_kind(config, ArchKind::Deep)?;
    Network::build(config, seed)
}

pub fn build_shallow(config: &ArchitectureConfig, seed: u64) -> Result<Network> {
    expect_kind(config, ArchKind::Shallow)?;
    Network::build(config, seed)
}

pub fn build_linear(config: &ArchitectureConfig, seed: u64) -> Result<Network> {
    expect_kind(config, ArchKind::Linear)?;
    Network::build(config, seed)
}

/// Builds a searched configuration of either convolutional kind, honouring
/// per-block nonlinearity and pooling overrides.
pub fn build_from_hpo(config: &ArchitectureConfig, seed: u64) -> Result<Network> {
    if config.kind == ArchKind::Linear {
        return Err(Error::Config("searched configurations must be deep or shallow".into()));
    }
    Network::build(config, seed)
}

fn expect_kind(config: &ArchitectureConfig, kind: ArchKind) -> Result<()> {
    if config.kind != kind {
        return Err(Error::Config(format!("expected a {kind} configuration, got {}", config.kind)));
    }
    Ok(())
}

impl Network {
    /// Validates `config` and initializes weights uniformly in `±1/sqrt(fan_in)`
    /// with zero biases, from a generator seeded by `seed`.
    pub fn build(config: &ArchitectureConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut b = Builder {
            params: ParamStore::new(),
            layers: Vec::new(),
            bn_stats: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let e = config.n_electrodes;
        if config.kind == ArchKind::Linear {
            let features = e * config.input_len_samples;
            let weight = b.weight("dense.weight".into(), &[N_CLASSES, features], features);
            let bias = b.zeros("dense.bias".into(), &[N_CLASSES]);
            b.layers.push(Layer::Flatten);
            b.layers.push(Layer::Dense { weight, bias });
        } else {
            let mut c_in = 1;
            for (i, block) in config.blocks.iter().enumerate() {
                let prefix = format!("block{i}");
                let f = block.filters;
                let k = block.kernel_len;
                if i == 0 {
                    let kernel = b.weight(format!("{prefix}.temporal"), &[f, 1, 1, k], k);
                    let bias = b.zeros(format!("{prefix}.temporal_bias"), &[f]);
                    b.layers.push(Layer::ConvTemporal { kernel, bias: Some(bias), stride: 1 });
                    let kernel = b.weight(format!("{prefix}.spatial"), &[f, f, e, 1], f * e);
                    let bias = (!config.batch_norm).then(|| b.zeros(format!("{prefix}.spatial_bias"), &[f]));
                    b.layers.push(Layer::ConvSpatial { kernel, bias, stride: block.conv_stride });
                } else {
                    if config.dropout > 0.0 {
                        b.layers.push(Layer::Dropout { p: config.dropout });
                    }
                    let kernel = b.weight(format!("{prefix}.conv"), &[f, c_in, 1, k], c_in * k);
                    let bias = (!config.batch_norm).then(|| b.zeros(format!("{prefix}.conv_bias"), &[f]));
                    b.layers.push(Layer::ConvTemporal { kernel, bias, stride: block.conv_stride });
                }
                if config.batch_norm {
                    b.batch_norm(&prefix, f);
                }
                match block.nonlinearity {
                    Nonlinearity::Elu => b.layers.push(Layer::Elu),
                    Nonlinearity::SquareLog => b.layers.push(Layer::Square),
                    Nonlinearity::Identity => {}
                }
                b.layers.push(match block.pool {
                    PoolKind::Max => Layer::MaxPool { len: block.pool_len, stride: block.pool_stride },
                    PoolKind::Mean => Layer::MeanPool { len: block.pool_len, stride: block.pool_stride },
                });
                if block.nonlinearity == Nonlinearity::SquareLog {
                    b.layers.push(Layer::SafeLog);
                }
                c_in = f;
            }
            if config.dropout > 0.0 {
                b.layers.push(Layer::Dropout { p: config.dropout });
            }
            let fl = config.final_filter_len;
            let kernel = b.weight("final.conv".into(), &[N_CLASSES, c_in, 1, fl], c_in * fl);
            let bias = b.zeros("final.bias".into(), &[N_CLASSES]);
            b.layers.push(Layer::ConvTemporal { kernel, bias: Some(bias), stride: 1 });
        }
        Ok(Self { config: config.clone(), params: b.params, layers: b.layers, bn_stats: b.bn_stats, rng: b.rng })
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn receptive_field(&self) -> usize {
        self.config.receptive_field()
    }

    pub fn temporal_output_stride(&self) -> usize {
        self.config.temporal_output_stride()
    }

    pub fn input_len(&self) -> usize {
        self.config.input_len_samples
    }

    pub fn n_params(&self) -> usize {
        self.params.numel()
    }

    /// Records the network on `tape` and returns the pre-softmax output of
    /// shape `[batch, 2, 1, n]`, one column per receptive-field window. The
    /// linear model only accepts inputs of exactly its input length.
    pub fn forward_dense(&mut self, tape: &mut Tape, x: Var, mode: Mode) -> Result<Var> {
        self.run(tape, x, mode, |_, _| {})
    }

    fn run(
        &mut self,
        tape: &mut Tape,
        x: Var,
        mode: Mode,
        mut probe: impl FnMut(&'static str, &Tensor),
    ) -> Result<Var> {
        self.check_input(tape.value(x), mode)?;
        let mut h = x;
        for layer in &self.layers {
            h = match *layer {
                Layer::ConvTemporal { kernel, bias, stride } => {
                    let k = tape.param(&self.params, kernel);
                    let b = bias.map(|b| tape.param(&self.params, b));
                    tape.conv_temporal(h, k, b, stride)?
                }
                Layer::ConvSpatial { kernel, bias, stride } => {
                    let k = tape.param(&self.params, kernel);
                    let b = bias.map(|b| tape.param(&self.params, b));
                    tape.conv_spatial(h, k, b, stride)?
                }
                Layer::BatchNorm { gamma, beta, stats } => {
                    let g = tape.param(&self.params, gamma);
                    let bt = tape.param(&self.params, beta);
                    tape.batch_norm(h, g, bt, &mut self.bn_stats[stats], mode)?
                }
                Layer::Elu => tape.elu(h),
                Layer::Square => tape.square(h),
                Layer::SafeLog => tape.safe_log(h),
                Layer::MaxPool { len, stride } => tape.max_pool_t(h, len, stride)?,
                Layer::MeanPool { len, stride } => tape.mean_pool_t(h, len, stride)?,
                Layer::Dropout { p } => match mode {
                    Mode::Train => tape.dropout(h, p, &mut self.rng),
                    Mode::Eval => h,
                },
                Layer::Flatten => {
                    let [b, c, e, t] = tape.value(h).dims4()?;
                    tape.reshape(h, &[b, c * e * t])?
                }
                Layer::Dense { weight, bias } => {
                    let w = tape.param(&self.params, weight);
                    let b = tape.param(&self.params, bias);
                    let out = tape.dense(h, w, Some(b))?;
                    let [b, c] = tape.value(out).dims2()?;
                    tape.reshape(out, &[b, c, 1, 1])?
                }
            };
            probe(layer.name(), tape.value(h));
        }
        Ok(h)
    }

    /// Pre-softmax output `[batch, 2]` for crops of exactly the input length.
    pub fn forward_logits(&mut self, tape: &mut Tape, x: Var, mode: Mode) -> Result<Var> {
        let t = tape.value(x).dims4()?[3];
        if t != self.input_len() {
            return Err(Error::dim(format!("expected crops of {} samples, got {t}", self.input_len())));
        }
        let out = self.forward_dense(tape, x, mode)?;
        let b = tape.value(out).shape()[0];
        tape.reshape(out, &[b, N_CLASSES])
    }

    /// Log-probabilities `[batch, 2]`.
    pub fn forward(&mut self, tape: &mut Tape, x: Var, mode: Mode) -> Result<Var> {
        let logits = self.forward_logits(tape, x, mode)?;
        tape.log_softmax(logits)
    }

    /// Eval-mode log-probabilities for a crop batch.
    pub fn predict_log_probs(&mut self, batch: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.input(batch.clone());
        let out = self.forward(&mut tape, x, Mode::Eval)?;
        Ok(tape.value(out).clone())
    }

    /// Eval-mode pre-softmax outputs for a crop batch.
    pub fn predict_logits(&mut self, batch: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.input(batch.clone());
        let out = self.forward_logits(&mut tape, x, Mode::Eval)?;
        Ok(tape.value(out).clone())
    }

    /// Output of every layer for `batch`, in layer order.
    pub fn trace(&mut self, batch: &Tensor, mode: Mode) -> Result<Vec<(&'static str, Tensor)>> {
        let mut tape = Tape::new();
        let x = tape.input(batch.clone());
        let mut out = Vec::with_capacity(self.layers.len());
        self.run(&mut tape, x, mode, |name, t| out.push((name, t.clone())))?;
        Ok(out)
    }

    /// Runs one train-mode forward pass so that running batch-norm
    /// statistics reflect `batch`; parameters are not changed.
    pub fn calibrate_batch_norm(&mut self, batch: &Tensor) -> Result<()> {
        let mut tape = Tape::new();
        let x = tape.input(batch.clone());
        self.forward_dense(&mut tape, x, Mode::Train)?;
        Ok(())
    }

    /// Reseeds the dropout generator.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn check_input(&self, x: &Tensor, mode: Mode) -> Result<()> {
        let [_, c, e, t] = x.dims4()?;
        if c != 1 || e != self.config.n_electrodes {
            return Err(Error::dim(format!(
                "expected input [batch, 1, {}, time], got {:?}",
                self.config.n_electrodes,
                x.shape()
            )));
        }
        if t < self.receptive_field() {
            return Err(Error::InsufficientLength { needed: self.receptive_field(), available: t });
        }
        if mode == Mode::Eval && self.bn_stats.iter().any(|s| !s.initialized) {
            return Err(Error::UninitializedStatistics);
        }
        Ok(())
    }

    pub(crate) fn from_parts(
        config: ArchitectureConfig,
        params: ParamStore,
        bn_stats: Vec<RunningStats>,
        seed: u64,
    ) -> Result<Self> {
        let mut net = Self::build(&config, seed)?;
        if net.params.len() != params.len() || net.bn_stats.len() != bn_stats.len() {
            return Err(Error::Corruption("parameter layout does not match configuration".into()));
        }
        for (dst, src) in net.params.iter_mut().zip(params.iter()) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(Error::Corruption(format!("unexpected parameter {}", src.name)));
            }
        }
        for (dst, src) in net.bn_stats.iter().zip(&bn_stats) {
            if dst.mean.len() != src.mean.len() || dst.var.len() != src.var.len() {
                return Err(Error::Corruption("batch-norm statistics do not match configuration".into()));
            }
        }
        net.params = params;
        net.bn_stats = bn_stats;
        Ok(net)
    }
}
