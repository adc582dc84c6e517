use rand::Rng;

use crate::error::{Error, Result};
use crate::kv::FlatConfig;
use crate::models::{ArchKind, ArchitectureConfig, Nonlinearity, PoolKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Int { lo: i64, hi: i64 },
    Choice(Vec<String>),
}

/// A hyperparameter, active only while `condition` (another parameter's
/// name and required choice) holds.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParam {
    pub name: String,
    pub domain: Domain,
    pub default: i64,
    pub condition: Option<(String, String)>,
}

impl HyperParam {
    pub fn int(name: &str, lo: i64, hi: i64, default: i64) -> Self {
        Self { name: name.into(), domain: Domain::Int { lo, hi }, default, condition: None }
    }

    pub fn choice(name: &str, options: &[&str], default: &str) -> Self {
        let default = options.iter().position(|o| *o == default).expect("default among options") as i64;
        Self {
            name: name.into(),
            domain: Domain::Choice(options.iter().map(|s| s.to_string()).collect()),
            default,
            condition: None,
        }
    }

    pub fn when(mut self, param: &str, choice: &str) -> Self {
        self.condition = Some((param.into(), choice.into()));
        self
    }
}

/// One value per hyperparameter: the integer itself or the choice index.
pub type Point = Vec<i64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpace {
    pub params: Vec<HyperParam>,
}

impl ConfigSpace {
    pub fn new(params: Vec<HyperParam>) -> Result<Self> {
        for (i, p) in params.iter().enumerate() {
            match &p.domain {
                Domain::Int { lo, hi } if lo > hi || p.default < *lo || p.default > *hi => {
                    return Err(Error::Config(format!("bad range for {}", p.name)))
                }
                Domain::Choice(o) if o.is_empty() => return Err(Error::Config(format!("{} has no choices", p.name))),
                _ => {}
            }
            if let Some((parent, choice)) = &p.condition {
                let j = params[..i].iter().position(|q| &q.name == parent);
                let ok = j.is_some_and(|j| matches!(&params[j].domain, Domain::Choice(o) if o.contains(choice)));
                if !ok {
                    return Err(Error::Config(format!(
                        "{} depends on an unknown earlier choice {parent}={choice}",
                        p.name
                    )));
                }
            }
        }
        Ok(Self { params })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn is_active(&self, point: &[i64], i: usize) -> bool {
        match &self.params[i].condition {
            None => true,
            Some((parent, choice)) => {
                let j = self.index(parent).expect("validated");
                self.is_active(point, j)
                    && matches!(&self.params[j].domain, Domain::Choice(o) if o[point[j] as usize] == *choice)
            }
        }
    }

    pub fn defaults(&self) -> Point {
        self.params.iter().map(|p| p.default).collect()
    }

    /// Inactive entries reset to their defaults, so equal configurations
    /// compare equal.
    pub fn canonical(&self, mut point: Point) -> Point {
        for i in 0..self.len() {
            if !self.is_active(&point, i) {
                point[i] = self.params[i].default;
            }
        }
        point
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Point {
        let point = self
            .params
            .iter()
            .map(|p| match &p.domain {
                Domain::Int { lo, hi } => rng.random_range(*lo..=*hi),
                Domain::Choice(o) => rng.random_range(0..o.len()) as i64,
            })
            .collect();
        self.canonical(point)
    }

    /// Copies of `point` with one active entry changed: integers move by one
    /// or by a tenth of their range, choices switch to another option.
    pub fn neighbors(&self, point: &[i64], n: usize, rng: &mut impl Rng) -> Vec<Point> {
        let active: Vec<usize> = (0..self.len())
            .filter(|&i| self.is_active(point, i))
            .filter(|&i| match &self.params[i].domain {
                Domain::Int { lo, hi } => hi > lo,
                Domain::Choice(o) => o.len() > 1,
            })
            .collect();
        if active.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| {
                let i = active[rng.random_range(0..active.len())];
                let mut q = point.to_vec();
                q[i] = match &self.params[i].domain {
                    Domain::Int { lo, hi } => {
                        let big = ((hi - lo) as f64 / 10.0).ceil().max(1.0) as i64;
                        let step = if rng.random_bool(0.5) { 1 } else { big };
                        let sign = if rng.random_bool(0.5) { 1 } else { -1 };
                        let v = (q[i] + sign * step).clamp(*lo, *hi);
                        if v == q[i] {
                            (q[i] - sign * step).clamp(*lo, *hi)
                        } else {
                            v
                        }
                    }
                    Domain::Choice(o) => {
                        let shift = rng.random_range(1..o.len()) as i64;
                        (q[i] + shift) % o.len() as i64
                    }
                };
                self.canonical(q)
            })
            .collect()
    }

    /// Integers scaled to [0, 1] (−1 when inactive), choices one-hot (all
    /// zero when inactive).
    pub fn encode(&self, point: &[i64]) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, p) in self.params.iter().enumerate() {
            let active = self.is_active(point, i);
            match &p.domain {
                Domain::Int { lo, hi } => out.push(if !active {
                    -1.0
                } else if hi == lo {
                    0.0
                } else {
                    (point[i] - lo) as f64 / (hi - lo) as f64
                }),
                Domain::Choice(o) => {
                    out.extend((0..o.len()).map(|k| if active && point[i] == k as i64 { 1.0 } else { 0.0 }))
                }
            }
        }
        out
    }

    /// Active entries as `name=value`.
    pub fn to_flat(&self, point: &[i64]) -> FlatConfig {
        let mut c = FlatConfig::new();
        for (i, p) in self.params.iter().enumerate() {
            if !self.is_active(point, i) {
                continue;
            }
            match &p.domain {
                Domain::Int { .. } => c.set(p.name.clone(), point[i]),
                Domain::Choice(o) => c.set(p.name.clone(), &o[point[i] as usize]),
            }
        }
        c
    }

    pub fn from_flat(&self, c: &FlatConfig) -> Result<Point> {
        let mut point = self.defaults();
        for (i, p) in self.params.iter().enumerate() {
            let Some(v) = c.get(&p.name) else { continue };
            point[i] = match &p.domain {
                Domain::Int { lo, hi } => {
                    let x: i64 = v.parse().map_err(|_| Error::Config(format!("bad integer {v:?} for {}", p.name)))?;
                    if x < *lo || x > *hi {
                        return Err(Error::Config(format!("{} = {x} outside [{lo}, {hi}]", p.name)));
                    }
                    x
                }
                Domain::Choice(o) => o
                    .iter()
                    .position(|s| s == v)
                    .ok_or_else(|| Error::Config(format!("{v:?} is not a choice of {}", p.name)))?
                    as i64,
            };
        }
        Ok(self.canonical(point))
    }
}

/// Deep and shallow architecture hyperparameters. `input_len` is a target
/// that [`architecture_from_flat`] snaps to a reachable receptive field.
pub fn architecture_space() -> ConfigSpace {
    let nl = ["elu", "square_log", "identity"];
    let pools = ["max", "mean"];
    ConfigSpace::new(vec![
        HyperParam::choice("kind", &["deep", "shallow"], "deep"),
        HyperParam::int("input_len", 150, 800, 601),
        HyperParam::int("deep.kernel_len", 3, 15, 10).when("kind", "deep"),
        HyperParam::int("deep.conv_stride", 1, 3, 3).when("kind", "deep"),
        HyperParam::int("deep.pool_len", 1, 4, 3).when("kind", "deep"),
        HyperParam::int("deep.pool_stride", 1, 2, 1).when("kind", "deep"),
        HyperParam::choice("deep.first_nonlinearity", &nl, "elu").when("kind", "deep"),
        HyperParam::choice("deep.later_nonlinearity", &nl, "elu").when("kind", "deep"),
        HyperParam::choice("deep.pool", &pools, "max").when("kind", "deep"),
        HyperParam::int("shallow.kernel_len", 5, 40, 25).when("kind", "shallow"),
        HyperParam::int("shallow.pool_len", 10, 100, 75).when("kind", "shallow"),
        HyperParam::int("shallow.pool_stride", 5, 30, 15).when("kind", "shallow"),
        HyperParam::choice("shallow.nonlinearity", &["square_log", "elu", "identity"], "square_log")
            .when("kind", "shallow"),
        HyperParam::choice("shallow.pool", &pools, "mean").when("kind", "shallow"),
    ])
    .expect("static space is valid")
}

fn parse<T: std::str::FromStr>(c: &FlatConfig, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    c.parsed(key)
}

/// Architecture for a point of [`architecture_space`]. The final filter
/// length is the largest that keeps the receptive field within
/// `input_len`; the input length becomes that receptive field.
pub fn architecture_from_flat(c: &FlatConfig) -> Result<ArchitectureConfig> {
    let kind: ArchKind = c.require_parsed("kind")?;
    let mut a = ArchitectureConfig::default_for(kind);
    let target: usize = c.require_parsed("input_len")?;
    match kind {
        ArchKind::Deep => {
            let first: Option<Nonlinearity> = parse(c, "deep.first_nonlinearity")?;
            let later: Option<Nonlinearity> = parse(c, "deep.later_nonlinearity")?;
            let pool: Option<PoolKind> = parse(c, "deep.pool")?;
            for (i, b) in a.blocks.iter_mut().enumerate() {
                b.kernel_len = parse(c, "deep.kernel_len")?.unwrap_or(b.kernel_len);
                b.conv_stride = parse(c, "deep.conv_stride")?.unwrap_or(b.conv_stride);
                b.pool_len = parse(c, "deep.pool_len")?.unwrap_or(b.pool_len);
                b.pool_stride = parse(c, "deep.pool_stride")?.unwrap_or(b.pool_stride);
                b.nonlinearity = if i == 0 { first } else { later }.unwrap_or(b.nonlinearity);
                b.pool = pool.unwrap_or(b.pool);
            }
        }
        ArchKind::Shallow => {
            let b = &mut a.blocks[0];
            b.kernel_len = parse(c, "shallow.kernel_len")?.unwrap_or(b.kernel_len);
            b.pool_len = parse(c, "shallow.pool_len")?.unwrap_or(b.pool_len);
            b.pool_stride = parse(c, "shallow.pool_stride")?.unwrap_or(b.pool_stride);
            b.nonlinearity = parse(c, "shallow.nonlinearity")?.unwrap_or(b.nonlinearity);
            b.pool = parse(c, "shallow.pool")?.unwrap_or(b.pool);
        }
        ArchKind::Linear => return Err(Error::Config("the search covers deep and shallow networks only".into())),
    }
    a.final_filter_len = 1;
    let rf1 = a.receptive_field();
    if rf1 > target {
        return Err(Error::Config(format!("smallest receptive field {rf1} exceeds input length {target}")));
    }
    a.final_filter_len = (target - rf1) / a.temporal_output_stride() + 1;
    a.input_len_samples = a.receptive_field();
    a.validate()?;
    Ok(a)
}
