use std::collections::{HashMap, HashSet};
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::forest::{expected_improvement, Forest};
use super::space::{ConfigSpace, Point};
use crate::error::{Error, Result};
use crate::kv::FlatConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Ok,
    Timeout,
    Crash,
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Timeout => "timeout",
            TrialStatus::Crash => "crash",
        })
    }
}

impl FromStr for TrialStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(TrialStatus::Ok),
            "timeout" => Ok(TrialStatus::Timeout),
            "crash" => Ok(TrialStatus::Crash),
            _ => Err(Error::Config(format!("unknown trial status {s:?}"))),
        }
    }
}

/// One objective evaluation. Timed-out and crashed trials score 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub fold: usize,
    pub status: TrialStatus,
    pub score: f64,
    pub wall_time_s: f64,
    pub config: FlatConfig,
}

/// Runs `objective` on `config`, turning errors and panics into scored-zero
/// trials.
pub fn run_trial<F>(index: usize, config: FlatConfig, fold: usize, objective: &mut F) -> Trial
where
    F: FnMut(&FlatConfig, usize) -> Result<f64>,
{
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| objective(&config, fold)));
    let (status, score) = match outcome {
        Ok(Ok(s)) if s.is_finite() => (TrialStatus::Ok, s),
        Ok(Err(Error::Timeout(_))) => (TrialStatus::Timeout, 0.0),
        _ => (TrialStatus::Crash, 0.0),
    };
    Trial { index, fold, status, score, wall_time_s: start.elapsed().as_secs_f64(), config }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmboConfig {
    pub budget: usize,
    pub seed: u64,
    pub n_folds: usize,
    /// Random configurations before the surrogate is used.
    pub n_initial: usize,
    pub n_trees: usize,
    pub ei_jitter: f64,
    pub n_neighbors: usize,
    pub n_local_starts: usize,
    pub n_random_candidates: usize,
}

impl SmboConfig {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            n_folds: 10,
            n_initial: 10,
            n_trees: 10,
            ei_jitter: 0.01,
            n_neighbors: 20,
            n_local_starts: 5,
            n_random_candidates: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub incumbent: Trial,
    /// Mean score of the incumbent configuration after each trial.
    pub incumbent_trace: Vec<f64>,
    pub history: Vec<Trial>,
}

const INCUMBENTS_SEARCHED: usize = 3;
const LOCAL_STEPS: usize = 20;

fn unseen_sample(space: &ConfigSpace, seen: &HashSet<Point>, rng: &mut ChaCha8Rng) -> Point {
    let mut p = space.sample(rng);
    for _ in 0..1000 {
        if !seen.contains(&p) {
            break;
        }
        p = space.sample(rng);
    }
    p
}

/// Per configuration: score sum, successful evaluations, first trial.
struct Scores {
    by_point: HashMap<Point, (f64, usize, usize)>,
}

impl Scores {
    fn add(&mut self, p: &Point, score: f64, ok: bool, order: usize) {
        let e = self.by_point.entry(p.clone()).or_insert((0.0, 0, order));
        e.0 += score;
        e.1 += usize::from(ok);
    }

    /// Best mean score, earliest first among ties, over points with at least
    /// one successful evaluation.
    fn best(&self, counts: &HashMap<Point, usize>) -> Option<(&Point, f64)> {
        self.by_point
            .iter()
            .filter(|(_, v)| v.1 > 0)
            .map(|(p, v)| (p, v.0 / counts[p] as f64, v.2))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|(p, m, _)| (p, m))
    }
}

/// Sequential model-based optimisation: `n_initial` random configurations,
/// then each new configuration maximises expected improvement under a
/// random-forest surrogate, searched locally around the best configurations
/// and from random starts. Trial `t` is evaluated on fold `t mod n_folds`.
pub fn smbo_search<F>(space: &ConfigSpace, mut objective: F, cfg: &SmboConfig) -> Result<SearchResult>
where
    F: FnMut(&FlatConfig, usize) -> Result<f64>,
{
    if cfg.budget < 10 {
        return Err(Error::Config(format!("budget {} is below the minimum of 10", cfg.budget)));
    }
    if cfg.n_folds == 0 || cfg.n_trees == 0 {
        return Err(Error::Config("n_folds and n_trees must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut points: Vec<Point> = Vec::new();
    let mut seen = HashSet::new();
    let mut history = Vec::new();
    let mut scores = Scores { by_point: HashMap::new() };
    let mut counts: HashMap<Point, usize> = HashMap::new();
    let mut trace = Vec::new();

    for t in 0..cfg.budget {
        let point = if t < cfg.n_initial {
            unseen_sample(space, &seen, &mut rng)
        } else {
            propose(space, &points, &history, &seen, cfg, &mut rng)
        };
        let trial = run_trial(t, space.to_flat(&point), t % cfg.n_folds, &mut objective);
        scores.add(&point, trial.score, trial.status == TrialStatus::Ok, t);
        *counts.entry(point.clone()).or_insert(0) += 1;
        seen.insert(point.clone());
        points.push(point);
        history.push(trial);
        trace.push(scores.best(&counts).map_or(0.0, |b| b.1));
    }

    let (best, _) = scores.best(&counts).ok_or(Error::NoIncumbent)?;
    let incumbent = points
        .iter()
        .zip(&history)
        .filter(|(p, t)| *p == best && t.status == TrialStatus::Ok)
        .map(|(_, t)| t.clone())
        .next()
        .expect("incumbent has a successful trial");
    Ok(SearchResult { incumbent, incumbent_trace: trace, history })
}

/// Pure random search with the same history layout.
pub fn random_search<F>(space: &ConfigSpace, objective: F, budget: usize, seed: u64) -> Result<SearchResult>
where
    F: FnMut(&FlatConfig, usize) -> Result<f64>,
{
    let cfg = SmboConfig { n_initial: budget, ..SmboConfig::new(budget, seed) };
    smbo_search(space, objective, &cfg)
}

fn propose(
    space: &ConfigSpace,
    points: &[Point],
    history: &[Trial],
    seen: &HashSet<Point>,
    cfg: &SmboConfig,
    rng: &mut ChaCha8Rng,
) -> Point {
    let xs: Vec<Vec<f64>> = points.iter().map(|p| space.encode(p)).collect();
    let ys: Vec<f64> = history.iter().map(|t| t.score).collect();
    let forest = Forest::fit(&xs, &ys, cfg.n_trees, rng);
    let best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ei = |p: &Point| {
        let (mu, sigma) = forest.predict(&space.encode(p));
        expected_improvement(mu, sigma, best, cfg.ei_jitter)
    };

    let mut ranked: Vec<usize> = (0..points.len()).collect();
    ranked.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]).then(a.cmp(&b)));
    let mut starts: Vec<Point> = Vec::new();
    for &i in &ranked {
        if starts.len() == INCUMBENTS_SEARCHED {
            break;
        }
        if !starts.contains(&points[i]) {
            starts.push(points[i].clone());
        }
    }
    starts.extend((0..cfg.n_local_starts).map(|_| space.sample(rng)));

    let mut candidates: Vec<(Point, f64)> = Vec::new();
    for start in starts {
        let mut cur_ei = ei(&start);
        let mut cur = start;
        candidates.push((cur.clone(), cur_ei));
        for _ in 0..LOCAL_STEPS {
            let scored: Vec<(Point, f64)> =
                space.neighbors(&cur, cfg.n_neighbors, rng).into_iter().map(|q| (q.clone(), ei(&q))).collect();
            candidates.extend(scored.iter().cloned());
            let Some((q, v)) = scored.into_iter().max_by(|a, b| a.1.total_cmp(&b.1)) else { break };
            if v <= cur_ei {
                break;
            }
            cur = q;
            cur_ei = v;
        }
    }
    candidates.extend((0..cfg.n_random_candidates).map(|_| {
        let q = space.sample(rng);
        let v = ei(&q);
        (q, v)
    }));
    let mut choice: Option<(Point, f64)> = None;
    for (p, v) in candidates {
        if seen.contains(&p) {
            continue;
        }
        if choice.as_ref().is_none_or(|c| v > c.1) {
            choice = Some((p, v));
        }
    }
    choice.map_or_else(|| unseen_sample(space, seen, rng), |c| c.0)
}

/// `index  fold  status  score  wall_time_s  config` lines, the config as a
/// single space-separated `key=value` line.
pub fn history_to_text(history: &[Trial]) -> String {
    let mut s = String::new();
    for t in history {
        s.push_str(&format!(
            "{}\t{}\t{}\t{:.6}\t{:.3}\t{}\n",
            t.index,
            t.fold,
            t.status,
            t.score,
            t.wall_time_s,
            t.config.to_line()
        ));
    }
    s
}

pub fn parse_history(text: &str) -> Result<Vec<Trial>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let err = |msg: &str| Error::Parse { line: n + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.splitn(6, '\t').collect();
            if f.len() != 6 {
                return Err(err("expected six tab-separated fields"));
            }
            Ok(Trial {
                index: f[0].parse().map_err(|_| err("bad index"))?,
                fold: f[1].parse().map_err(|_| err("bad fold"))?,
                status: f[2].parse().map_err(|_| err("bad status"))?,
                score: f[3].parse().map_err(|_| err("bad score"))?,
                wall_time_s: f[4].parse().map_err(|_| err("bad wall time"))?,
                config: FlatConfig::parse_line(f[5])?,
            })
        })
        .collect()
}
