use rand::seq::index::sample;
use rand::Rng;

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

const MIN_SPLIT: usize = 3;
const MAX_DEPTH: usize = 20;

fn mean(ys: &[f64]) -> f64 {
    ys.iter().sum::<f64>() / ys.len() as f64
}

fn grow(xs: &[&[f64]], ys: &[f64], depth: usize, n_features: usize, rng: &mut impl Rng) -> Node {
    let leaf = Node::Leaf(mean(ys));
    if ys.len() < MIN_SPLIT || depth >= MAX_DEPTH || ys.iter().all(|&y| y == ys[0]) {
        return leaf;
    }
    let d = xs[0].len();
    let tried = sample(rng, d, n_features.min(d)).into_vec();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<usize> = (0..ys.len()).collect();
    for &f in &tried {
        order.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]));
        let total: f64 = ys.iter().sum();
        let total_sq: f64 = ys.iter().map(|y| y * y).sum();
        let (mut s, mut sq) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let y = ys[order[k]];
            s += y;
            sq += y * y;
            let (lo, hi) = (xs[order[k]][f], xs[order[k + 1]][f]);
            if lo == hi {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = (order.len() - k - 1) as f64;
            let sse = (sq - s * s / nl) + ((total_sq - sq) - (total - s).powi(2) / nr);
            if best.is_none_or(|b| sse < b.0) {
                best = Some((sse, f, (lo + hi) / 2.0));
            }
        }
    }
    let Some((_, feature, threshold)) = best else { return leaf };
    let (mut lx, mut ly, mut rx, mut ry) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (x, &y) in xs.iter().zip(ys) {
        if x[feature] <= threshold {
            lx.push(*x);
            ly.push(y);
        } else {
            rx.push(*x);
            ry.push(y);
        }
    }
    Node::Split {
        feature,
        threshold,
        left: Box::new(grow(&lx, &ly, depth + 1, n_features, rng)),
        right: Box::new(grow(&rx, &ry, depth + 1, n_features, rng)),
    }
}

/// Bagged regression trees; each split considers a random five-sixths of
/// the features.
#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Node>,
}

impl Forest {
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], n_trees: usize, rng: &mut impl Rng) -> Self {
        assert!(!xs.is_empty() && xs.len() == ys.len(), "forest needs matching non-empty data");
        let n_features = (xs[0].len() * 5).div_ceil(6).max(1);
        let trees = (0..n_trees)
            .map(|_| {
                let idx: Vec<usize> = (0..xs.len()).map(|_| rng.random_range(0..xs.len())).collect();
                let bx: Vec<&[f64]> = idx.iter().map(|&i| xs[i].as_slice()).collect();
                let by: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
                grow(&bx, &by, 0, n_features, rng)
            })
            .collect();
        Self { trees }
    }

    /// Mean and standard deviation of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let p: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let m = mean(&p);
        let var = p.iter().map(|v| (v - m).powi(2)).sum::<f64>() / p.len() as f64;
        (m, var.sqrt())
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement over `best` for a maximized score.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64, jitter: f64) -> f64 {
    let gain = mu - best - jitter;
    if sigma <= 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    gain * normal_cdf(z) + sigma * normal_pdf(z)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn forest_fits_step_function() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, 0.3]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| if x[0] < 0.5 { 1.0 } else { 3.0 }).collect();
        let f = Forest::fit(&xs, &ys, 10, &mut ChaCha8Rng::seed_from_u64(1));
        assert!((f.predict(&[0.1, 0.3]).0 - 1.0).abs() < 0.3);
        assert!((f.predict(&[0.9, 0.3]).0 - 3.0).abs() < 0.3);
    }

    #[test]
    fn expected_improvement_values() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.5, 0.0), 0.5);
        assert_eq!(expected_improvement(0.2, 0.0, 0.5, 0.0), 0.0);
        // Zero gain: σ·φ(0).
        let ei = expected_improvement(0.5, 2.0, 0.5, 0.0);
        assert!((ei - 2.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!(expected_improvement(0.5, 1.0, 0.5, 0.01) < ei);
        assert!((normal_cdf(1.96) - 0.975).abs() < 1e-4);
    }
}
