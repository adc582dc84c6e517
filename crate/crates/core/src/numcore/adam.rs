use super::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// One bias-corrected Adam update of every parameter; gradients are zeroed.
pub fn adam_step(params: &mut ParamStore, cfg: &AdamConfig) {
    for p in params.iter_mut() {
        p.step_count += 1;
        let t = p.step_count as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let value = p.value.data_mut();
        let grad = p.grad.data_mut();
        let m = p.adam_m.data_mut();
        let v = p.adam_v.data_mut();
        for j in 0..value.len() {
            let g = grad[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            value[j] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
            grad[j] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{Parameter, Tensor};

    fn store_with(value: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add(Parameter::new("p", Tensor::full(&[3], value)));
        s
    }

    #[test]
    fn zero_gradient_leaves_value_and_counts_step() {
        let mut s = store_with(0.5);
        adam_step(&mut s, &AdamConfig::default());
        let p = s.iter().next().unwrap();
        assert_eq!(p.value.data(), &[0.5; 3]);
        assert_eq!(p.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        // m̂ = g, v̂ = g² after bias correction, so Δ = -lr·g/(|g|+ε).
        let mut s = store_with(0.0);
        let cfg = AdamConfig::default();
        let id = s.ids().next().unwrap();
        s.get_mut(id).grad.data_mut().copy_from_slice(&[2.0, -0.3, 1e-3]);
        adam_step(&mut s, &cfg);
        let p = s.get(id);
        for (&x, g) in p.value.data().iter().zip([2.0f64, -0.3, 1e-3]) {
            let expect = -cfg.lr * g / (g.abs() + cfg.epsilon);
            assert!((x - expect).abs() < 1e-15, "{x} vs {expect}");
        }
        assert!(p.grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn constant_gradient_update_converges_to_lr() {
        let mut s = store_with(0.0);
        let cfg = AdamConfig::default();
        let id = s.ids().next().unwrap();
        let mut last = 0.0;
        for _ in 0..5000 {
            s.get_mut(id).grad.fill(0.7);
            let before = s.get(id).value.data()[0];
            adam_step(&mut s, &cfg);
            last = s.get(id).value.data()[0] - before;
        }
        assert!((last + cfg.lr).abs() < 1e-10, "step {last}");
        assert_eq!(s.get(id).step_count, 5000);
    }
}
