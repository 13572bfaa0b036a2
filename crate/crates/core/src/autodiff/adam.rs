use serde::{Deserialize, Serialize};

use super::param::ParamStore;
use super::tensor::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates for one parameter set.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One bias-corrected Adam update over flat parameter/gradient slices.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    cfg: &AdamConfig,
) {
    if state.m.len() != params.len() {
        state.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
        state.v = params.iter().map(|p| vec![0.0; p.len()]).collect();
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (k, p) in params.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..p.len() {
            let g = grads[k][i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Adam over a [`ParamStore`], reading its accumulated gradients.
#[derive(Clone, Debug, Default)]
pub struct Adam {
    pub cfg: AdamConfig,
    pub state: AdamState,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Self { cfg, state: AdamState::new() }
    }

    pub fn step<T: Real>(&mut self, store: &mut ParamStore<T>) {
        let ids: Vec<_> = store.ids().collect();
        let mut values: Vec<Vec<f64>> =
            ids.iter().map(|&id| store.value(id).data().iter().map(|x| x.to_f64_lossy()).collect()).collect();
        let grads: Vec<Vec<f64>> =
            ids.iter().map(|&id| store.grad(id).data().iter().map(|x| x.to_f64_lossy()).collect()).collect();
        {
            let mut views: Vec<&mut [f64]> = values.iter_mut().map(Vec::as_mut_slice).collect();
            let gviews: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            adam_step(&mut views, &gviews, &mut self.state, &self.cfg);
        }
        for (id, vals) in ids.into_iter().zip(values) {
            for (dst, v) in store.value_mut(id).data_mut().iter_mut().zip(vals) {
                *dst = T::of(v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = vec![1.5, -2.0];
        let g = vec![0.0, 0.0];
        let mut st = AdamState::new();
        adam_step(&mut [&mut p[..]], &[&g[..]], &mut st, &AdamConfig::default());
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn first_step_closed_form() {
        // m_hat = g and v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps).
        let cfg = AdamConfig { lr: 0.01, ..Default::default() };
        let g = vec![0.5, -3.0, 1e-3];
        let mut p = vec![0.0; 3];
        let mut st = AdamState::new();
        adam_step(&mut [&mut p[..]], &[&g[..]], &mut st, &cfg);
        for (pi, gi) in p.iter().zip(&g) {
            let expected = -cfg.lr * gi / (gi.abs() + cfg.eps);
            assert!((pi - expected).abs() < 1e-12, "{pi} vs {expected}");
        }
    }

    #[test]
    fn converges_on_squared_norm() {
        let cfg = AdamConfig { lr: 0.05, ..Default::default() };
        let mut w = vec![1.0, 1.0];
        let mut st = AdamState::new();
        for _ in 0..200 {
            let g: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
            adam_step(&mut [&mut w[..]], &[&g[..]], &mut st, &cfg);
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 0.1, "norm {norm}");
    }
}
