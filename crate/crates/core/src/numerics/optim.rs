//! Adam with bias correction, exponential learning-rate decay, and a Polyak
//! shadow copy of every parameter for evaluation checkpoints.

use super::matrix::{Matrix, Scalar};
use super::tape::{Grads, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    /// Multiplicative decay applied continuously: lr · rate^(step/period).
    pub decay_rate: f64,
    pub decay_period: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// shadow <- polyak·shadow + (1-polyak)·param after each applied step.
    pub polyak: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            decay_rate: 0.98,
            decay_period: 1000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            polyak: 0.9999,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A non-finite gradient was seen; parameters and the step counter were
    /// left untouched.
    SkippedNonFinite,
}

#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    pub cfg: AdamConfig,
    step: u64,
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
    shadow: Vec<Matrix<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(cfg: AdamConfig, store: &ParamStore<T>) -> Self {
        let m = store
            .iter()
            .map(|(_, _, p)| Matrix::zeros(p.rows(), p.cols()))
            .collect::<Vec<_>>();
        let v = m.clone();
        let shadow = store.iter().map(|(_, _, p)| p.clone()).collect();
        Optimizer {
            cfg,
            step: 0,
            m,
            v,
            shadow,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn effective_lr(&self) -> f64 {
        // Uses the post-increment step count, so the very first step runs at
        // the base rate times decay^(1/period).
        self.cfg.learning_rate
            * self
                .cfg
                .decay_rate
                .powf(self.step as f64 / self.cfg.decay_period as f64)
    }

    /// One Adam update over every parameter with a gradient, followed by the
    /// Polyak shadow update over every parameter.
    pub fn apply(&mut self, store: &mut ParamStore<T>, grads: &Grads<T>) -> StepOutcome {
        if !grads.is_finite() {
            return StepOutcome::SkippedNonFinite;
        }
        self.step += 1;
        let lr = T::from_f64(self.effective_lr());
        let b1 = T::from_f64(self.cfg.beta1);
        let b2 = T::from_f64(self.cfg.beta2);
        let eps = T::from_f64(self.cfg.epsilon);
        let bc1 = T::ONE - T::from_f64(self.cfg.beta1.powi(self.step as i32));
        let bc2 = T::ONE - T::from_f64(self.cfg.beta2.powi(self.step as i32));

        for i in 0..self.m.len() {
            let id = super::tape::ParamId(i);
            let Some(g) = grads.get(id) else { continue };
            let p = store.value_mut(id);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for k in 0..g.data().len() {
                let gk = g.data()[k];
                let mk = b1 * m.data()[k] + (T::ONE - b1) * gk;
                let vk = b2 * v.data()[k] + (T::ONE - b2) * gk * gk;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                let m_hat = mk / bc1;
                let v_hat = vk / bc2;
                p.data_mut()[k] = p.data()[k] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }

        let rate = T::from_f64(self.cfg.polyak);
        let one_minus = T::ONE - rate;
        for i in 0..self.shadow.len() {
            let p = store.value(super::tape::ParamId(i));
            let s = &mut self.shadow[i];
            for k in 0..p.data().len() {
                s.data_mut()[k] = rate * s.data()[k] + one_minus * p.data()[k];
            }
        }
        StepOutcome::Applied
    }

    /// Polyak-averaged copies of every parameter, aligned with the store.
    pub fn shadow(&self) -> &[Matrix<T>] {
        &self.shadow
    }

    pub fn moments(&self) -> (&[Matrix<T>], &[Matrix<T>]) {
        (&self.m, &self.v)
    }

    /// Restore optimizer state from a checkpoint.
    pub fn restore(
        cfg: AdamConfig,
        step: u64,
        m: Vec<Matrix<T>>,
        v: Vec<Matrix<T>>,
        shadow: Vec<Matrix<T>>,
    ) -> Self {
        Optimizer {
            cfg,
            step,
            m,
            v,
            shadow,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tape::ParamId;

    fn single_param_store(value: f64) -> (ParamStore<f64>, ParamId) {
        let mut store = ParamStore::new();
        let id = store.add("p", Matrix::from_rows(&[vec![value]]));
        (store, id)
    }

    #[test]
    fn zero_gradients_leave_params_but_move_shadow() {
        let (mut store, id) = single_param_store(2.0);
        let cfg = AdamConfig {
            polyak: 0.5,
            ..Default::default()
        };
        let mut opt = Optimizer::new(cfg, &store);
        // Make the shadow differ from the parameter first.
        opt.shadow[0].set(0, 0, 0.0);
        let mut grads = Grads::zeros_like(&store);
        grads.accumulate(id, &Matrix::zeros(1, 1));
        assert_eq!(opt.apply(&mut store, &grads), StepOutcome::Applied);
        assert_eq!(store.value(id).get(0, 0), 2.0);
        assert_eq!(opt.shadow()[0].get(0, 0), 1.0); // halfway toward 2.0
    }

    #[test]
    fn polyak_rate_zero_tracks_live_params() {
        let (mut store, id) = single_param_store(1.0);
        let cfg = AdamConfig {
            polyak: 0.0,
            ..Default::default()
        };
        let mut opt = Optimizer::new(cfg, &store);
        let mut grads = Grads::zeros_like(&store);
        grads.accumulate(id, &Matrix::from_rows(&[vec![0.3]]));
        opt.apply(&mut store, &grads);
        assert_eq!(opt.shadow()[0].get(0, 0), store.value(id).get(0, 0));
    }

    #[test]
    fn non_finite_gradient_skips_step() {
        let (mut store, id) = single_param_store(1.0);
        let mut opt = Optimizer::new(AdamConfig::default(), &store);
        let mut grads = Grads::zeros_like(&store);
        grads.accumulate(id, &Matrix::from_rows(&[vec![f64::NAN]]));
        assert_eq!(opt.apply(&mut store, &grads), StepOutcome::SkippedNonFinite);
        assert_eq!(opt.step(), 0);
        assert_eq!(store.value(id).get(0, 0), 1.0);
    }

    /// Three steps of Adam on one scalar with a constant gradient, checked
    /// against the update rule evaluated by hand (same formulas, written out
    /// step by step with plain f64 arithmetic).
    #[test]
    fn constant_gradient_matches_hand_trajectory() {
        let (mut store, id) = single_param_store(1.0);
        let cfg = AdamConfig {
            learning_rate: 0.1,
            decay_rate: 1.0, // no decay, so the hand trace stays short
            decay_period: 1000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            polyak: 0.9999,
        };
        let mut opt = Optimizer::new(cfg, &store);
        let g = 0.5;

        let mut expect_p = 1.0;
        let mut m = 0.0;
        let mut v = 0.0;
        for t in 1..=3u32 {
            let mut grads = Grads::zeros_like(&store);
            grads.accumulate(id, &Matrix::from_rows(&[vec![g]]));
            opt.apply(&mut store, &grads);

            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t as i32));
            let v_hat = v / (1.0 - 0.999f64.powi(t as i32));
            expect_p -= 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
            let got = store.value(id).get(0, 0);
            assert!(
                (got - expect_p).abs() < 1e-12,
                "step {t}: got {got}, want {expect_p}"
            );
        }
    }

    #[test]
    fn learning_rate_decays_continuously() {
        let (store, _) = single_param_store(1.0);
        let cfg = AdamConfig {
            learning_rate: 1e-4,
            decay_rate: 0.98,
            decay_period: 1000,
            ..Default::default()
        };
        let mut opt = Optimizer::new(cfg, &store);
        assert!((opt.effective_lr() - 1e-4).abs() < 1e-18);
        opt.step = 1000;
        assert!((opt.effective_lr() - 0.98e-4).abs() < 1e-12);
        opt.step = 2000;
        assert!((opt.effective_lr() - 0.98f64.powi(2) * 1e-4).abs() < 1e-12);
    }
}
