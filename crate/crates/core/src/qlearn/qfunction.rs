use alloc::vec;
use alloc::vec::Vec;

use super::env::{ActionId, Environment, StateId};
use super::train::TrainingConfig;
use super::LearnError;

/// Action-value estimate `Q(s, a)`.
pub trait QFunction {
    fn value(&self, s: StateId, a: ActionId) -> f64;
    /// Moves `Q(s, a)` toward `target` with step size `rate`.
    fn update(&mut self, s: StateId, a: ActionId, target: f64, rate: f64);
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    n_actions: usize,
    values: Vec<f64>,
}

impl TabularQ {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn set(&mut self, s: StateId, a: ActionId, value: f64) {
        self.values[s * self.n_actions + a] = value;
    }
}

impl QFunction for TabularQ {
    fn value(&self, s: StateId, a: ActionId) -> f64 {
        self.values[s * self.n_actions + a]
    }

    fn update(&mut self, s: StateId, a: ActionId, target: f64, rate: f64) {
        let q = &mut self.values[s * self.n_actions + a];
        *q += rate * (target - *q);
    }
}

/// `Q(s, a) = theta . phi(s, a)` over a fixed feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQ {
    n_actions: usize,
    n_features: usize,
    features: Vec<f64>,
    weights: Vec<f64>,
}

impl LinearQ {
    /// Tabulates `feature(s, a)` for every pair; each call must return
    /// `n_features` values. Weights start at zero.
    pub fn new<F>(n_states: usize, n_actions: usize, n_features: usize, mut feature: F) -> Self
    where
        F: FnMut(StateId, ActionId) -> Vec<f64>,
    {
        let mut features = Vec::with_capacity(n_states * n_actions * n_features);
        for s in 0..n_states {
            for a in 0..n_actions {
                let phi = feature(s, a);
                assert_eq!(phi.len(), n_features, "feature map returned the wrong length");
                features.extend(phi);
            }
        }
        Self {
            n_actions,
            n_features,
            features,
            weights: vec![0.0; n_features],
        }
    }

    /// One-hot features; behaves exactly like [`TabularQ`].
    pub fn one_hot(n_states: usize, n_actions: usize) -> Self {
        let dim = n_states * n_actions;
        Self::new(n_states, n_actions, dim, |s, a| {
            let mut phi = vec![0.0; dim];
            phi[s * n_actions + a] = 1.0;
            phi
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: &[f64]) {
        self.weights.copy_from_slice(weights);
    }

    pub fn features(&self, s: StateId, a: ActionId) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_features;
        &self.features[start..start + self.n_features]
    }

    /// Gradient of `Q(s, a)` with respect to the weights.
    pub fn gradient(&self, s: StateId, a: ActionId) -> &[f64] {
        self.features(s, a)
    }
}

impl QFunction for LinearQ {
    fn value(&self, s: StateId, a: ActionId) -> f64 {
        self.features(s, a).iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    fn update(&mut self, s: StateId, a: ActionId, target: f64, rate: f64) {
        let delta = target - self.value(s, a);
        let start = (s * self.n_actions + a) * self.n_features;
        for (w, f) in self.weights.iter_mut().zip(&self.features[start..start + self.n_features]) {
            *w += rate * delta * f;
        }
    }
}

/// First action with the largest value.
pub fn greedy_action<Q: QFunction + ?Sized>(q: &Q, s: StateId, actions: &[ActionId]) -> Option<ActionId> {
    let mut best: Option<(ActionId, f64)> = None;
    for &a in actions {
        let v = q.value(s, a);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a)
}

/// One-step Q-learning:
/// `Q(s,a) += lr * (r + gamma * max_a' Q(s',a') - Q(s,a))`, with a zero
/// bootstrap when `s'` is terminal.
pub fn td_update<Q, E>(
    q: &mut Q,
    env: &E,
    s: StateId,
    a: ActionId,
    reward: f64,
    s_next: StateId,
    cfg: &TrainingConfig,
) -> Result<(), LearnError>
where
    Q: QFunction + ?Sized,
    E: Environment + ?Sized,
{
    if !env.allowed_actions(s).contains(&a) {
        return Err(LearnError::InvalidAction { state: s, action: a });
    }
    let bootstrap = if env.is_terminal(s_next) {
        0.0
    } else {
        env.allowed_actions(s_next)
            .into_iter()
            .map(|b| q.value(s_next, b))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let bootstrap = if bootstrap.is_finite() { bootstrap } else { 0.0 };
    q.update(s, a, reward + cfg.discount * bootstrap, cfg.learning_rate);
    Ok(())
}
