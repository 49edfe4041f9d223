use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::env::{optimal_actions, value_iteration, Environment, KnownDynamics};
use super::policy::{select_action, DecisionStats, PolicyConfig};
use super::qfunction::{greedy_action, td_update, QFunction};
use super::LearnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    /// In `(0, 1]`.
    pub learning_rate: f64,
    /// In `[0, 1)`.
    pub discount: f64,
    pub episodes: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            discount: 0.9,
            episodes: 1000,
            max_steps: 100,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(LearnError::Config("learning rate must lie in (0, 1]".to_string()));
        }
        if !(self.discount >= 0.0 && self.discount < 1.0) {
            return Err(LearnError::Config("discount must lie in [0, 1)".to_string()));
        }
        if self.max_steps == 0 {
            return Err(LearnError::Config("max steps must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    /// Undiscounted sum of rewards.
    pub total_reward: f64,
    pub steps: usize,
    pub temperature: f64,
    pub reached_terminal: bool,
    /// Counters summed over the episode's decisions.
    pub calls: DecisionStats,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunStats {
    pub episodes: Vec<EpisodeStats>,
    pub decisions: u64,
    pub totals: DecisionStats,
}

impl RunStats {
    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.total_reward).collect()
    }
}

/// Runs `cfg.episodes` episodes from `cfg.seed`, updating `q` in place.
pub fn train<E, Q>(env: &E, q: &mut Q, policy: &PolicyConfig, cfg: &TrainingConfig) -> Result<RunStats, LearnError>
where
    E: Environment + ?Sized,
    Q: QFunction + ?Sized,
{
    policy.validate()?;
    cfg.validate()?;
    let mut rng = crate::rng_from_seed(cfg.seed);
    let mut stats = RunStats::default();
    for episode in 0..cfg.episodes {
        let temperature = policy.schedule.at(episode, cfg.episodes);
        let at = |step: usize| move |e: LearnError| LearnError::At {
            episode,
            step,
            source: Box::new(e),
        };
        let mut s = env.reset(&mut rng);
        let mut ep = EpisodeStats {
            total_reward: 0.0,
            steps: 0,
            temperature,
            reached_terminal: env.is_terminal(s),
            calls: DecisionStats::default(),
        };
        for step in 0..cfg.max_steps {
            if env.is_terminal(s) {
                break;
            }
            let actions = env.allowed_actions(s);
            let decision = select_action(&*q, s, &actions, policy, temperature, &mut rng).map_err(at(step))?;
            let (next, reward) = env.step(s, decision.action, &mut rng).map_err(at(step))?;
            td_update(q, env, s, decision.action, reward, next, cfg).map_err(at(step))?;
            ep.total_reward += reward;
            ep.steps += 1;
            ep.calls.accumulate(&decision.stats);
            stats.decisions += 1;
            s = next;
        }
        ep.reached_terminal = env.is_terminal(s);
        stats.totals.accumulate(&ep.calls);
        stats.episodes.push(ep);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyAgreement {
    pub matching: usize,
    pub total: usize,
    /// States whose greedy action is not optimal.
    pub mismatched: Vec<usize>,
}

impl PolicyAgreement {
    pub fn all_match(&self) -> bool {
        self.matching == self.total
    }
}

/// Compares the greedy policy of `q` with the optimal action sets from value
/// iteration, over every non-terminal state.
pub fn greedy_policy_agreement<E, Q>(env: &E, q: &Q, discount: f64) -> PolicyAgreement
where
    E: KnownDynamics + ?Sized,
    Q: QFunction + ?Sized,
{
    let v = value_iteration(env, discount, 1e-12, 100_000);
    let optimal = optimal_actions(env, &v, discount, 1e-9);
    let mut agreement = PolicyAgreement {
        matching: 0,
        total: 0,
        mismatched: Vec::new(),
    };
    for s in env.states() {
        if env.is_terminal(s) {
            continue;
        }
        agreement.total += 1;
        let greedy = greedy_action(q, s, &env.allowed_actions(s));
        if greedy.is_some_and(|a| optimal[s].contains(&a)) {
            agreement.matching += 1;
        } else {
            agreement.mismatched.push(s);
        }
    }
    agreement
}
