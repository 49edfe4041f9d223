//! Hybrid Q-learning: class-aggregated Boltzmann action selection, realised
//! either by the quantum encoder or classically, on top of a standard
//! one-step Q-learning update.

use alloc::boxed::Box;
use alloc::string::String;

use crate::counting::CountError;
use crate::encoder::EncodeError;

mod env;
mod policy;
mod qfunction;
mod train;

pub use env::{
    optimal_actions, value_iteration, ActionId, Environment, GridWorld, KArmedBandit, KnownDynamics, Move, StateId,
    Transition,
};
pub use policy::{
    class_probabilities, class_probabilities_exact, classical_action_distribution, classify_actions, classify_values,
    partition_intervals, prepare_quantum_selection, select_action, select_action_classical, select_action_quantum,
    ClassAssignment, ClassWeighting, Decision, DecisionStats, IntervalPartition, PolicyConfig, QuantumSelection,
    SelectorKind, TemperatureSchedule,
};
pub use qfunction::{greedy_action, td_update, LinearQ, QFunction, TabularQ};
pub use train::{greedy_policy_agreement, train, EpisodeStats, PolicyAgreement, RunStats, TrainingConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("number of intervals must be at least 1, got {0}")]
    InvalidIntervals(usize),
    #[error("interval [{lo}, {hi}] is empty or not finite")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("value {value} lies outside the partitioned range [{lo}, {hi}]")]
    StalePartition { value: f64, lo: f64, hi: f64 },
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("class counts are all zero")]
    NoActions,
    #[error("state {state} has no allowed actions")]
    NoAllowedActions { state: StateId },
    #[error("action {action} is not allowed in state {state}")]
    InvalidAction { state: StateId, action: ActionId },
    #[error("state {0} is out of range")]
    InvalidState(StateId),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed grid layout: {0}")]
    Layout(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Count(#[from] CountError),
    #[error("episode {episode}, step {step}: {source}")]
    At {
        episode: usize,
        step: usize,
        #[source]
        source: Box<LearnError>,
    },
}

impl LearnError {
    /// Error with any episode/step context stripped.
    pub fn root(&self) -> &LearnError {
        match self {
            LearnError::At { source, .. } => source.root(),
            other => other,
        }
    }
}
