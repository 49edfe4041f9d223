//! Class-by-class encoding of a target distribution on the simulated register.
//!
//! Every class except the remainder is handled in one step: its members are
//! amplified with the conditional Grover iterate for the planned number of
//! iterations and then ticked onto the ancilla-0 branch, where later steps
//! cannot reach them. The remainder class keeps whatever weight is left on
//! the ancilla-1 branch; measuring ancilla 1 selects it.
//!
//! Planning runs first and is purely classical ([`plan_encoding`]); the
//! simulator then executes the plan ([`encode_with`]).

use alloc::vec;
use alloc::vec::Vec;

use libm::fabs;
use rand::Rng;

use crate::planner::{self, PlanError, PlannerState, StepPlan};
use crate::state::{Ancilla, MarkedSet, StateError, StateVector};

/// Tolerance on the sum of class targets.
pub const TARGET_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("at least one class is required")]
    NoClasses,
    #[error("{classes} classes but {targets} targets")]
    TargetCount { classes: usize, targets: usize },
    #[error("class {class} is defined over {actual} values, expected {expected}")]
    DimensionMismatch {
        class: usize,
        expected: usize,
        actual: usize,
    },
    #[error("value {index} belongs to more than one class")]
    Overlap { index: usize },
    #[error("value {index} belongs to no class")]
    Gap { index: usize },
    #[error("class {class} has negative or non-finite target {target}")]
    NegativeTarget { class: usize, target: f64 },
    #[error("class targets sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("class {class} is empty but has target {target}")]
    EmptyClassTarget { class: usize, target: f64 },
    #[error("remainder class {class} is empty")]
    EmptyRemainder { class: usize },
    #[error("planning sizes cover {got} classes, expected {expected}")]
    PlanningSizes { expected: usize, got: usize },
    #[error(transparent)]
    State(#[from] StateError),
    #[error("step {step} (class {class}): {source}")]
    Plan {
        step: usize,
        class: usize,
        source: PlanError,
    },
}

/// Which class is left to normalization instead of being amplified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RemainderPolicy {
    /// The last class in order.
    #[default]
    Last,
    /// The class with the most members (earliest on ties); needs fewer iterates.
    Largest,
}

/// Partition of `[0, N)` into ordered classes, each with a total probability.
/// Members of one class share its probability equally.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    n_values: usize,
    classes: Vec<MarkedSet>,
    class_targets: Vec<f64>,
    remainder: RemainderPolicy,
}

impl TargetDistribution {
    pub fn new<C>(n_values: usize, classes: C, class_targets: Vec<f64>) -> Result<Self, EncodeError>
    where
        C: IntoIterator,
        C::Item: IntoIterator<Item = usize>,
    {
        let classes = classes
            .into_iter()
            .map(|c| MarkedSet::new(n_values, c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            n_values,
            classes,
            class_targets,
            remainder: RemainderPolicy::Last,
        })
    }

    /// Contiguous classes of the given sizes, in index order.
    pub fn from_sizes(sizes: &[usize], class_targets: Vec<f64>) -> Result<Self, EncodeError> {
        let n_values = sizes.iter().sum();
        let mut start = 0;
        let classes = sizes.iter().map(|&s| {
            let c = start..start + s;
            start += s;
            c
        });
        Self::new(n_values, classes.collect::<Vec<_>>(), class_targets)
    }

    pub fn from_marked_sets(n_values: usize, classes: Vec<MarkedSet>, class_targets: Vec<f64>) -> Self {
        Self {
            n_values,
            classes,
            class_targets,
            remainder: RemainderPolicy::Last,
        }
    }

    pub fn with_remainder(mut self, remainder: RemainderPolicy) -> Self {
        self.remainder = remainder;
        self
    }

    pub fn n_values(&self) -> usize {
        self.n_values
    }

    pub fn classes(&self) -> &[MarkedSet] {
        &self.classes
    }

    pub fn class_targets(&self) -> &[f64] {
        &self.class_targets
    }

    pub fn remainder_policy(&self) -> RemainderPolicy {
        self.remainder
    }

    /// Index of the class realised by the ancilla-1 outcome.
    pub fn remainder_class(&self) -> usize {
        match self.remainder {
            RemainderPolicy::Last => self.classes.len().saturating_sub(1),
            RemainderPolicy::Largest => {
                let mut best = 0;
                for (j, c) in self.classes.iter().enumerate() {
                    if c.len() > self.classes[best].len() {
                        best = j;
                    }
                }
                best
            }
        }
    }

    /// Classes to amplify, in ascending order, without the remainder.
    pub fn encoding_order(&self) -> Vec<usize> {
        let rem = self.remainder_class();
        (0..self.classes.len()).filter(|&j| j != rem).collect()
    }

    /// `planned` overrides the class sizes used for the empty-class check.
    fn check_structure(&self, planned: Option<&[usize]>) -> Result<(), EncodeError> {
        if self.classes.is_empty() {
            return Err(EncodeError::NoClasses);
        }
        if self.classes.len() != self.class_targets.len() {
            return Err(EncodeError::TargetCount {
                classes: self.classes.len(),
                targets: self.class_targets.len(),
            });
        }
        let mut owner = vec![false; self.n_values];
        for (j, c) in self.classes.iter().enumerate() {
            if c.n_values() != self.n_values {
                return Err(EncodeError::DimensionMismatch {
                    class: j,
                    expected: self.n_values,
                    actual: c.n_values(),
                });
            }
            for &k in c.iter() {
                if owner[k] {
                    return Err(EncodeError::Overlap { index: k });
                }
                owner[k] = true;
            }
        }
        if let Some(index) = owner.iter().position(|&o| !o) {
            return Err(EncodeError::Gap { index });
        }
        let mut sum = 0.0;
        for (j, &p) in self.class_targets.iter().enumerate() {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(EncodeError::NegativeTarget { class: j, target: p });
            }
            let size = planned.map_or(self.classes[j].len(), |s| s[j]);
            if size == 0 && p > 0.0 {
                return Err(EncodeError::EmptyClassTarget { class: j, target: p });
            }
            sum += p;
        }
        if fabs(sum - 1.0) > TARGET_SUM_TOLERANCE {
            return Err(EncodeError::NotNormalized { sum });
        }
        let rem = self.remainder_class();
        if self.classes[rem].is_empty() {
            return Err(EncodeError::EmptyRemainder { class: rem });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOptions {
    /// Hard cap on iterates per step, on top of the planner's own bound.
    pub max_iterations: u64,
    /// Class-level slack before a too-high target is refused; `None` uses
    /// the planner default of `1/sqrt(N)`.
    pub overshoot_tolerance: Option<f64>,
    /// Class sizes the planner should assume (e.g. from quantum counting)
    /// instead of the true sizes of the class sets.
    pub planning_sizes: Option<Vec<usize>>,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            overshoot_tolerance: None,
            planning_sizes: None,
        }
    }
}

/// One amplified class in the plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedStep {
    pub class_id: usize,
    /// Class size the planner assumed.
    pub marked_count: usize,
    pub target_class_probability: f64,
    /// `None` for classes that needed no step (empty, or the branch was
    /// already drained and only zero targets were left).
    pub step: Option<StepPlan>,
}

impl PlannedStep {
    pub fn t_f(&self) -> u64 {
        self.step.map_or(0, |s| s.t_f)
    }

    pub fn achieved_class_probability(&self) -> f64 {
        self.step
            .map_or(0.0, |s| s.achieved_per_state_probability * self.marked_count as f64)
    }
}

/// Classical schedule for a whole encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingPlan {
    pub steps: Vec<PlannedStep>,
    pub remainder_class: usize,
    pub total_grover_iterations: u64,
    /// Predicted probability of every class, remainder included.
    pub predicted_class_probabilities: Vec<f64>,
    /// Predicted probability of every value under the sampling rule.
    pub predicted_state_probabilities: Vec<f64>,
}

/// Checks partition, normalization and per-step feasibility (a planner dry run).
pub fn validate_targets(dist: &TargetDistribution, options: &EncodeOptions) -> Result<(), EncodeError> {
    plan_encoding(dist, options).map(|_| ())
}

/// Runs the planner over every step without touching a simulator.
pub fn plan_encoding(dist: &TargetDistribution, options: &EncodeOptions) -> Result<EncodingPlan, EncodeError> {
    let n = dist.n_values;
    let sizes: Vec<usize> = match &options.planning_sizes {
        Some(s) if s.len() != dist.classes.len() => {
            return Err(EncodeError::PlanningSizes {
                expected: dist.classes.len(),
                got: s.len(),
            })
        }
        Some(s) => s.clone(),
        None => dist.classes.iter().map(MarkedSet::len).collect(),
    };
    dist.check_structure(options.planning_sizes.as_deref())?;
    let remainder = dist.remainder_class();
    let order = dist.encoding_order();
    let class_tol = options
        .overshoot_tolerance
        .unwrap_or_else(|| planner::precision_bound(n));

    let mut steps = Vec::with_capacity(order.len());
    let mut class_probs = vec![0.0; dist.classes.len()];
    let mut state: Option<PlannerState> = None;
    let mut b_final = 1.0;
    let mut drained = false;

    for (pos, &class) in order.iter().enumerate() {
        let r = sizes[class];
        let target = dist.class_targets[class];
        let step_no = pos + 1;
        let plan_err = |source| EncodeError::Plan {
            step: step_no,
            class,
            source,
        };
        if r == 0 || drained {
            if drained && target > TARGET_SUM_TOLERANCE {
                return Err(plan_err(PlanError::ExhaustedBranch { remaining: 0.0 }));
            }
            steps.push(PlannedStep {
                class_id: class,
                marked_count: r,
                target_class_probability: target,
                step: None,
            });
            continue;
        }
        let start = match state {
            Some(s) => s,
            None => PlannerState::uniform(n, r).map_err(plan_err)?,
        };
        let plan = planner::plan_step_with_tolerance(&start, target / r as f64, options.max_iterations, class_tol)
            .map_err(plan_err)?;
        class_probs[class] = plan.achieved_per_state_probability * r as f64;

        let next = order[pos + 1..].iter().copied().find(|&c| sizes[c] > 0);
        state = None;
        b_final = planner::remaining_branch_weight(&plan.final_state);
        if let Some(next_class) = next {
            match planner::link_steps(&plan.final_state, sizes[next_class]) {
                Ok(linked) => state = Some(linked),
                Err(PlanError::ExhaustedBranch { .. }) => {
                    drained = true;
                    b_final = 0.0;
                }
                Err(e) => return Err(plan_err(e)),
            }
        }
        steps.push(PlannedStep {
            class_id: class,
            marked_count: r,
            target_class_probability: target,
            step: Some(plan),
        });
    }
    class_probs[remainder] = b_final * b_final;

    let mut per_state = vec![0.0; n];
    for step in &steps {
        if let Some(p) = step.step {
            for &k in dist.classes[step.class_id].iter() {
                per_state[k] = p.achieved_per_state_probability;
            }
        }
    }
    let rem_set = &dist.classes[remainder];
    for &k in rem_set.iter() {
        per_state[k] = class_probs[remainder] / rem_set.len() as f64;
    }

    Ok(EncodingPlan {
        total_grover_iterations: steps.iter().map(PlannedStep::t_f).sum(),
        steps,
        remainder_class: remainder,
        predicted_class_probabilities: class_probs,
        predicted_state_probabilities: per_state,
    })
}

/// Simulator operation reported to an [`encode_with`] observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeEvent {
    GroverIterate { step: usize, class: usize, t: u64 },
    Tick { step: usize, class: usize, index: usize },
}

/// Probabilities as seen through [`sample_value`].
#[derive(Debug, Clone, PartialEq)]
pub struct AchievedDistribution {
    pub per_class: Vec<f64>,
    pub per_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedState {
    pub state: StateVector,
    pub plan: EncodingPlan,
    pub achieved: AchievedDistribution,
    /// Largest `|achieved - target|` over all classes, remainder included.
    pub max_class_error: f64,
    target: TargetDistribution,
}

impl EncodedState {
    pub fn target(&self) -> &TargetDistribution {
        &self.target
    }

    /// Largest per-value gap between the planner's prediction and the simulator.
    pub fn prediction_gap(&self) -> f64 {
        self.achieved
            .per_state
            .iter()
            .zip(&self.plan.predicted_state_probabilities)
            .map(|(a, p)| fabs(a - p))
            .fold(0.0, f64::max)
    }
}

pub fn encode(dist: &TargetDistribution) -> Result<EncodedState, EncodeError> {
    encode_with(dist, &EncodeOptions::default(), |_, _| {})
}

/// Plans, then executes the plan on a fresh `|phi>|1>` register, calling
/// `observer` after every unitary.
pub fn encode_with<F>(dist: &TargetDistribution, options: &EncodeOptions, mut observer: F) -> Result<EncodedState, EncodeError>
where
    F: FnMut(&EncodeEvent, &StateVector),
{
    let plan = plan_encoding(dist, options)?;
    let mut state = StateVector::new_uniform(dist.n_values)?;
    for (pos, step) in plan.steps.iter().enumerate() {
        let Some(step_plan) = step.step else { continue };
        let marked = &dist.classes[step.class_id];
        if marked.is_empty() {
            // Planned from an estimated size, but the oracle marks nothing.
            continue;
        }
        for t in 1..=step_plan.t_f {
            state.apply_conditional_grover(marked)?;
            observer(
                &EncodeEvent::GroverIterate {
                    step: pos + 1,
                    class: step.class_id,
                    t,
                },
                &state,
            );
        }
        for &k in marked.iter() {
            state.apply_tick(k)?;
            observer(
                &EncodeEvent::Tick {
                    step: pos + 1,
                    class: step.class_id,
                    index: k,
                },
                &state,
            );
        }
    }
    let achieved = achieved_from_state(dist, &state);
    let max_class_error = achieved
        .per_class
        .iter()
        .zip(&dist.class_targets)
        .map(|(a, t)| fabs(a - t))
        .fold(0.0, f64::max);
    Ok(EncodedState {
        state,
        plan,
        achieved,
        max_class_error,
        target: dist.clone(),
    })
}

fn achieved_from_state(dist: &TargetDistribution, state: &StateVector) -> AchievedDistribution {
    let probs = state.probabilities();
    let remainder = dist.remainder_class();
    let rem_set = &dist.classes[remainder];
    let share = probs.ancilla_probability(Ancilla::One) / rem_set.len() as f64;
    let mut per_state: Vec<f64> = probs.branch(Ancilla::Zero).to_vec();
    for &k in rem_set.iter() {
        per_state[k] += share;
    }
    let per_class = dist
        .classes
        .iter()
        .map(|c| c.iter().map(|&k| per_state[k]).sum())
        .collect();
    AchievedDistribution { per_class, per_state }
}

/// Probabilities implied by the sampling rule, recomputed from the register.
pub fn achieved_distribution(enc: &EncodedState) -> AchievedDistribution {
    achieved_from_state(&enc.target, &enc.state)
}

/// Measures the ancilla, then either the system (ancilla 0) or picks a
/// uniformly random member of the remainder class (ancilla 1).
pub fn sample_value<R: Rng + ?Sized>(enc: &EncodedState, rng: &mut R) -> usize {
    match enc.state.sample(rng) {
        (index, Ancilla::Zero) => index,
        (_, Ancilla::One) => {
            let rem = enc.target.classes[enc.target.remainder_class()].as_slice();
            rem[rng.gen_range(0..rem.len())]
        }
    }
}

pub fn sample_value_seeded(enc: &EncodedState, seed: u64) -> usize {
    sample_value(enc, &mut crate::rng_from_seed(seed))
}
