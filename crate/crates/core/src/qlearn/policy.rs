//! Class-aggregated Boltzmann action selection.
//!
//! The Q-values over `A_s` are binned into `J` equal-width sub-intervals of
//! `[m, M]`. A class `C_j` gets weight `|C_j| exp(mid_j / T)` and its members
//! share the class probability equally. The quantum selector learns `|C_j|`
//! by counting and realises the distribution with the encoder; the classical
//! selector evaluates every action and samples directly.

use alloc::vec;
use alloc::vec::Vec;

use libm::exp;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::env::{ActionId, StateId};
use super::qfunction::QFunction;
use super::LearnError;
use crate::counting::{count_all_classes, default_precision_bits, ClassCounts, CountingConfig, CountingMode};
use crate::encoder::{encode_with, sample_value, EncodeOptions, EncodedState, RemainderPolicy, TargetDistribution};
use crate::state::MarkedSet;

/// Equal-width split of `[lo, hi]`. Intervals are `[b_j, b_{j+1})` except
/// the last, which is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPartition {
    boundaries: Vec<f64>,
}

impl IntervalPartition {
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn lo(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn hi(&self) -> f64 {
        self.boundaries[self.boundaries.len() - 1]
    }

    /// Number of intervals, after collapsing a degenerate range.
    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        0.5 * (self.boundaries[j] + self.boundaries[j + 1])
    }

    /// Interval holding `value`; boundary values go to the upper interval,
    /// `hi` goes to the last one.
    pub fn interval_of(&self, value: f64) -> Result<usize, LearnError> {
        let (lo, hi) = (self.lo(), self.hi());
        if !(value >= lo && value <= hi) {
            return Err(LearnError::StalePartition { value, lo, hi });
        }
        let above = self.boundaries[..self.len()].partition_point(|&b| b <= value);
        Ok(above.saturating_sub(1).min(self.len() - 1))
    }
}

pub fn partition_intervals(m: f64, big_m: f64, intervals: usize) -> Result<IntervalPartition, LearnError> {
    if intervals == 0 {
        return Err(LearnError::InvalidIntervals(intervals));
    }
    if !(m.is_finite() && big_m.is_finite() && big_m >= m) {
        return Err(LearnError::InvalidRange { lo: m, hi: big_m });
    }
    if big_m == m {
        return Ok(IntervalPartition {
            boundaries: vec![m, big_m],
        });
    }
    let width = big_m - m;
    let mut boundaries: Vec<f64> = (0..intervals)
        .map(|j| m + width * j as f64 / intervals as f64)
        .collect();
    boundaries.push(big_m);
    Ok(IntervalPartition { boundaries })
}

/// Interval index `j_a` of every action (by position in `A_s`) and the
/// resulting classes as marked sets over positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassAssignment {
    pub class_of: Vec<usize>,
    pub classes: Vec<MarkedSet>,
}

impl ClassAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        self.classes.iter().map(MarkedSet::len).collect()
    }
}

pub fn classify_values(values: &[f64], partition: &IntervalPartition) -> Result<ClassAssignment, LearnError> {
    if values.is_empty() {
        return Err(LearnError::NoActions);
    }
    let class_of = values
        .iter()
        .map(|&v| partition.interval_of(v))
        .collect::<Result<Vec<_>, _>>()?;
    let classes = (0..partition.len())
        .map(|j| {
            MarkedSet::from_predicate(values.len(), |k| class_of[k] == j)
                .expect("positions are in range and non-empty")
        })
        .collect();
    Ok(ClassAssignment { class_of, classes })
}

pub fn classify_actions<Q: QFunction + ?Sized>(
    q: &Q,
    s: StateId,
    actions: &[ActionId],
    partition: &IntervalPartition,
) -> Result<ClassAssignment, LearnError> {
    let values: Vec<f64> = actions.iter().map(|&a| q.value(s, a)).collect();
    classify_values(&values, partition)
}

fn check_temperature(t: f64) -> Result<(), LearnError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(LearnError::InvalidTemperature(t))
    }
}

/// `P_j = |C_j| exp(mid_j / T) / Z`; empty classes get 0.
pub fn class_probabilities(partition: &IntervalPartition, counts: &[usize], temperature: f64) -> Result<Vec<f64>, LearnError> {
    check_temperature(temperature)?;
    if counts.len() != partition.len() {
        return Err(LearnError::Config("one count per interval is required".into()));
    }
    let shift = (0..counts.len())
        .filter(|&j| counts[j] > 0)
        .map(|j| partition.midpoint(j))
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Err(LearnError::NoActions);
    }
    let weights: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            if c == 0 {
                0.0
            } else {
                c as f64 * exp((partition.midpoint(j) - shift) / temperature)
            }
        })
        .collect();
    Ok(normalize(weights))
}

/// `P_j proportional to sum_{a in C_j} exp(Q(s,a) / T)`. Needs every Q-value,
/// so it forfeits the call savings of the quantum path.
pub fn class_probabilities_exact(assignment: &ClassAssignment, values: &[f64], temperature: f64) -> Result<Vec<f64>, LearnError> {
    check_temperature(temperature)?;
    if values.is_empty() {
        return Err(LearnError::NoActions);
    }
    let shift = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights = vec![0.0; assignment.classes.len()];
    for (k, &v) in values.iter().enumerate() {
        weights[assignment.class_of[k]] += exp((v - shift) / temperature);
    }
    Ok(normalize(weights))
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemperatureSchedule {
    Constant(f64),
    /// Geometric decay from `initial` at the first episode to `min` at the last.
    Exponential { initial: f64, min: f64 },
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        TemperatureSchedule::Exponential { initial: 1.0, min: 0.05 }
    }
}

impl TemperatureSchedule {
    pub fn at(&self, episode: usize, episodes: usize) -> f64 {
        match *self {
            TemperatureSchedule::Constant(t) => t,
            TemperatureSchedule::Exponential { initial, min } => {
                if episodes <= 1 {
                    return initial;
                }
                let frac = episode.min(episodes - 1) as f64 / (episodes - 1) as f64;
                (initial * libm::pow(min / initial, frac)).max(min)
            }
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        match *self {
            TemperatureSchedule::Constant(t) => check_temperature(t),
            TemperatureSchedule::Exponential { initial, min } => {
                check_temperature(initial)?;
                check_temperature(min)?;
                if min > initial {
                    return Err(LearnError::Config("minimum temperature exceeds the initial one".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectorKind {
    #[default]
    Quantum,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassWeighting {
    /// `|C_j| exp(mid_j / T)`: only needs the counts.
    #[default]
    MidpointCount,
    /// `sum exp(Q / T)` over the class members, computed classically.
    ExactSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub intervals: usize,
    pub schedule: TemperatureSchedule,
    /// Counting precision; `None` uses `ceil(log2 |A_s|) + 3`.
    pub counting_bits: Option<u32>,
    pub counting_mode: CountingMode,
    pub selector: SelectorKind,
    pub weighting: ClassWeighting,
    pub remainder: RemainderPolicy,
    /// Encoder settings. The default accepts any shortfall against the
    /// class targets (best effort) and reports it as `max_class_error`.
    pub encode: EncodeOptions,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            intervals: 4,
            schedule: TemperatureSchedule::default(),
            counting_bits: None,
            counting_mode: CountingMode::Deterministic,
            selector: SelectorKind::Quantum,
            weighting: ClassWeighting::MidpointCount,
            remainder: RemainderPolicy::Last,
            encode: EncodeOptions {
                overshoot_tolerance: Some(f64::INFINITY),
                ..EncodeOptions::default()
            },
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.intervals == 0 {
            return Err(LearnError::InvalidIntervals(0));
        }
        self.schedule.validate()
    }

    pub fn counting_config(&self, n_actions: usize) -> CountingConfig {
        CountingConfig {
            precision_bits: self.counting_bits.unwrap_or_else(|| default_precision_bits(n_actions)),
            mode: self.counting_mode,
        }
    }
}

/// Cost of one decision.
///
/// `j_calls` counts applications of the class oracles inside the encoder
/// (Grover iterates) plus one per counting invocation. The controlled
/// iterates spent inside phase estimation are reported separately in
/// `counting_oracle_calls`, and the classical scan for `m` and `M` in
/// `minmax_evaluations`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecisionStats {
    pub j_calls: u64,
    pub grover_iterations: u64,
    pub counting_invocations: u64,
    pub counting_oracle_calls: u64,
    pub q_evaluations: u64,
    pub minmax_evaluations: u64,
    /// Largest class-probability error of the encoded state (quantum only).
    pub max_class_error: f64,
}

impl DecisionStats {
    pub fn accumulate(&mut self, other: &DecisionStats) {
        self.j_calls += other.j_calls;
        self.grover_iterations += other.grover_iterations;
        self.counting_invocations += other.counting_invocations;
        self.counting_oracle_calls += other.counting_oracle_calls;
        self.q_evaluations += other.q_evaluations;
        self.minmax_evaluations += other.minmax_evaluations;
        self.max_class_error = self.max_class_error.max(other.max_class_error);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: ActionId,
    /// Position of the action in `A_s`.
    pub position: usize,
    pub stats: DecisionStats,
}

/// Everything the quantum selector builds before measuring.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSelection {
    pub partition: IntervalPartition,
    pub assignment: ClassAssignment,
    pub counts: ClassCounts,
    pub class_targets: Vec<f64>,
    pub encoded: EncodedState,
    pub stats: DecisionStats,
}

impl QuantumSelection {
    /// Per-position probabilities realised by the register.
    pub fn action_probabilities(&self) -> &[f64] {
        &self.encoded.achieved.per_state
    }
}

/// Runs partition, classification, counting, weighting and encoding for the
/// Q-values of `A_s` (given by position).
pub fn prepare_quantum_selection<R: Rng + ?Sized>(
    values: &[f64],
    policy: &PolicyConfig,
    temperature: f64,
    rng: &mut R,
) -> Result<QuantumSelection, LearnError> {
    check_temperature(temperature)?;
    let n = values.len();
    if n == 0 {
        return Err(LearnError::NoActions);
    }
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let big_m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let partition = partition_intervals(m, big_m, policy.intervals)?;
    let assignment = classify_values(values, &partition)?;
    let counts = count_all_classes(n, &assignment.classes, &policy.counting_config(n), rng)?;
    let sizes = counts.sizes();
    let class_targets = match policy.weighting {
        ClassWeighting::MidpointCount => class_probabilities(&partition, &sizes, temperature)?,
        ClassWeighting::ExactSum => class_probabilities_exact(&assignment, values, temperature)?,
    };
    let dist = TargetDistribution::from_marked_sets(n, assignment.classes.clone(), class_targets.clone())
        .with_remainder(policy.remainder);
    let options = EncodeOptions {
        planning_sizes: Some(sizes),
        ..policy.encode.clone()
    };
    let encoded = encode_with(&dist, &options, |_, _| {})?;
    let counting_invocations = counts.estimates.len() as u64;
    let grover_iterations = encoded.plan.total_grover_iterations;
    let stats = DecisionStats {
        j_calls: grover_iterations + counting_invocations,
        grover_iterations,
        counting_invocations,
        counting_oracle_calls: counts.oracle_calls(),
        q_evaluations: 0,
        minmax_evaluations: n as u64,
        max_class_error: encoded.max_class_error,
    };
    Ok(QuantumSelection {
        partition,
        assignment,
        counts,
        class_targets,
        encoded,
        stats,
    })
}

/// Per-position target probabilities of the class-aggregated distribution,
/// computed from exact class sizes.
pub fn classical_action_distribution(values: &[f64], policy: &PolicyConfig, temperature: f64) -> Result<Vec<f64>, LearnError> {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let big_m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Err(LearnError::NoActions);
    }
    let partition = partition_intervals(m, big_m, policy.intervals)?;
    let assignment = classify_values(values, &partition)?;
    let sizes = assignment.sizes();
    let class_p = match policy.weighting {
        ClassWeighting::MidpointCount => class_probabilities(&partition, &sizes, temperature)?,
        ClassWeighting::ExactSum => class_probabilities_exact(&assignment, values, temperature)?,
    };
    Ok(assignment
        .class_of
        .iter()
        .map(|&j| class_p[j] / sizes[j] as f64)
        .collect())
}

fn q_values<Q: QFunction + ?Sized>(q: &Q, s: StateId, actions: &[ActionId]) -> Vec<f64> {
    actions.iter().map(|&a| q.value(s, a)).collect()
}

pub fn select_action_quantum<Q, R>(
    q: &Q,
    s: StateId,
    actions: &[ActionId],
    policy: &PolicyConfig,
    temperature: f64,
    rng: &mut R,
) -> Result<Decision, LearnError>
where
    Q: QFunction + ?Sized,
    R: Rng + ?Sized,
{
    match actions.len() {
        0 => Err(LearnError::NoAllowedActions { state: s }),
        1 => Ok(Decision {
            action: actions[0],
            position: 0,
            stats: DecisionStats::default(),
        }),
        _ => {
            let selection = prepare_quantum_selection(&q_values(q, s, actions), policy, temperature, rng)?;
            let position = sample_value(&selection.encoded, rng);
            Ok(Decision {
                action: actions[position],
                position,
                stats: selection.stats,
            })
        }
    }
}

pub fn select_action_classical<Q, R>(
    q: &Q,
    s: StateId,
    actions: &[ActionId],
    policy: &PolicyConfig,
    temperature: f64,
    rng: &mut R,
) -> Result<Decision, LearnError>
where
    Q: QFunction + ?Sized,
    R: Rng + ?Sized,
{
    if actions.is_empty() {
        return Err(LearnError::NoAllowedActions { state: s });
    }
    let stats = DecisionStats {
        q_evaluations: actions.len() as u64,
        ..DecisionStats::default()
    };
    let probs = classical_action_distribution(&q_values(q, s, actions), policy, temperature)?;
    let position = if probs.len() == 1 {
        0
    } else {
        WeightedIndex::new(&probs)
            .expect("class probabilities are finite and sum to one")
            .sample(rng)
    };
    Ok(Decision {
        action: actions[position],
        position,
        stats,
    })
}

/// Dispatches on `policy.selector`.
pub fn select_action<Q, R>(
    q: &Q,
    s: StateId,
    actions: &[ActionId],
    policy: &PolicyConfig,
    temperature: f64,
    rng: &mut R,
) -> Result<Decision, LearnError>
where
    Q: QFunction + ?Sized,
    R: Rng + ?Sized,
{
    match policy.selector {
        SelectorKind::Quantum => select_action_quantum(q, s, actions, policy, temperature, rng),
        SelectorKind::Classical => select_action_classical(q, s, actions, policy, temperature, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlearn::TabularQ;
    use approx::assert_abs_diff_eq;

    #[test]
    fn boundaries() {
        let p = partition_intervals(0.0, 1.0, 4).unwrap();
        assert_eq!(p.boundaries(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let p = partition_intervals(-2.0, 2.0, 2).unwrap();
        assert_eq!(p.boundaries(), &[-2.0, 0.0, 2.0]);
        let p = partition_intervals(0.3, 0.3, 5).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.interval_of(0.3), Ok(0));
        assert!(partition_intervals(0.0, 1.0, 0).is_err());
        assert!(partition_intervals(1.0, 0.0, 2).is_err());
    }

    #[test]
    fn classification_follows_half_open_rule() {
        let p = partition_intervals(0.0, 1.0, 4).unwrap();
        let a = classify_values(&[0.1, 0.3, 0.9], &p).unwrap();
        assert_eq!(a.class_of, vec![0, 1, 3]);
        assert_eq!(p.interval_of(0.25), Ok(1));
        assert_eq!(p.interval_of(1.0), Ok(3));
        assert_eq!(p.interval_of(0.0), Ok(0));
        assert!(matches!(p.interval_of(1.5), Err(LearnError::StalePartition { .. })));
        assert_eq!(a.sizes(), vec![1, 1, 0, 1]);
    }

    #[test]
    fn class_probabilities_by_hand() {
        let p = partition_intervals(0.0, 1.0, 4).unwrap();
        let got = class_probabilities(&p, &[1, 1, 0, 1], 0.5).unwrap();
        let w = [(0.25f64).exp(), (0.75f64).exp(), 0.0, (1.75f64).exp()];
        let z: f64 = w.iter().sum();
        for j in 0..4 {
            assert_abs_diff_eq!(got[j], w[j] / z, epsilon = 1e-15);
        }
        let hot = class_probabilities(&p, &[3, 1, 2, 2], 1e9).unwrap();
        for (h, c) in hot.iter().zip([3.0, 1.0, 2.0, 2.0]) {
            assert_abs_diff_eq!(*h, c / 8.0, epsilon = 1e-8);
        }
        assert_eq!(class_probabilities(&p, &[0, 0, 4, 0], 0.1).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(class_probabilities(&p, &[0; 4], 0.1), Err(LearnError::NoActions));
        assert!(class_probabilities(&p, &[1; 4], 0.0).is_err());
    }

    #[test]
    fn exact_sum_weighting() {
        let p = partition_intervals(0.0, 1.0, 2).unwrap();
        let values = [0.0, 0.2, 1.0];
        let a = classify_values(&values, &p).unwrap();
        let got = class_probabilities_exact(&a, &values, 0.5).unwrap();
        let w0 = 0.0f64.exp() + 0.4f64.exp();
        let w1 = 2.0f64.exp();
        assert_abs_diff_eq!(got[0], w0 / (w0 + w1), epsilon = 1e-15);
    }

    #[test]
    fn single_action_costs_nothing() {
        let q = TabularQ::new(1, 1);
        let mut rng = crate::rng_from_seed(0);
        let d = select_action_quantum(&q, 0, &[0], &PolicyConfig::default(), 1.0, &mut rng).unwrap();
        assert_eq!(d.action, 0);
        assert_eq!(d.stats, DecisionStats::default());
    }

    #[test]
    fn classical_charges_every_action() {
        let q = TabularQ::new(1, 16);
        let mut rng = crate::rng_from_seed(0);
        let actions: Vec<usize> = (0..16).collect();
        let d = select_action_classical(&q, 0, &actions, &PolicyConfig::default(), 1.0, &mut rng).unwrap();
        assert_eq!(d.stats.q_evaluations, 16);
        assert_eq!(d.stats.j_calls, 0);
    }

    #[test]
    fn quantum_targets_match_classical_for_exact_counts() {
        let mut rng = crate::rng_from_seed(9);
        let values: Vec<f64> = (0..32).map(|_| rng.gen::<f64>()).collect();
        let policy = PolicyConfig::default();
        let sel = prepare_quantum_selection(&values, &policy, 0.3, &mut rng).unwrap();
        assert_eq!(sel.counts.sizes(), sel.assignment.sizes());
        let classical = classical_action_distribution(&values, &policy, 0.3).unwrap();
        let tv: f64 = 0.5
            * sel
                .action_probabilities()
                .iter()
                .zip(&classical)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        // Within a class both are uniform, so TV is bounded by the class errors.
        assert!(tv <= 0.5 * sel.encoded.max_class_error * policy.intervals as f64 + 1e-12);
    }

    #[test]
    fn schedule_endpoints() {
        let s = TemperatureSchedule::default();
        assert_abs_diff_eq!(s.at(0, 100), 1.0);
        assert_abs_diff_eq!(s.at(99, 100), 0.05, epsilon = 1e-15);
        assert!(s.at(50, 100) < 1.0 && s.at(50, 100) > 0.05);
        assert_eq!(TemperatureSchedule::Constant(0.7).at(3, 10), 0.7);
    }
}
