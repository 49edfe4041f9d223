//! Closed-form bookkeeping of the register between Grover iterations.
//!
//! Within one encoding step the ancilla-1 branch `|beta>` is summarised by
//! three amplitudes: the common amplitude `k_bar` of the `r` states being
//! amplified, the mean amplitude `l_bar` of every other state, and the common
//! amplitude `alpha` of the states no operation has singled out yet. One
//! Grover iterate is a rotation by `w = 2 asin(sqrt(r / N))` in the
//! `(k_bar, l_bar)` plane, and `alpha` follows a first-order recursion driven
//! by that rotation. Together with the branch weight `b` this is enough to
//! predict every probability of the simulated register without simulating
//! it.

use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use libm::{acos, asin, atan, ceil, cos, fabs, sin, sqrt};

/// Threshold below which the unticked branch is considered empty.
const EXHAUSTION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("register dimension must be at least 1")]
    InvalidDimension,
    #[error("marked count {r} is not in [1, {n_values}]")]
    InvalidMarkedCount { r: usize, n_values: usize },
    #[error("target probability {0} is outside [0, 1]")]
    InvalidTarget(f64),
    #[error("target {target} exceeds the best achievable probability {best}")]
    Overshoot { target: f64, best: f64 },
    #[error("alpha recursion needs at least one untouched state")]
    NoUntouchedStates,
    #[error("unticked branch exhausted: {remaining} of its weight is left")]
    ExhaustedBranch { remaining: f64 },
}

/// Rotation angle of one Grover iterate with `r` of `n_values` states marked.
pub fn angular_rate(n_values: usize, r: usize) -> Result<f64, PlanError> {
    if n_values == 0 {
        return Err(PlanError::InvalidDimension);
    }
    if r == 0 || r > n_values {
        return Err(PlanError::InvalidMarkedCount { r, n_values });
    }
    Ok(2.0 * asin(sqrt(r as f64 / n_values as f64)))
}

/// Averages after `t` Grover iterates. `l_bar` is `None` when every state is
/// marked (`r == N`) since the unmarked mean is then undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evolved {
    pub k_bar: f64,
    pub l_bar: Option<f64>,
}

pub fn evolve(k0: f64, l0: f64, n_values: usize, r: usize, t: u64) -> Result<Evolved, PlanError> {
    let w = angular_rate(n_values, r)?;
    let (s, c) = (sin(w * t as f64), cos(w * t as f64));
    if r == n_values {
        return Ok(Evolved {
            k_bar: k0 * c,
            l_bar: None,
        });
    }
    let ratio = (n_values - r) as f64 / r as f64;
    Ok(Evolved {
        k_bar: k0 * c + l0 * sqrt(ratio) * s,
        l_bar: Some(l0 * c - k0 * sqrt(1.0 / ratio) * s),
    })
}

/// Classical summary of the register at iteration `t` of step `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerState {
    pub n_values: usize,
    /// Number of states amplified in this step.
    pub r: usize,
    pub k_bar: f64,
    pub l_bar: f64,
    pub alpha: f64,
    /// Weight of the unticked (ancilla-1) branch.
    pub b: f64,
    /// Number of states, outside the marked set, never amplified or ticked.
    pub untouched: usize,
    pub step: usize,
    pub t: u64,
}

impl PlannerState {
    /// Start of the first step from `|phi>|1>`.
    pub fn uniform(n_values: usize, r: usize) -> Result<Self, PlanError> {
        angular_rate(n_values, r)?;
        let a = 1.0 / sqrt(n_values as f64);
        Ok(Self {
            n_values,
            r,
            k_bar: a,
            l_bar: a,
            alpha: a,
            b: 1.0,
            untouched: n_values - r,
            step: 1,
            t: 0,
        })
    }

    /// Probability of measuring any single marked state on the unticked branch.
    pub fn per_state_probability(&self) -> f64 {
        self.b * self.b * self.k_bar * self.k_bar
    }

    /// Probability of measuring one of the never-touched states.
    pub fn untouched_probability(&self) -> f64 {
        self.b * self.b * self.alpha * self.alpha
    }

    /// Advances the summary by `iterations` Grover iterates.
    pub fn advanced(&self, iterations: u64) -> Result<Self, PlanError> {
        let mut next = *self;
        for _ in 0..iterations {
            let alpha = if next.untouched > 0 {
                alpha_recursion(&next)?
            } else {
                0.0
            };
            let ev = evolve(next.k_bar, next.l_bar, next.n_values, next.r, 1)?;
            next.k_bar = ev.k_bar;
            next.l_bar = ev.l_bar.unwrap_or(0.0);
            next.alpha = alpha;
            next.t += 1;
        }
        Ok(next)
    }
}

/// Amplitude of a never-touched state after one more Grover iterate:
/// `alpha(t+1) = (2/N) (-r k_bar + (N - r) l_bar) - alpha(t)`.
///
/// For a single marked state this is `(2/N) l_bar (N-1) - (2/N) k - alpha`.
pub fn alpha_recursion(planner: &PlannerState) -> Result<f64, PlanError> {
    let n = planner.n_values;
    let r = planner.r;
    if r == 0 || r >= n {
        return Err(PlanError::InvalidMarkedCount { r, n_values: n });
    }
    if planner.untouched == 0 {
        return Err(PlanError::NoUntouchedStates);
    }
    let nf = n as f64;
    Ok(2.0 / nf * (-(r as f64) * planner.k_bar + (n - r) as f64 * planner.l_bar) - planner.alpha)
}

/// Outcome of scanning the iteration count for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub target_per_state_probability: f64,
    pub t_f: u64,
    /// Summary after `t_f` iterates; carries the predicted `k_bar`, `l_bar`, `alpha`.
    pub final_state: PlannerState,
    pub achieved_per_state_probability: f64,
    pub abs_error: f64,
}

impl StepPlan {
    pub fn predicted_k_bar(&self) -> f64 {
        self.final_state.k_bar
    }

    pub fn predicted_l_bar(&self) -> f64 {
        self.final_state.l_bar
    }

    pub fn predicted_alpha(&self) -> f64 {
        self.final_state.alpha
    }
}

/// [`plan_step_with_tolerance`] with the class-level tolerance set to
/// [`precision_bound`] of the register size.
pub fn plan_step(
    planner: &PlannerState,
    target_per_state_probability: f64,
    max_iterations: u64,
) -> Result<StepPlan, PlanError> {
    let tol = precision_bound(planner.n_values);
    plan_step_with_tolerance(planner, target_per_state_probability, max_iterations, tol)
}

/// Picks `t_f` in `[0, min(max_iterations, ceil(N_I))]` minimising
/// `|b^2 k_bar(t)^2 - target|`, preferring the smaller `t` on ties.
///
/// A target above the best reachable probability by more than
/// `class_tolerance / r` is refused with [`PlanError::Overshoot`].
pub fn plan_step_with_tolerance(
    planner: &PlannerState,
    target_per_state_probability: f64,
    max_iterations: u64,
    class_tolerance: f64,
) -> Result<StepPlan, PlanError> {
    let target = target_per_state_probability;
    if !(0.0..=1.0).contains(&target) {
        return Err(PlanError::InvalidTarget(target));
    }
    angular_rate(planner.n_values, planner.r)?;
    let bound = iteration_upper_bound(planner);
    let t_max = (ceil(bound.exact) as u64).min(max_iterations);

    let b2 = planner.b * planner.b;
    let mut current = *planner;
    let mut best = (current, fabs(current.per_state_probability() - target));
    let mut best_probability = current.per_state_probability();
    for t in 1..=t_max {
        let alpha = if current.untouched > 0 {
            alpha_recursion(&current)?
        } else {
            0.0
        };
        // Closed form from the step start keeps rounding from accumulating.
        let ev = evolve(planner.k_bar, planner.l_bar, planner.n_values, planner.r, t)?;
        current = PlannerState {
            k_bar: ev.k_bar,
            l_bar: ev.l_bar.unwrap_or(0.0),
            alpha,
            t: planner.t + t,
            ..current
        };
        let p = b2 * ev.k_bar * ev.k_bar;
        best_probability = best_probability.max(p);
        let err = fabs(p - target);
        if err < best.1 {
            best = (current, err);
        }
    }
    if target - best_probability > class_tolerance / planner.r as f64 {
        return Err(PlanError::Overshoot {
            target,
            best: best_probability,
        });
    }
    let (final_state, abs_error) = best;
    Ok(StepPlan {
        target_per_state_probability: target,
        t_f: final_state.t - planner.t,
        final_state,
        achieved_per_state_probability: final_state.per_state_probability(),
        abs_error,
    })
}

/// Initial summary of the next step after the current marked set is ticked.
///
/// `b' = b sqrt(1 - r k_bar^2)`, `k_bar' = alpha' = (b / b') alpha` and
/// `l_bar' = (b / b') ((N - r) l_bar - r' alpha) / (N - r')`.
pub fn link_steps(planner_at_tf: &PlannerState, next_r: usize) -> Result<PlannerState, PlanError> {
    let p = planner_at_tf;
    let n = p.n_values;
    if next_r == 0 || next_r > p.untouched {
        return Err(PlanError::InvalidMarkedCount {
            r: next_r,
            n_values: p.untouched,
        });
    }
    let remaining = 1.0 - p.r as f64 * p.k_bar * p.k_bar;
    if remaining <= EXHAUSTION_EPS {
        return Err(PlanError::ExhaustedBranch { remaining });
    }
    let scale = 1.0 / sqrt(remaining);
    let alpha = scale * p.alpha;
    let l_bar = scale * ((n - p.r) as f64 * p.l_bar - next_r as f64 * p.alpha) / (n - next_r) as f64;
    Ok(PlannerState {
        n_values: n,
        r: next_r,
        k_bar: alpha,
        l_bar,
        alpha,
        b: p.b * sqrt(remaining),
        untouched: p.untouched - next_r,
        step: p.step + 1,
        t: 0,
    })
}

/// Weight left on the unticked branch once the current marked set is ticked.
pub fn remaining_branch_weight(planner_at_tf: &PlannerState) -> f64 {
    let p = planner_at_tf;
    let remaining = (1.0 - p.r as f64 * p.k_bar * p.k_bar).max(0.0);
    p.b * sqrt(remaining)
}

/// Upper bound on the useful number of iterates in a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationBound {
    pub exact: f64,
    pub leading_order: f64,
    /// Set when `l_bar <= 0` or every state is marked; both values are then 0.
    pub degenerate: bool,
}

/// `N_I = (pi/2 - atan((k_bar / l_bar) sqrt(r / (N - r)))) / acos(1 - 2r/N)`,
/// with leading order `-(k_bar / 2 l_bar) + (pi/4) sqrt(N / r)`.
pub fn iteration_upper_bound(planner: &PlannerState) -> IterationBound {
    let n = planner.n_values as f64;
    let r = planner.r as f64;
    if planner.l_bar <= 0.0 || planner.r == 0 || planner.r >= planner.n_values {
        return IterationBound {
            exact: 0.0,
            leading_order: 0.0,
            degenerate: true,
        };
    }
    let ratio = planner.k_bar / planner.l_bar;
    let exact = (FRAC_PI_2 - atan(ratio * sqrt(r / (n - r)))) / acos(1.0 - 2.0 * r / n);
    IterationBound {
        exact: exact.max(0.0),
        leading_order: -0.5 * ratio + FRAC_PI_4 * sqrt(n / r),
        degenerate: false,
    }
}

/// Nominal probability granularity of one iterate, `1 / sqrt(N)`.
pub fn precision_bound(n_values: usize) -> f64 {
    1.0 / sqrt(n_values.max(1) as f64)
}

/// Change of the single-state probability between iterates `t` and `t + 1`
/// of the step described by `planner` (taken at its step start).
pub fn probability_increment(planner: &PlannerState, t: u64) -> Result<f64, PlanError> {
    let a = evolve(planner.k_bar, planner.l_bar, planner.n_values, planner.r, t)?.k_bar;
    let b = evolve(planner.k_bar, planner.l_bar, planner.n_values, planner.r, t + 1)?.k_bar;
    Ok(planner.b * planner.b * (b * b - a * a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    #[test]
    fn angular_rate_values() {
        assert_abs_diff_eq!(angular_rate(4, 1).unwrap(), PI / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(angular_rate(7, 7).unwrap(), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(angular_rate(8, 2).unwrap(), PI / 3.0, epsilon = 1e-15);
        assert!(matches!(angular_rate(8, 0), Err(PlanError::InvalidMarkedCount { .. })));
        assert!(matches!(angular_rate(8, 9), Err(PlanError::InvalidMarkedCount { .. })));
    }

    #[test]
    fn evolve_examples() {
        let ev = evolve(0.3, 0.2, 9, 2, 0).unwrap();
        assert_eq!((ev.k_bar, ev.l_bar), (0.3, Some(0.2)));

        let ev = evolve(0.5, 0.5, 4, 1, 1).unwrap();
        assert_abs_diff_eq!(ev.k_bar, 1.0, epsilon = 1e-15);

        let a = 1.0 / 8f64.sqrt();
        let ev = evolve(a, a, 8, 1, 1).unwrap();
        assert_abs_diff_eq!(ev.k_bar, 2.5 / 8f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(ev.k_bar * ev.k_bar, 25.0 / 32.0, epsilon = 1e-15);

        let ev = evolve(0.4, 0.0, 5, 5, 1).unwrap();
        assert_eq!(ev.l_bar, None);
        assert_abs_diff_eq!(ev.k_bar, -0.4, epsilon = 1e-15);
    }

    #[test]
    fn alpha_recursion_examples() {
        let p = PlannerState::uniform(4, 1).unwrap();
        assert_abs_diff_eq!(alpha_recursion(&p).unwrap(), 0.0, epsilon = 1e-15);

        let p = PlannerState::uniform(8, 1).unwrap();
        let a1 = alpha_recursion(&p).unwrap();
        assert_abs_diff_eq!(a1, 0.5 / 8f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(25.0 / 32.0 + 7.0 * a1 * a1, 1.0, epsilon = 1e-15);

        let p = PlannerState {
            untouched: 0,
            ..PlannerState::uniform(8, 1).unwrap()
        };
        assert_eq!(alpha_recursion(&p), Err(PlanError::NoUntouchedStates));
    }

    #[test]
    fn plan_step_examples() {
        let p = PlannerState::uniform(8, 1).unwrap();
        let plan = plan_step(&p, 1.0 / 8.0, 100).unwrap();
        assert_eq!(plan.t_f, 0);
        assert_abs_diff_eq!(plan.abs_error, 0.0, epsilon = 1e-15);

        let plan = plan_step(&p, 0.78125, 100).unwrap();
        assert_eq!(plan.t_f, 1);
        assert_abs_diff_eq!(plan.abs_error, 0.0, epsilon = 1e-15);

        let p = PlannerState::uniform(4, 1).unwrap();
        let plan = plan_step(&p, 1.0, 100).unwrap();
        assert_eq!(plan.t_f, 1);
        assert_abs_diff_eq!(plan.achieved_per_state_probability, 1.0, epsilon = 1e-15);

        assert_eq!(plan_step(&p, 1.5, 10), Err(PlanError::InvalidTarget(1.5)));
    }

    #[test]
    fn plan_step_overshoot_and_iteration_cap() {
        // Half the branch weight is gone; a single state cannot reach 0.9.
        let p = PlannerState {
            b: 0.5f64.sqrt(),
            ..PlannerState::uniform(1024, 1).unwrap()
        };
        match plan_step(&p, 0.9, 1000) {
            Err(PlanError::Overshoot { best, .. }) => assert!(best <= 0.5 + 1e-12),
            other => panic!("expected overshoot, got {other:?}"),
        }
        let p = PlannerState::uniform(1024, 1).unwrap();
        let capped = plan_step_with_tolerance(&p, 0.5, 3, 1.0).unwrap();
        assert_eq!(capped.t_f, 3);
    }

    #[test]
    fn link_after_first_step_at_eight() {
        let p = PlannerState::uniform(8, 1).unwrap();
        let at_tf = p.advanced(1).unwrap();
        let next = link_steps(&at_tf, 1).unwrap();
        assert_abs_diff_eq!(next.b, (7.0f64 / 32.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(next.k_bar, 0.377_964_473_009_227_2, epsilon = 1e-12);
        assert_abs_diff_eq!(7.0 * next.k_bar * next.k_bar, 1.0, epsilon = 1e-12);
        assert_eq!(next.alpha, next.k_bar);
        assert_eq!(next.step, 2);
        assert_eq!(next.untouched, 6);
    }

    #[test]
    fn link_with_zero_amplitude_keeps_weight() {
        let p = PlannerState {
            k_bar: 0.0,
            ..PlannerState::uniform(8, 1).unwrap()
        };
        let next = link_steps(&p, 2).unwrap();
        assert_eq!(next.b, p.b);
        assert_abs_diff_eq!(next.k_bar, p.alpha, epsilon = 1e-15);
    }

    #[test]
    fn link_rejects_exhausted_branch() {
        let at_tf = PlannerState::uniform(4, 1).unwrap().advanced(1).unwrap();
        assert!(matches!(link_steps(&at_tf, 1), Err(PlanError::ExhaustedBranch { .. })));
    }

    #[test]
    fn iteration_bound_examples() {
        let b = iteration_upper_bound(&PlannerState::uniform(4, 1).unwrap());
        assert_abs_diff_eq!(b.exact, 1.0, epsilon = 1e-12);
        assert!(!b.degenerate);

        let b = iteration_upper_bound(&PlannerState::uniform(1024, 1).unwrap());
        assert_abs_diff_eq!(b.leading_order, -0.5 + PI / 4.0 * 32.0, epsilon = 1e-12);
        assert!((b.exact - b.leading_order).abs() < 1.0);

        let base = PlannerState {
            k_bar: 0.0,
            ..PlannerState::uniform(64, 1).unwrap()
        };
        let lifted = PlannerState { k_bar: 0.1, ..base };
        assert!(iteration_upper_bound(&lifted).exact < iteration_upper_bound(&base).exact);

        let flat = PlannerState { l_bar: 0.0, ..base };
        let b = iteration_upper_bound(&flat);
        assert!(b.degenerate);
        assert_eq!(b.exact, 0.0);
    }

    #[test]
    fn precision_bound_scaling() {
        assert_abs_diff_eq!(precision_bound(100), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(precision_bound(64) / precision_bound(1024), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn single_iterate_increment_is_of_the_bound_order() {
        let p = PlannerState::uniform(256, 1).unwrap();
        let t_max = ceil(iteration_upper_bound(&p).exact) as u64;
        let worst = (0..t_max)
            .map(|t| probability_increment(&p, t).unwrap().abs())
            .fold(0.0, f64::max);
        let ratio = worst / precision_bound(256);
        assert!((0.25..=4.0).contains(&ratio), "ratio {ratio}");
    }
}
