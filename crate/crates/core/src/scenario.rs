//! Seeded generators of random encoding problems, shared by the sweep
//! command and the test suites.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::encoder::{EncodeError, TargetDistribution};
use crate::planner::{self, PlannerState};

/// Flat Dirichlet sample: `k` non-negative weights summing to one.
pub fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -libm::log(1.0 - rng.gen::<f64>())).collect();
    let total: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.iter().map(|x| x / total).collect();
    // Push the rounding residue into the last entry so the sum is 1 to the last bit.
    let head: f64 = out[..k - 1].iter().sum();
    out[k - 1] = (1.0 - head).max(0.0);
    out
}

/// Splits a shuffled `[0, n)` into `classes` non-empty classes of random size.
pub fn random_partition<R: Rng + ?Sized>(n: usize, classes: usize, rng: &mut R) -> Vec<Vec<usize>> {
    assert!(classes >= 1 && classes <= n, "need 1 <= classes <= n");
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(classes - 1).collect();
    cuts.sort_unstable();
    let mut members: Vec<usize> = (0..n).collect();
    members.shuffle(rng);
    let mut out = Vec::with_capacity(classes);
    let mut start = 0;
    for end in cuts.into_iter().chain(core::iter::once(n)) {
        out.push(members[start..end].to_vec());
        start = end;
    }
    out
}

/// Random partition into `classes` classes with flat-Dirichlet class targets.
pub fn random_distribution<R: Rng + ?Sized>(
    n: usize,
    classes: usize,
    rng: &mut R,
) -> Result<TargetDistribution, EncodeError> {
    let parts = random_partition(n, classes, rng);
    TargetDistribution::new(n, parts, random_simplex(classes, rng))
}

/// Random partition whose class targets are exactly reachable: every step
/// runs a random number of iterates (within the planner's bound) and its
/// resulting class probability becomes the target.
pub fn random_feasible_distribution<R: Rng + ?Sized>(
    n: usize,
    classes: usize,
    rng: &mut R,
) -> Result<TargetDistribution, EncodeError> {
    let parts = random_partition(n, classes, rng);
    random_feasible_targets(n, parts, rng)
}

/// Reachable targets (see [`random_feasible_distribution`]) for a given
/// partition; the last class is the remainder.
pub fn random_feasible_targets<R: Rng + ?Sized>(
    n: usize,
    parts: Vec<Vec<usize>>,
    rng: &mut R,
) -> Result<TargetDistribution, EncodeError> {
    let classes = parts.len();
    if classes == 0 {
        return Err(EncodeError::NoClasses);
    }
    let mut targets = vec![0.0; classes];
    let mut start: Option<PlannerState> = None;
    for j in 0..classes - 1 {
        let r = parts[j].len();
        let s0 = match start {
            Some(s) => s,
            None => PlannerState::uniform(n, r).map_err(|source| EncodeError::Plan { step: 1, class: 0, source })?,
        };
        let bound = libm::ceil(planner::iteration_upper_bound(&s0).exact).max(0.0) as u64;
        let mut t = rng.gen_range(0..=bound);
        let end = loop {
            let end = s0.advanced(t).map_err(|source| EncodeError::Plan { step: j + 1, class: j, source })?;
            // Avoid draining the branch: later classes would have nothing left.
            if 1.0 - r as f64 * end.k_bar * end.k_bar > 1e-6 || t == 0 {
                break end;
            }
            t -= 1;
        };
        targets[j] = r as f64 * end.per_state_probability();
        start = planner::link_steps(&end, parts[j + 1].len()).ok();
        if start.is_none() {
            break;
        }
    }
    let head: f64 = targets[..classes - 1].iter().sum();
    targets[classes - 1] = (1.0 - head).max(0.0);
    TargetDistribution::new(n, parts, targets)
}

/// `classes - 1` amplified classes of 1..=`max_class_size` members each and
/// a remainder class holding everything else. Class sizes stay fixed as
/// `n` grows, which is the regime where per-step granularity shrinks like
/// `1/sqrt(n)`.
pub fn small_class_distribution<R: Rng + ?Sized>(
    n: usize,
    classes: usize,
    max_class_size: usize,
    rng: &mut R,
) -> Result<TargetDistribution, EncodeError> {
    assert!(classes >= 1 && (classes - 1) * max_class_size < n, "classes do not fit");
    let mut members: Vec<usize> = (0..n).collect();
    members.shuffle(rng);
    let mut parts = Vec::with_capacity(classes);
    let mut start = 0;
    for _ in 0..classes - 1 {
        let size = rng.gen_range(1..=max_class_size);
        parts.push(members[start..start + size].to_vec());
        start += size;
    }
    parts.push(members[start..].to_vec());
    TargetDistribution::new(n, parts, random_simplex(classes, rng))
}
