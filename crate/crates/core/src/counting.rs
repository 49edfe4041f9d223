//! Simulated quantum counting.
//!
//! A `t`-qubit counting register is put in uniform superposition, controls
//! the powers `G^(2^k)` of the plain Grover iterate acting on `|phi>`, is
//! passed through the inverse Fourier transform and measured. The Grover
//! iterate rotates by `theta = 2 asin(sqrt(r/N))`, so an outcome `y`
//! estimates `r` as `N sin^2(pi y / 2^t)`.
//!
//! The controlled-power cascade leaves the joint register in
//! `sum_x |x> G^x |phi> / sqrt(2^t)`. `G^x |phi>` always lies in the plane
//! spanned by the normalized marked and unmarked superpositions, so the
//! simulation keeps the two coordinates of each `G^x |phi>` in that plane
//! (computed by applying the full `N`-dimensional iterate) and transforms
//! them along `x`. This is exact and needs `O(2^t)` memory instead of
//! `O(2^t N)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{ceil, log2, round, sin, sqrt};
use num_complex::Complex64;
use rand::Rng;

use crate::state::{self, MarkedSet, StateError};

pub const MAX_PRECISION_BITS: u32 = 15;
/// Largest simulated joint register, `2^t * N`.
pub const MAX_REGISTER_DIM: u64 = 1 << 27;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CountError {
    #[error("register dimension must be at least 1")]
    InvalidDimension,
    #[error("precision must be between 1 and {MAX_PRECISION_BITS} bits, got {0}")]
    InvalidPrecision(u32),
    #[error("counting register 2^{bits} x {n_values} exceeds the simulation budget")]
    BudgetExceeded { n_values: usize, bits: u32 },
    #[error("class counts sum to {sum}, more than the {n_values} values available")]
    InconsistentCounts { sum: usize, n_values: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountingMode {
    /// Report the most likely outcome (smallest `y` on ties).
    #[default]
    Deterministic,
    /// Sample the outcome as a device would.
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountingConfig {
    pub precision_bits: u32,
    pub mode: CountingMode,
}

impl CountingConfig {
    /// `ceil(log2 N) + 3` bits, deterministic.
    pub fn default_for(n_values: usize) -> Self {
        Self {
            precision_bits: default_precision_bits(n_values),
            mode: CountingMode::Deterministic,
        }
    }
}

pub fn default_precision_bits(n_values: usize) -> u32 {
    ceil(log2(n_values.max(1) as f64)) as u32 + 3
}

/// Fails when the simulated `2^t x N` register is outside the budget.
pub fn check_budget(n_values: usize, precision_bits: u32) -> Result<(), CountError> {
    if n_values == 0 {
        return Err(CountError::InvalidDimension);
    }
    if precision_bits == 0 {
        return Err(CountError::InvalidPrecision(precision_bits));
    }
    if precision_bits > MAX_PRECISION_BITS || (n_values as u64) << precision_bits > MAX_REGISTER_DIM {
        return Err(CountError::BudgetExceeded {
            n_values,
            bits: precision_bits,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountEstimate {
    pub raw_outcome: u64,
    /// `y / 2^t`.
    pub phase: f64,
    pub estimate_real: f64,
    pub estimate: usize,
    pub error_bound: f64,
    /// Controlled Grover iterates applied: `2^t - 1`.
    pub oracle_calls: u64,
}

impl CountEstimate {
    fn from_outcome(n_values: usize, bits: u32, y: u64) -> Self {
        let m = (1u64 << bits) as f64;
        let nf = n_values as f64;
        let phase = y as f64 / m;
        let s = sin(PI * phase);
        let estimate_real = nf * s * s;
        let estimate = round(estimate_real).clamp(0.0, nf) as usize;
        let spread = (estimate_real * (nf - estimate_real)).max(0.0);
        let error_bound = 2.0 * PI * sqrt(spread) / m + PI * PI * nf / (m * m);
        Self {
            raw_outcome: y,
            phase,
            estimate_real,
            estimate,
            error_bound,
            oracle_calls: (1u64 << bits) - 1,
        }
    }
}

/// In-place unitary inverse DFT, `|x> -> 2^(-t/2) sum_y e^(-2 pi i x y / 2^t) |y>`.
/// The length must be a power of two.
pub fn inverse_qft(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "inverse QFT needs a power-of-two length");
    if n == 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let step = Complex64::from_polar(1.0, -2.0 * PI / len as f64);
        for chunk in buf.chunks_mut(len) {
            let mut w = Complex64::new(1.0, 0.0);
            let (lo, hi) = chunk.split_at_mut(len / 2);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
                w *= step;
            }
        }
        len <<= 1;
    }
    let scale = 1.0 / sqrt(n as f64);
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Exact probability of every counting-register outcome `y in [0, 2^t)`.
pub fn outcome_distribution(marked: &MarkedSet, precision_bits: u32) -> Result<Vec<f64>, CountError> {
    let n = marked.n_values();
    check_budget(n, precision_bits)?;
    let m = 1usize << precision_bits;
    let r = marked.len();
    let inv_marked = if r > 0 { 1.0 / sqrt(r as f64) } else { 0.0 };
    let inv_unmarked = if r < n { 1.0 / sqrt((n - r) as f64) } else { 0.0 };

    let register_scale = 1.0 / sqrt(m as f64);
    let mut system = vec![Complex64::new(1.0 / sqrt(n as f64), 0.0); n];
    let mut along_marked = Vec::with_capacity(m);
    let mut along_unmarked = Vec::with_capacity(m);
    for _ in 0..m {
        let total: Complex64 = system.iter().sum();
        let on_marked: Complex64 = marked.iter().map(|&k| system[k]).sum();
        // Coordinates of G^x |phi> on the marked / unmarked unit vectors,
        // scaled by the counting register's 2^(-t/2).
        along_marked.push(on_marked * inv_marked * register_scale);
        along_unmarked.push((total - on_marked) * inv_unmarked * register_scale);
        state::grover_in_place(&mut system, marked);
    }
    inverse_qft(&mut along_marked);
    inverse_qft(&mut along_unmarked);
    Ok(along_marked
        .iter()
        .zip(&along_unmarked)
        .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
        .collect())
}

fn pick_outcome<R: Rng + ?Sized>(probs: &[f64], mode: CountingMode, rng: &mut R) -> u64 {
    match mode {
        CountingMode::Deterministic => {
            let mut best = 0;
            for (y, &p) in probs.iter().enumerate() {
                if p > probs[best] + 1e-12 {
                    best = y;
                }
            }
            best as u64
        }
        CountingMode::Stochastic => {
            let u: f64 = rng.gen::<f64>() * probs.iter().sum::<f64>();
            let mut acc = 0.0;
            for (y, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return y as u64;
                }
            }
            probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u64
        }
    }
}

/// Estimates how many of the `n_values` basis states satisfy `membership`.
pub fn count<F, R>(
    n_values: usize,
    membership: F,
    config: &CountingConfig,
    rng: &mut R,
) -> Result<CountEstimate, CountError>
where
    F: FnMut(usize) -> bool,
    R: Rng + ?Sized,
{
    if n_values == 0 {
        return Err(CountError::InvalidDimension);
    }
    let marked = MarkedSet::from_predicate(n_values, membership)?;
    count_marked(&marked, config, rng)
}

pub fn count_seeded<F>(n_values: usize, membership: F, config: &CountingConfig, seed: u64) -> Result<CountEstimate, CountError>
where
    F: FnMut(usize) -> bool,
{
    count(n_values, membership, config, &mut crate::rng_from_seed(seed))
}

pub fn count_marked<R: Rng + ?Sized>(
    marked: &MarkedSet,
    config: &CountingConfig,
    rng: &mut R,
) -> Result<CountEstimate, CountError> {
    let probs = outcome_distribution(marked, config.precision_bits)?;
    let y = pick_outcome(&probs, config.mode, rng);
    Ok(CountEstimate::from_outcome(
        marked.n_values(),
        config.precision_bits,
        y,
    ))
}

/// Counted sizes of a partition: the first `J - 1` classes are counted, the
/// last is inferred as `N` minus their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCounts {
    pub estimates: Vec<CountEstimate>,
    pub remainder: usize,
}

impl ClassCounts {
    /// One size per class, remainder last.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.estimates.iter().map(|e| e.estimate).collect();
        s.push(self.remainder);
        s
    }

    pub fn oracle_calls(&self) -> u64 {
        self.estimates.iter().map(|e| e.oracle_calls).sum()
    }
}

pub fn count_all_classes<R: Rng + ?Sized>(
    n_values: usize,
    classes: &[MarkedSet],
    config: &CountingConfig,
    rng: &mut R,
) -> Result<ClassCounts, CountError> {
    if n_values == 0 {
        return Err(CountError::InvalidDimension);
    }
    let counted = classes.len().saturating_sub(1);
    let mut estimates = Vec::with_capacity(counted);
    for class in &classes[..counted] {
        if class.n_values() != n_values {
            return Err(StateError::DimensionMismatch {
                expected: class.n_values(),
                actual: n_values,
            }
            .into());
        }
        estimates.push(count_marked(class, config, rng)?);
    }
    let sum: usize = estimates.iter().map(|e| e.estimate).sum();
    if sum > n_values {
        return Err(CountError::InconsistentCounts { sum, n_values });
    }
    Ok(ClassCounts {
        estimates,
        remainder: n_values - sum,
    })
}
