//! Exact simulation of the system register tensored with one ancilla qubit.
//!
//! Amplitudes are stored branch-major: the `n_values` ancilla-0 amplitudes
//! first, then the `n_values` ancilla-1 amplitudes. The system dimension is
//! the number of encoded values itself; no power-of-two padding is applied.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

/// Tolerance used when checking that externally supplied states are normalized.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StateError {
    #[error("register dimension must be at least 1")]
    InvalidDimension,
    #[error("oracle must mark at least one basis state")]
    EmptyOracle,
    #[error("basis index {index} out of range for {n_values} values")]
    OutOfRange { index: usize, n_values: usize },
    #[error("basis index {0} appears twice in the marked set")]
    DuplicateIndex(usize),
    #[error("marked set built for {expected} values applied to a register of {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("amplitude vectors have lengths {0} and {1}, expected equal")]
    BranchLength(usize, usize),
    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),
}

/// State of the ancilla qubit. `Zero` is the "ticked" branch, `One` the
/// branch the conditional Grover iterate acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ancilla {
    Zero = 0,
    One = 1,
}

impl Ancilla {
    pub fn bit(self) -> u8 {
        self as u8
    }
}

/// Sorted, duplicate-free set of basis indices flagged by an oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedSet {
    n_values: usize,
    indices: Vec<usize>,
}

impl MarkedSet {
    /// Builds a set over `[0, n_values)`. Duplicates and out-of-range
    /// indices are rejected; an empty set is allowed here and refused only
    /// by the operations that need a non-trivial oracle.
    pub fn new<I>(n_values: usize, indices: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = usize>,
    {
        if n_values == 0 {
            return Err(StateError::InvalidDimension);
        }
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(StateError::DuplicateIndex(w[0]));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= n_values {
                return Err(StateError::OutOfRange {
                    index: last,
                    n_values,
                });
            }
        }
        Ok(Self { n_values, indices })
    }

    pub fn from_predicate<F>(n_values: usize, mut member: F) -> Result<Self, StateError>
    where
        F: FnMut(usize) -> bool,
    {
        Self::new(n_values, (0..n_values).filter(|&k| member(k)))
    }

    pub fn n_values(&self) -> usize {
        self.n_values
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = &usize> + '_ {
        self.indices.iter()
    }

    fn check_oracle(&self, n_values: usize) -> Result<(), StateError> {
        if self.n_values != n_values {
            return Err(StateError::DimensionMismatch {
                expected: self.n_values,
                actual: n_values,
            });
        }
        if self.indices.is_empty() {
            return Err(StateError::EmptyOracle);
        }
        Ok(())
    }
}

/// Oracle sign flip followed by reflection about the uniform superposition,
/// `R = 2|phi><phi| - I`, which maps every amplitude `v` to `2 mean - v`.
pub(crate) fn grover_in_place(amps: &mut [Complex64], marked: &MarkedSet) {
    for &k in marked.iter() {
        amps[k] = -amps[k];
    }
    let mean = amps.iter().sum::<Complex64>() / amps.len() as f64;
    let twice_mean = mean * 2.0;
    for a in amps.iter_mut() {
        *a = twice_mean - *a;
    }
}

/// Applies one plain Grover iterate `G = R O` to an ancilla-free system vector.
pub fn apply_grover_plain(system: &mut [Complex64], marked: &MarkedSet) -> Result<(), StateError> {
    marked.check_oracle(system.len())?;
    grover_in_place(system, marked);
    Ok(())
}

/// Amplitudes of the (system x ancilla) register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_values: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|phi>|1>_a`: uniform over the system, all weight on ancilla 1.
    pub fn new_uniform(n_values: usize) -> Result<Self, StateError> {
        if n_values == 0 {
            return Err(StateError::InvalidDimension);
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 2 * n_values];
        let a = Complex64::new(1.0 / libm::sqrt(n_values as f64), 0.0);
        amps[n_values..].fill(a);
        Ok(Self { n_values, amps })
    }

    /// Builds a state from explicit branch amplitudes; the result must be
    /// normalized to within [`NORM_TOLERANCE`].
    pub fn from_branches(ancilla0: &[Complex64], ancilla1: &[Complex64]) -> Result<Self, StateError> {
        if ancilla0.len() != ancilla1.len() {
            return Err(StateError::BranchLength(ancilla0.len(), ancilla1.len()));
        }
        if ancilla0.is_empty() {
            return Err(StateError::InvalidDimension);
        }
        let mut amps = Vec::with_capacity(2 * ancilla0.len());
        amps.extend_from_slice(ancilla0);
        amps.extend_from_slice(ancilla1);
        let state = Self {
            n_values: ancilla0.len(),
            amps,
        };
        let norm = state.norm_sqr();
        if libm::fabs(norm - 1.0) > NORM_TOLERANCE {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn n_values(&self) -> usize {
        self.n_values
    }

    pub fn amplitude(&self, index: usize, ancilla: Ancilla) -> Complex64 {
        self.amps[ancilla as usize * self.n_values + index]
    }

    pub fn branch(&self, ancilla: Ancilla) -> &[Complex64] {
        let start = ancilla as usize * self.n_values;
        &self.amps[start..start + self.n_values]
    }

    fn branch_mut(&mut self, ancilla: Ancilla) -> &mut [Complex64] {
        let start = ancilla as usize * self.n_values;
        &mut self.amps[start..start + self.n_values]
    }

    /// Amplitudes in storage order (ancilla-0 branch, then ancilla-1 branch).
    pub fn as_slice(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `I (x) Pi0 + G (x) Pi1`: one Grover iterate on the ancilla-1 branch only.
    pub fn apply_conditional_grover(&mut self, marked: &MarkedSet) -> Result<(), StateError> {
        marked.check_oracle(self.n_values)?;
        grover_in_place(self.branch_mut(Ancilla::One), marked);
        Ok(())
    }

    /// Ancilla NOT controlled on the system being in `|index>`: swaps the
    /// amplitudes at `(index, 0)` and `(index, 1)`.
    pub fn apply_tick(&mut self, index: usize) -> Result<(), StateError> {
        if index >= self.n_values {
            return Err(StateError::OutOfRange {
                index,
                n_values: self.n_values,
            });
        }
        self.amps.swap(index, self.n_values + index);
        Ok(())
    }

    pub fn probabilities(&self) -> ProbabilityTable {
        ProbabilityTable {
            n_values: self.n_values,
            probs: self.amps.iter().map(|a| a.norm_sqr()).collect(),
        }
    }

    /// Measures the full register (ancilla and system) once.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Ancilla) {
        self.probabilities().sample(rng)
    }

    pub fn sample_seeded(&self, seed: u64) -> (usize, Ancilla) {
        self.sample(&mut crate::rng_from_seed(seed))
    }
}

/// Born-rule probabilities of every `(index, ancilla)` outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    n_values: usize,
    probs: Vec<f64>,
}

impl ProbabilityTable {
    pub fn n_values(&self) -> usize {
        self.n_values
    }

    pub fn get(&self, index: usize, ancilla: Ancilla) -> f64 {
        self.probs[ancilla as usize * self.n_values + index]
    }

    pub fn branch(&self, ancilla: Ancilla) -> &[f64] {
        let start = ancilla as usize * self.n_values;
        &self.probs[start..start + self.n_values]
    }

    /// Probability of measuring the ancilla in the given state.
    pub fn ancilla_probability(&self, ancilla: Ancilla) -> f64 {
        self.branch(ancilla).iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Ancilla) {
        let u: f64 = rng.gen::<f64>() * self.total();
        let mut acc = 0.0;
        let mut last_nonzero = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_nonzero = i;
                acc += p;
                if u < acc {
                    return self.split(i);
                }
            }
        }
        // Rounding left u at the very top of the cumulative sum.
        self.split(last_nonzero)
    }

    fn split(&self, flat: usize) -> (usize, Ancilla) {
        if flat < self.n_values {
            (flat, Ancilla::Zero)
        } else {
            (flat - self.n_values, Ancilla::One)
        }
    }
}
