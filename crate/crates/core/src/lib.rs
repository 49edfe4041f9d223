//! Sequential conditional-Grover encoding of discrete probability
//! distributions, with the classical machinery needed to drive it.
//!
//! The crate is `no_std` (it needs `alloc`) and holds only the numerical
//! core: the file formats, configuration and command-line front end live in
//! the `qdist` crate.
//!
//! - [`state`] simulates the system register plus one ancilla qubit and the
//!   unitaries applied to it (conditional Grover iterate, ancilla tick).
//! - [`planner`] predicts the register evolution in closed form, picks the
//!   number of Grover iterations for every step and links consecutive steps.
//! - [`encoder`] runs a full class-by-class encoding on the simulator and
//!   samples values using the ancilla rule.
//! - [`counting`] simulates quantum counting (phase estimation over the
//!   Grover iterate) to estimate class sizes.
//! - [`qlearn`] wires everything into a Q-learning loop with class-aggregated
//!   Boltzmann action selection and oracle-call accounting.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod counting;
pub mod encoder;
pub mod planner;
pub mod qlearn;
pub mod scenario;
pub mod state;

pub use num_complex::Complex64;

/// Seedable generator used throughout the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's deterministic generator from an integer seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
