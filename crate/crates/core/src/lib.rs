//! Tabular workbench for entropy-regularized and robust reinforcement learning.
//!
//! Everything is built on exact finite-MDP primitives ([`mdp`]): normalized
//! occupancy measures, returns and entropy objectives. On top of those sit
//! an occupancy-space solver for entropy-regularized objectives ([`solver`]),
//! closed-form reward adversaries and their uncertainty sets ([`adversary`]),
//! transition-kernel robustness bounds ([`kernel`]), exact CVaR analysis with
//! a constructive risk-aversion counterexample ([`risk`]), particle-based
//! state-entropy estimation ([`estimation`]), and a gridworld benchmark with
//! rollout-based training and perturbation evaluation ([`grid`], [`train`]).
//!
//! All numeric code is generic over the [`Scalar`] float type; the `*64`
//! aliases below are the defaults used by the CLI.

pub mod adversary;
pub mod estimation;
pub mod grid;
pub mod kernel;
pub mod mdp;
pub mod risk;
pub mod scalar;
pub mod solver;
pub mod train;

pub use mdp::{
    compute_occupancy, entropy, expected_return, regularized_return, Mdp, MdpError, Occupancy,
    Policy, RegularizerKind,
};
pub use scalar::Scalar;

pub type Mdp32 = mdp::Mdp<f32>;
pub type Mdp64 = mdp::Mdp<f64>;
pub type Policy32 = mdp::Policy<f32>;
pub type Policy64 = mdp::Policy<f64>;
pub type Occupancy32 = mdp::Occupancy<f32>;
pub type Occupancy64 = mdp::Occupancy<f64>;

/// Deterministic RNG used across the crate: ChaCha8 keyed by a `u64` seed.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    seeded_rng(seed)
}
