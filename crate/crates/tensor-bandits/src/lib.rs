//! Low-rank tensor bandits.
//!
//! The library is organised bottom-up:
//!
//! * [`tensor`]: dense tensors, mode products, matricization, a text format.
//! * [`tucker`]: thin SVD, HOSVD, orthonormal complements.
//! * [`regression`]: noisy linear measurements of a tensor and two
//!   estimators that recover it (ridge + HOSVD, alternating least squares).
//! * [`projection`]: the change of basis that concentrates a low-rank
//!   system tensor into a few leading coordinates, plus block bookkeeping.
//! * [`bandit`]: a weighted-ridge UCB policy over the projected coordinates
//!   and the two-phase algorithm built on it.
//! * [`env`]: synthetic environments (random low-rank systems, the
//!   worst-case instance family, action offers, noisy rewards).
//! * [`harness`]: experiment configs, parallel runs, CSV and SVG output,
//!   and the self test used by the command line interface.

pub mod bandit;
pub mod env;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod projection;
pub mod regression;
pub mod tensor;
#[cfg(test)]
pub(crate) mod testutil;
pub mod tucker;

pub use error::Error;

/// Deterministic RNG used across the crate so that seeded runs replay
/// identically on every platform.
pub type Rng = rand_chacha::ChaCha8Rng;
