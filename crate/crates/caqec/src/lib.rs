//! Channel-adapted quantum error correction and its robustness analysis.
//!
//! The crate builds optimal error-correction recoveries for a fixed stabilizer
//! encoding, in two regimes:
//!
//! - **Pauli channels**: the optimal recovery is analytical. Every Pauli error
//!   factors through a coset of the stabilizer group, the channel reduces to a
//!   table of coset probabilities, and the best recovery corrects the most
//!   probable coset in each syndrome subspace ([`adapt`]).
//! - **Arbitrary channels**: the optimal recovery is the solution of a
//!   semidefinite program over the recovery's Choi matrix ([`sdp`]).
//!
//! On top of both sits a robustness toolkit: mix the modeled channel with an
//! unexpected one, track how fast a fixed recovery falls behind the re-optimized
//! one, and locate the boundary of the region in which the original recovery
//! stays optimal ([`adapt::robustness_curve`], [`sdp::choi_derivative_curve`]).
//!
//! [`experiment`] drives the whole pipeline from plain config files and emits
//! CSV tables and SVG plots; the `caqec` binary is a thin wrapper around it.

pub mod adapt;
pub mod channel;
pub mod experiment;
pub mod linalg;
pub mod pauli;
pub mod plot;
pub mod sdp;
pub mod stabilizer;

pub use adapt::{OptimalPlan, RecoveryPlan, RobustnessReport};
pub use channel::{KrausChannel, PauliChannel, ReducedErrorTable};
pub use pauli::PauliOperator;
pub use sdp::{ChoiMatrix, SdpOptions, SdpSolution};
pub use stabilizer::{CosetIndex, StabilizerCode};
