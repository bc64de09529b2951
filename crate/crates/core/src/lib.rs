//! Numerical laboratory for a one-dimensional spin chain with short-range
//! ferromagnetic and long-range antiferromagnetic interactions on the
//! discrete torus.
//!
//! The energy of an `N`-periodic state `σ : Z -> {-1,+1}` is
//!
//! ```text
//! E_N(σ) = -J Σ_i σ_i σ_{i+1}  +  Σ_{i≠j} σ_i σ_j / |i-j|^p
//! ```
//!
//! with exponent `p > 1` and coupling `J > 0`, the long-range part summed
//! over all integer images (including each site's interaction with its own
//! periodic copies, which adds the state-independent constant
//! `2 N^{1-p} ζ(p)`).
//!
//! The crate computes:
//!
//! * exact energies through two independent routes (periodized kernel sums
//!   and closed-form block integrals), [`energy`];
//! * the optimal stripe width `h*` minimizing the per-site energy `e(h)`,
//!   [`energy::Engine::find_hstar`];
//! * certified ground states by exhaustive enumeration over symmetry
//!   classes and by branch-and-bound over block compositions, [`solver`];
//! * the anti-phase defect energy density `φ(j)` with finite-size
//!   extrapolation, [`phi`];
//! * the continuum limit functional on piecewise-constant phase functions
//!   together with recovery-sequence construction, [`gamma`];
//! * numerical verification reports for the scaling identity, the general
//!   lower bound, the energy gap, defect decoupling and defect
//!   localization, [`verify`].

pub mod energy;
mod error;
pub mod gamma;
pub mod phi;
pub mod solver;
pub mod specfun;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
