//! Minimization of entropy-regularized convex functionals over probability
//! measures by noisy particle gradient descent (NPGD).
//!
//! The crate is organised around three representations of a measure:
//! particle ensembles (what NPGD evolves), cell-mass grids on the torus (what
//! the mean-field Langevin PDE solver evolves) and the objective contract
//! ([`functionals::Objective`]) that evaluates a functional `G`, its first
//! variation `V[mu]` and the gradient of the first variation on either.
//!
//! - [`measures`]: domains, particle ensembles, grid densities, moments.
//! - [`transport`]: exact W2 between equal-size ensembles.
//! - [`snapshot`]: text snapshot formats for ensembles and grids.
//! - [`kernel`]: the cosine-series kernel and its finite feature map.
//! - [`functionals`]: linear potentials, kernel MMD, two-layer networks.
//! - [`dynamics`]: schedules, counter-based noise, NPGD steps and runs.
//! - [`entropy`]: 1-NN entropy, grid entropy, KL and relative Fisher information.
//! - [`oracle`]: grid Fokker-Planck solver and Gibbs fixed-point solver.
//! - [`diagnostics`]: rate fits, entropy sandwich, Talagrand and paired checks.

pub mod diagnostics;
pub mod dynamics;
pub mod entropy;
mod error;
pub mod functionals;
pub mod kernel;
pub mod measures;
pub mod oracle;
pub mod snapshot;
pub mod transport;

pub use error::{Error, Result};
pub use measures::{Domain, DomainKind, GridDensity, ParticleEnsemble};
