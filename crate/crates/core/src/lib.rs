//! Force-noise analysis of interferometers whose arms are guided by
//! shortcut-to-adiabaticity (STA) trap trajectories.
//!
//! The crate covers the whole chain from a trap trajectory to the fringe
//! contrast it produces:
//!
//! * [`units`]: the µm / µs / zN unit system and the physical configuration.
//! * [`trajectory`]: polynomial and grid-interpolated trap paths with analytic
//!   derivatives, plus the inverse-engineered compensating force.
//! * [`functionals`]: sensitivity, the noise functional `W = ∫α²α̈² dt`,
//!   the second-order visibility loss and interference populations.
//! * [`noise`]: white-noise realizations, exact Gaussian branch propagation,
//!   the Monte Carlo overlap estimator and a split-step PDE cross-check.
//! * [`optimizer`]: the scaled fourth-order Euler–Poisson boundary-value
//!   problem, δ continuation sweeps and the quartic `W ∝ S⁴` fit.
//! * [`report`] and [`validation`]: CSV emission and the acceptance checks.

pub mod error;
pub mod functionals;
pub mod noise;
pub mod optimizer;
pub mod quadrature;
pub mod report;
pub mod trajectory;
pub mod units;
pub mod validation;

pub use error::{Error, Result};
pub use functionals::{OverlapResult, OverlapSource};
pub use trajectory::{Trajectory, TrajectoryFamily};
pub use units::{PhysicalConfig, Unit, HBAR};
