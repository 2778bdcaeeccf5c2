//! White force noise: sampled realizations, exact per-realization branch
//! propagation, the Monte Carlo overlap estimator and a grid-based
//! cross-check of the propagation.

mod gaussian;
mod montecarlo;
mod pde;

pub use gaussian::{branch_overlap, evolve_branch, BranchDriver, BranchOverlap, GaussianBranchState};
pub use montecarlo::{mc_ensemble, mc_overlap, McEnsemble, McSettings};
pub use pde::{pde_crosscheck, GridWavefunction, PdeSettings};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Up,
    Down,
}

impl Branch {
    /// +1 for ↑ (trap at +α), −1 for ↓.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Up => 1.0,
            Branch::Down => -1.0,
        }
    }
}

/// One realization of the dimensionless noise ξ on a uniform step grid.
///
/// Samples are i.i.d. N(0, γ/dt) so that the piecewise-constant path has
/// `E[ξ(t)ξ(s)] → γδ(t − s)` as dt → 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub gamma: f64,
}

/// Number of noise steps covering [0, t_f]; the last one may be shorter.
pub fn step_count(dt: f64, t_f: f64) -> usize {
    let raw = t_f / dt;
    let n = raw.ceil();
    // Guard against t_f/dt landing a hair above an integer.
    if n - raw > 1.0 - 1e-9 {
        (n - 1.0) as usize
    } else {
        n as usize
    }
}

pub(crate) fn check_step(dt: f64, t_f: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise step must be > 0, got {dt}")));
    }
    if dt > t_f / 100.0 * (1.0 + 1e-12) {
        return Err(Error::CoarseNoiseStep { dt, t_f });
    }
    Ok(())
}

pub(crate) fn fill_normal(rng: &mut ChaCha8Rng, gamma: f64, dt: f64, out: &mut [f64]) {
    let sigma = (gamma / dt).sqrt();
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = sigma * z;
    }
}

pub fn sample_noise(gamma: f64, dt: f64, t_f: f64, seed: u64) -> Result<NoisePath> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {gamma}")));
    }
    check_step(dt, t_f)?;
    let mut values = vec![0.0; step_count(dt, t_f)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fill_normal(&mut rng, gamma, dt, &mut values);
    Ok(NoisePath {
        dt,
        values,
        seed,
        gamma,
    })
}

/// Pairwise (cascade) summation; the result depends only on the slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gamma_gives_zero_path() {
        let p = sample_noise(0.0, 0.01, 1.0, 3).unwrap();
        assert_eq!(p.values.len(), 100);
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_same_path() {
        let a = sample_noise(2.0, 1e-3, 1.0, 99).unwrap();
        let b = sample_noise(2.0, 1e-3, 1.0, 99).unwrap();
        let c = sample_noise(2.0, 1e-3, 1.0, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn coarse_step_rejected() {
        assert!(matches!(sample_noise(1.0, 0.02, 1.0, 0), Err(Error::CoarseNoiseStep { .. })));
        assert!(sample_noise(1.0, 0.01, 1.0, 0).is_ok());
        assert!(sample_noise(-1.0, 0.001, 1.0, 0).is_err());
    }

    #[test]
    fn length_is_ceiling() {
        assert_eq!(sample_noise(1.0, 0.003, 1.0, 0).unwrap().values.len(), 334);
        assert_eq!(step_count(0.7 / 2000.0, 0.7), 2000);
    }

    #[test]
    fn moments_of_a_long_path() {
        let (gamma, dt) = (0.5, 1e-6);
        let p = sample_noise(gamma, dt, 1.0, 7).unwrap();
        let n = p.values.len() as f64;
        assert_eq!(p.values.len(), 1_000_000);
        let mean = pairwise_sum(&p.values) / n;
        assert!(mean.abs() < 4.0 * (gamma / (dt * n)).sqrt(), "mean {mean}");
        let sq: Vec<f64> = p.values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1.0);
        assert!((var * dt / gamma - 1.0).abs() < 0.01, "var·dt/γ = {}", var * dt / gamma);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
