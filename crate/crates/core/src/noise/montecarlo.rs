//! Monte Carlo estimate of the noise-averaged branch overlap.
//!
//! Every realization draws independent noise paths for the two branches from
//! its own ChaCha stream (stream index = realization index), so the ensemble
//! is identical for any number of worker threads. Means are formed with a
//! pairwise reduction over the index-ordered samples.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gaussian::{branch_overlap, BranchDriver};
use super::{fill_normal, pairwise_sum, Branch};
use crate::error::{Error, Result};
use crate::functionals::{fold_phase, OverlapResult, OverlapSource};
use crate::trajectory::Trajectory;
use crate::units::PhysicalConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub lambda: f64,
    /// Noise intensity γ (µs).
    pub gamma: f64,
    pub dt: f64,
    pub realizations: usize,
    pub seed: u64,
}

impl McSettings {
    /// Defaults: dt = t_f/2000, 2·10⁴ realizations.
    pub fn new(t_f: f64, lambda: f64, gamma: f64, seed: u64) -> Self {
        Self {
            lambda,
            gamma,
            dt: t_f / 2000.0,
            realizations: 20_000,
            seed,
        }
    }
}

/// Per-realization overlaps plus the noiseless reference phase.
#[derive(Debug, Clone)]
pub struct McEnsemble {
    pub samples: Vec<Complex64>,
    /// Unwrapped phase of the noiseless overlap, used to unwrap the mean.
    pub reference_phase: f64,
}

impl McEnsemble {
    pub fn mean(&self) -> Complex64 {
        let n = self.samples.len() as f64;
        let re: Vec<f64> = self.samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = self.samples.iter().map(|z| z.im).collect();
        Complex64::new(pairwise_sum(&re) / n, pairwise_sum(&im) / n)
    }

    /// Modulus and phase of the mean overlap with delta-method standard errors.
    pub fn summarize(&self) -> OverlapResult {
        let n = self.samples.len() as f64;
        let mean = self.mean();
        let modulus = mean.norm();
        let rot = Complex64::from_polar(1.0, -mean.arg());
        let along: Vec<f64> = self.samples.iter().map(|z| (z * rot).re - modulus).collect();
        let across: Vec<f64> = self.samples.iter().map(|z| (z * rot).im).collect();
        let var = |v: &[f64]| {
            let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
            pairwise_sum(&sq) / (n - 1.0)
        };
        let se_mod = (var(&along) / n).sqrt();
        let se_phase = if modulus > 0.0 { (var(&across) / n).sqrt() / modulus } else { f64::INFINITY };
        let offset = (mean * Complex64::from_polar(1.0, -self.reference_phase)).arg();
        let (phase, winding) = fold_phase(self.reference_phase + offset);
        OverlapResult {
            modulus,
            phase,
            winding,
            source: OverlapSource::MonteCarlo,
            stderr_modulus: Some(se_mod),
            stderr_phase: Some(se_phase),
            regime_violated: false,
        }
    }
}

/// Runs the ensemble and keeps every per-realization overlap.
pub fn mc_ensemble(cfg: &PhysicalConfig, traj: &Trajectory, settings: &McSettings) -> Result<McEnsemble> {
    if settings.realizations < 100 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least 100 realizations, got {}",
            settings.realizations
        )));
    }
    if !(settings.gamma >= 0.0 && settings.gamma.is_finite()) || !settings.lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda and gamma must be finite, gamma >= 0".into()));
    }
    let driver = BranchDriver::new(cfg, traj, settings.dt)?;
    let steps = driver.steps();
    let zeros = vec![0.0; steps];
    let up0 = driver.evolve(&zeros, Branch::Up, 0.0)?.0;
    let down0 = driver.evolve(&zeros, Branch::Down, 0.0)?.0;
    let reference_phase = branch_overlap(&down0, &up0).phase;

    let samples = (0..settings.realizations)
        .into_par_iter()
        .map_init(
            || (vec![0.0; steps], vec![0.0; steps]),
            |(xi_up, xi_down), i| {
                let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
                rng.set_stream(i as u64);
                fill_normal(&mut rng, settings.gamma, settings.dt, xi_up);
                fill_normal(&mut rng, settings.gamma, settings.dt, xi_down);
                let up = driver.evolve(xi_up, Branch::Up, settings.lambda)?.0;
                let down = driver.evolve(xi_down, Branch::Down, settings.lambda)?.0;
                Ok(branch_overlap(&down, &up).to_complex())
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(McEnsemble {
        samples,
        reference_phase,
    })
}

/// Noise-averaged overlap `E[⟨ψ↓|ψ↑⟩]` from independent branch realizations.
pub fn mc_overlap(cfg: &PhysicalConfig, traj: &Trajectory, settings: &McSettings) -> Result<OverlapResult> {
    Ok(mc_ensemble(cfg, traj, settings)?.summarize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::sensitivity;
    use crate::trajectory::make_sixth_order;

    fn small(seed: u64, lambda: f64, gamma: f64) -> McSettings {
        McSettings {
            lambda,
            gamma,
            dt: 0.7 / 400.0,
            realizations: 400,
            seed,
        }
    }

    #[test]
    fn noiseless_ensemble_is_deterministic() {
        let cfg = PhysicalConfig::default();
        let traj = make_sixth_order(0.2, cfg.t_f).unwrap();
        let r = mc_overlap(&cfg, &traj, &small(1, 0.0, 1e-6)).unwrap();
        let want = cfg.c * sensitivity(&traj).unwrap().s;
        assert!((r.modulus - 1.0).abs() < 1e-10);
        assert!((r.unwrapped_phase() - want).abs() < 1e-8);
        assert!(r.stderr_modulus.unwrap() < 1e-12);
        assert!(r.stderr_phase.unwrap() < 1e-12);
        assert_eq!(r.source, OverlapSource::MonteCarlo);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let cfg = PhysicalConfig::default();
        let traj = make_sixth_order(0.2, cfg.t_f).unwrap();
        let s = small(42, 1.0, 3e-8);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| mc_overlap(&cfg, &traj, &s)).unwrap();
        let b = four.install(|| mc_overlap(&cfg, &traj, &s)).unwrap();
        assert_eq!(a, b);
        let c = mc_overlap(&cfg, &traj, &McSettings { seed: 43, ..s }).unwrap();
        assert_ne!(a.modulus, c.modulus);
    }

    #[test]
    fn too_few_realizations_rejected() {
        let cfg = PhysicalConfig::default();
        let traj = make_sixth_order(0.2, cfg.t_f).unwrap();
        let s = McSettings { realizations: 99, ..small(0, 1.0, 1e-8) };
        assert!(mc_overlap(&cfg, &traj, &s).is_err());
    }
}
