//! Split-step Fourier propagation of one branch on a position grid, used to
//! validate the Gaussian propagation independently.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::gaussian::{BranchDriver, GaussianBranchState};
use super::{Branch, NoisePath};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;
use crate::units::{PhysicalConfig, HBAR};

/// Escape threshold for the probability in the outer 5% on either side.
const ESCAPE_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeSettings {
    /// Split-step substeps per noise step (at least 4).
    pub substeps: usize,
    /// Grid padding beyond the centroid excursion, in oscillator lengths.
    pub pad_lengths: f64,
    /// Force a grid size instead of choosing one from the momentum range.
    pub points: Option<usize>,
}

impl Default for PdeSettings {
    fn default() -> Self {
        Self {
            substeps: 4,
            pad_lengths: 8.0,
            points: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridWavefunction {
    pub x: Vec<f64>,
    pub dx: f64,
    pub psi: Vec<Complex64>,
}

impl GridWavefunction {
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx
    }

    /// `⟨gaussian|grid⟩`.
    pub fn overlap_with(&self, state: &GaussianBranchState) -> Complex64 {
        self.x
            .iter()
            .zip(&self.psi)
            .map(|(&x, &p)| state.psi(x).conj() * p)
            .sum::<Complex64>()
            * self.dx
    }

    pub fn fidelity(&self, state: &GaussianBranchState) -> f64 {
        self.overlap_with(state).norm_sqr()
    }

    /// Probability in the outermost 5% of the grid on each side.
    pub fn edge_probability(&self) -> f64 {
        edge_probability(&self.psi, self.dx)
    }
}

/// Propagates the branch wavefunction on a grid through the same noise path
/// as [`evolve_branch`](super::evolve_branch), with Strang splitting and the
/// noise sample held constant over each noise step.
pub fn pde_crosscheck(
    cfg: &PhysicalConfig,
    traj: &Trajectory,
    path: &NoisePath,
    branch: Branch,
    lambda: f64,
    settings: &PdeSettings,
) -> Result<GridWavefunction> {
    if settings.substeps < 4 {
        return Err(Error::InvalidArgument("split-step needs at least 4 substeps per noise step".into()));
    }
    let driver = BranchDriver::new(cfg, traj, path.dt)?;
    let (_, range) = driver.evolve(&path.values, branch, lambda)?;

    let ell = cfg.oscillator_length();
    let lo = range[0] - settings.pad_lengths * ell;
    let hi = range[1] + settings.pad_lengths * ell;
    // Keep the padded region inside the inner 80% so the escape check is meaningful.
    let length = (hi - lo) / 0.8;
    let x_min = 0.5 * (lo + hi) - 0.5 * length;

    let points = match settings.points {
        Some(p) => p,
        None => {
            let p_max = max_momentum(cfg, traj, lambda, path)?;
            let k_needed = p_max / HBAR + 12.0 / ell;
            let dx_max = PI / k_needed;
            ((length / dx_max).ceil() as usize).next_power_of_two().max(256)
        }
    };
    let dx = length / points as f64;
    let x: Vec<f64> = (0..points).map(|i| x_min + i as f64 * dx).collect();

    let init = GaussianBranchState::initial(cfg);
    let mut psi: Vec<Complex64> = x.iter().map(|&xi| init.psi(xi)).collect();
    let norm = (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).sqrt();
    psi.iter_mut().for_each(|z| *z /= norm);

    let kvec: Vec<f64> = (0..points)
        .map(|j| {
            let jj = if j < points / 2 { j as f64 } else { j as f64 - points as f64 };
            2.0 * PI * jj / length
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(points);
    let inv = planner.plan_fft_inverse(points);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];

    let s = branch.sign();
    let k_spring = cfg.m * cfg.omega * cfg.omega;
    let t_f = traj.t_f();
    let steps = path.values.len();
    let inv_n = 1.0 / points as f64;
    let mut kinetic_cache: Option<(f64, Vec<Complex64>)> = None;

    for (k, &xi) in path.values.iter().enumerate() {
        let t0 = k as f64 * path.dt;
        let t1 = if k + 1 == steps { t_f } else { (k + 1) as f64 * path.dt };
        let tau = (t1 - t0) / settings.substeps as f64;
        let kinetic = match &kinetic_cache {
            Some((cached_tau, prop)) if *cached_tau == tau => prop.clone(),
            _ => {
                let prop: Vec<Complex64> = kvec
                    .iter()
                    .map(|&kk| Complex64::from_polar(inv_n, -HBAR * kk * kk * tau / (2.0 * cfg.m)))
                    .collect();
                kinetic_cache = Some((tau, prop.clone()));
                prop
            }
        };
        for j in 0..settings.substeps {
            let tm = (t0 + (j as f64 + 0.5) * tau).min(t_f);
            let [alpha, _, acc] = traj.eval3(tm)?;
            let big_f = cfg.m * acc * (1.0 + lambda * xi);
            let centre = s * alpha;
            let half = |psi: &mut [Complex64]| {
                for (z, &xx) in psi.iter_mut().zip(&x) {
                    let d = xx - centre;
                    let v = 0.5 * k_spring * d * d - cfg.c * xx - s * (xx - cfg.x0) * big_f;
                    *z *= Complex64::from_polar(1.0, -v * tau / (2.0 * HBAR));
                }
            };
            half(&mut psi);
            fwd.process_with_scratch(&mut psi, &mut scratch);
            psi.iter_mut().zip(&kinetic).for_each(|(z, p)| *z *= p);
            inv.process_with_scratch(&mut psi, &mut scratch);
            half(&mut psi);
        }
        if k % 64 == 63 || k + 1 == steps {
            let edge = edge_probability(&psi, dx);
            if edge > ESCAPE_LIMIT {
                return Err(Error::GridEscape { outer_probability: edge });
            }
        }
    }
    Ok(GridWavefunction { x, dx, psi })
}

fn edge_probability(psi: &[Complex64], dx: f64) -> f64 {
    let n = psi.len();
    let band = (n as f64 * 0.05).ceil() as usize;
    psi[..band]
        .iter()
        .chain(&psi[n - band..])
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        * dx
}

/// Rough upper bound on the centroid momentum along the noisy evolution.
fn max_momentum(cfg: &PhysicalConfig, traj: &Trajectory, lambda: f64, path: &NoisePath) -> Result<f64> {
    // The centroid tracks the trap closely, so m·max|α̇| plus the noise kick
    // bounds the momentum; the kick is estimated from the accumulated force.
    let mut p_max: f64 = 0.0;
    let mut kick: f64 = 0.0;
    for (k, &xi) in path.values.iter().enumerate() {
        let t = (k as f64 * path.dt).min(traj.t_f());
        let [_, v, acc] = traj.eval3(t)?;
        kick += (cfg.m * acc * lambda * xi).abs() * path.dt;
        p_max = p_max.max(cfg.m * v.abs());
    }
    Ok(p_max + kick)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{evolve_branch, sample_noise};
    use crate::trajectory::make_sixth_order;

    #[test]
    fn stationary_ground_state_only_acquires_zero_point_phase() {
        let cfg = PhysicalConfig { c: 0.0, t_f: 0.1, ..Default::default() };
        let traj = make_sixth_order(0.0, cfg.t_f).unwrap();
        let path = sample_noise(0.0, cfg.t_f / 1000.0, cfg.t_f, 0).unwrap();
        let wf = pde_crosscheck(&cfg, &traj, &path, Branch::Up, 0.0, &PdeSettings::default()).unwrap();
        let init = GaussianBranchState::initial(&cfg);
        let ov = wf.overlap_with(&init);
        let want = Complex64::from_polar(1.0, -0.5 * cfg.omega * cfg.t_f);
        assert!((ov - want).norm() < 1e-6, "{ov} vs {want}");
        assert!((wf.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn noiseless_transport_matches_gaussian() {
        let cfg = PhysicalConfig { t_f: 0.35, ..Default::default() };
        let traj = make_sixth_order(0.1, cfg.t_f).unwrap();
        let path = sample_noise(0.0, cfg.t_f / 1000.0, cfg.t_f, 0).unwrap();
        for br in [Branch::Up, Branch::Down] {
            let wf = pde_crosscheck(&cfg, &traj, &path, br, 0.0, &PdeSettings::default()).unwrap();
            let g = evolve_branch(&cfg, &traj, &path, br, 0.0).unwrap();
            assert!(wf.fidelity(&g) > 1.0 - 1e-6, "{br:?}: {}", 1.0 - wf.fidelity(&g));
            assert!((wf.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tiny_grid_reports_escape() {
        let cfg = PhysicalConfig { t_f: 0.35, ..Default::default() };
        let traj = make_sixth_order(0.1, cfg.t_f).unwrap();
        let path = sample_noise(0.0, cfg.t_f / 400.0, cfg.t_f, 0).unwrap();
        let settings = PdeSettings { pad_lengths: 0.5, ..Default::default() };
        let r = pde_crosscheck(&cfg, &traj, &path, Branch::Up, 0.0, &settings);
        assert!(matches!(r, Err(Error::GridEscape { .. })), "{r:?}");
    }
}
