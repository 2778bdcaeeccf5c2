//! Exact propagation of a coherent (n = 0) branch state.
//!
//! Each branch sees a harmonic trap plus forces linear in x, so a Gaussian of
//! the trap's ground-state width stays Gaussian with that width. The state is
//! then fully described by its centroid (q, p) following Newton's equations
//! and a phase Γ with `Γ̇ = p²/2m − V(q, t) − ħω/2`.

use num_complex::Complex64;

use super::{check_step, step_count, Branch, NoisePath};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;
use crate::units::{PhysicalConfig, HBAR};

/// Gaussian branch state at the end of an evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBranchState {
    /// Centroid position (µm).
    pub x_c: f64,
    /// Centroid momentum (zN·µs).
    pub p_c: f64,
    /// Accumulated phase Γ/ħ (radians), not folded.
    pub phase_action: f64,
    /// Gaussian exponent `mω/(2ħ)` (1/µm²); constant in time.
    pub width: f64,
}

impl GaussianBranchState {
    pub fn initial(cfg: &PhysicalConfig) -> Self {
        Self {
            x_c: cfg.force_offset(),
            p_c: 0.0,
            phase_action: 0.0,
            width: cfg.m * cfg.omega / (2.0 * HBAR),
        }
    }

    /// Normalized wavefunction value at `x`.
    pub fn psi(&self, x: f64) -> Complex64 {
        let d = x - self.x_c;
        let norm = (2.0 * self.width / std::f64::consts::PI).powf(0.25);
        let re = -self.width * d * d;
        let im = self.p_c * d / HBAR + self.phase_action;
        norm * Complex64::from_polar(re.exp(), im)
    }
}

/// `⟨ψ↓|ψ↑⟩` in polar form with the phase kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchOverlap {
    pub modulus: f64,
    pub phase: f64,
}

impl BranchOverlap {
    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.modulus, self.phase)
    }
}

/// Overlap of two equal-width Gaussians, `⟨down|up⟩`.
pub fn branch_overlap(down: &GaussianBranchState, up: &GaussianBranchState) -> BranchOverlap {
    let a = up.width;
    let dq = up.x_c - down.x_c;
    let dp = up.p_c - down.p_c;
    let log_mod = -0.5 * a * dq * dq - dp * dp / (8.0 * a * HBAR * HBAR);
    let phase = up.phase_action - down.phase_action - (up.p_c + down.p_c) * dq / (2.0 * HBAR);
    BranchOverlap {
        modulus: log_mod.exp(),
        phase,
    }
}

/// Precomputed trajectory samples on the RK4 stage times of a uniform step
/// grid, shared by every realization of an ensemble.
#[derive(Debug, Clone)]
pub struct BranchDriver {
    cfg: PhysicalConfig,
    steps: Vec<Step>,
}

#[derive(Debug, Clone, Copy)]
struct Step {
    h: f64,
    /// α and compensating force f at t, t + h/2 and t + h.
    alpha: [f64; 3],
    force: [f64; 3],
}

impl BranchDriver {
    pub fn new(cfg: &PhysicalConfig, traj: &Trajectory, dt: f64) -> Result<Self> {
        cfg.validate()?;
        if cfg.n != 0 {
            return Err(Error::Unsupported(format!(
                "Gaussian propagation covers the ground state only (n = {})",
                cfg.n
            )));
        }
        let t_f = traj.t_f();
        if ((t_f - cfg.t_f) / cfg.t_f).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "trajectory t_f {t_f} differs from configured t_f {}",
                cfg.t_f
            )));
        }
        check_step(dt, t_f)?;
        let n = step_count(dt, t_f);
        let mut steps = Vec::with_capacity(n);
        for k in 0..n {
            let t0 = k as f64 * dt;
            let t1 = if k + 1 == n { t_f } else { (k + 1) as f64 * dt };
            let h = t1 - t0;
            let mut alpha = [0.0; 3];
            let mut force = [0.0; 3];
            for (j, t) in [t0, t0 + 0.5 * h, t1].into_iter().enumerate() {
                let [a, _, acc] = traj.eval3(t)?;
                alpha[j] = a;
                force[j] = cfg.m * acc;
            }
            steps.push(Step { h, alpha, force });
        }
        Ok(Self { cfg: *cfg, steps })
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    /// Propagates one branch through the noise samples `xi` (one per step,
    /// held constant within the step). Returns the final state and the
    /// extreme centroid positions visited.
    pub fn evolve(&self, xi: &[f64], branch: Branch, lambda: f64) -> Result<(GaussianBranchState, [f64; 2])> {
        if xi.len() != self.steps.len() {
            return Err(Error::InvalidArgument(format!(
                "noise path has {} samples, expected {}",
                xi.len(),
                self.steps.len()
            )));
        }
        let cfg = &self.cfg;
        let s = branch.sign();
        let m = cfg.m;
        let k_spring = m * cfg.omega * cfg.omega;
        let zero_point = 0.5 * HBAR * cfg.omega;
        let init = GaussianBranchState::initial(cfg);
        let (mut q, mut p, mut g) = (init.x_c, 0.0, 0.0);
        let mut range = [q, q];

        // Right-hand side of (q, p, Γ) given trap centre sα and total force F.
        let rhs = |q: f64, p: f64, alpha: f64, big_f: f64| -> [f64; 3] {
            let centre = s * alpha;
            let dq = q - centre;
            let v = 0.5 * k_spring * dq * dq - cfg.c * q - s * (q - cfg.x0) * big_f;
            [p / m, -k_spring * dq + cfg.c + s * big_f, p * p / (2.0 * m) - v - zero_point]
        };

        for (st, &noise) in self.steps.iter().zip(xi) {
            let mult = 1.0 + lambda * noise;
            let f0 = st.force[0] * mult;
            let fm = st.force[1] * mult;
            let f1 = st.force[2] * mult;
            let h = st.h;
            let k1 = rhs(q, p, st.alpha[0], f0);
            let k2 = rhs(q + 0.5 * h * k1[0], p + 0.5 * h * k1[1], st.alpha[1], fm);
            let k3 = rhs(q + 0.5 * h * k2[0], p + 0.5 * h * k2[1], st.alpha[1], fm);
            let k4 = rhs(q + h * k3[0], p + h * k3[1], st.alpha[2], f1);
            q += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            p += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            g += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]);
            range[0] = range[0].min(q);
            range[1] = range[1].max(q);
        }
        if !(q.is_finite() && p.is_finite() && g.is_finite()) {
            return Err(Error::Integrator(format!(
                "non-finite branch state (q = {q}, p = {p}, Γ = {g})"
            )));
        }
        Ok((
            GaussianBranchState {
                x_c: q,
                p_c: p,
                phase_action: g / HBAR,
                width: init.width,
            },
            range,
        ))
    }
}

/// Final Gaussian state of one branch driven by the force `f(1 + λξ)`.
pub fn evolve_branch(
    cfg: &PhysicalConfig,
    traj: &Trajectory,
    path: &NoisePath,
    branch: Branch,
    lambda: f64,
) -> Result<GaussianBranchState> {
    let driver = BranchDriver::new(cfg, traj, path.dt)?;
    Ok(driver.evolve(&path.values, branch, lambda)?.0)
}
