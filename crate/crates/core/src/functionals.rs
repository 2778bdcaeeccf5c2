//! Scalar functionals of a trajectory: sensitivity, the noise functional W,
//! the second-order visibility loss and the interference populations.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, GaussLegendre};
use crate::trajectory::{Trajectory, TrajectoryFamily};
use crate::units::{PhysicalConfig, HBAR};

/// Losses above this value are outside the range where the second-order
/// expansion can be trusted.
pub const PERTURBATIVE_LIMIT: f64 = 0.5;

/// Gauss–Legendre nodes for polynomial trajectories; exact up to degree 31.
const POLY_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapSource {
    Perturbative,
    MonteCarlo,
}

/// Complex branch overlap `⟨ψ↓|ψ↑⟩` in polar form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapResult {
    pub modulus: f64,
    /// Phase folded into (−π, π].
    pub phase: f64,
    /// Number of whole turns removed by the folding.
    pub winding: i64,
    pub source: OverlapSource,
    pub stderr_modulus: Option<f64>,
    pub stderr_phase: Option<f64>,
    /// Set when the perturbative loss exceeds [`PERTURBATIVE_LIMIT`] or the
    /// modulus had to be clamped.
    pub regime_violated: bool,
}

impl OverlapResult {
    pub fn unwrapped_phase(&self) -> f64 {
        self.phase + 2.0 * PI * self.winding as f64
    }
}

/// Splits an unwrapped phase into a value in (−π, π] and a winding count.
pub fn fold_phase(phase: f64) -> (f64, i64) {
    let mut winding = (phase / (2.0 * PI)).round() as i64;
    let mut wrapped = phase - 2.0 * PI * winding as f64;
    if wrapped <= -PI {
        wrapped += 2.0 * PI;
        winding -= 1;
    } else if wrapped > PI {
        wrapped -= 2.0 * PI;
        winding += 1;
    }
    (wrapped, winding)
}

/// Integrates `g(α, α̈)`-style integrands over [0, t_f].
///
/// Polynomial trajectories use a fixed Gauss–Legendre rule that is exact for
/// every integrand built here; grid trajectories are integrated interval by
/// interval with adaptive Gauss–Kronrod.
pub fn integrate_trajectory<F>(traj: &Trajectory, mut f: F) -> Result<f64>
where
    F: FnMut(f64, [f64; 3]) -> f64,
{
    let t_f = traj.t_f();
    if traj.family().is_some() {
        let gl = GaussLegendre::new(POLY_NODES);
        return gl.try_integrate(0.0, t_f, |t| Ok(f(t, traj.eval3(t)?)));
    }
    let bps = traj.breakpoints();
    let gl = GaussLegendre::new(9);
    let mut rough = 0.0;
    for w in bps.windows(2) {
        rough += gl.try_integrate(w[0], w[1], |t| Ok(f(t, traj.eval3(t)?)))?.abs();
    }
    let tol = 1e-12 * rough.max(f64::MIN_POSITIVE) / (bps.len() - 1) as f64;
    let mut total = 0.0;
    for w in bps.windows(2) {
        total += integrate_adaptive(|t| Ok(f(t, traj.eval3(t)?)), w[0], w[1], tol)?;
    }
    Ok(total)
}

/// Sensitivity of a trajectory: `S* = ∫α dt` (µm·µs) and `S = 2S*/ħ` (1/zN).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub s_star: f64,
    pub s: f64,
}

pub fn sensitivity(traj: &Trajectory) -> Result<Sensitivity> {
    let s_star = integrate_trajectory(traj, |_, a| a[0])?;
    Ok(Sensitivity {
        s_star,
        s: 2.0 * s_star / HBAR,
    })
}

/// `W = ∫α²α̈² dt` in µm⁴/µs³.
pub fn noise_functional_w(traj: &Trajectory) -> Result<f64> {
    integrate_trajectory(traj, |_, a| a[0] * a[0] * a[2] * a[2])
}

/// Scale-free ratio `W t_f⁷ / S*⁴` of a polynomial family.
pub fn prefactor(family: TrajectoryFamily, amplitude: f64, t_f: f64) -> Result<f64> {
    if !(amplitude > 0.0) {
        return Err(Error::InvalidArgument(format!("prefactor needs M > 0, got {amplitude}")));
    }
    let traj = Trajectory::polynomial(family, amplitude, t_f)?;
    let s = sensitivity(&traj)?.s_star;
    let w = noise_functional_w(&traj)?;
    Ok(w * t_f.powi(7) / s.powi(4))
}

/// Second-order visibility loss split into its three contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityLoss {
    pub total: f64,
    /// From `2α²α̈²`.
    pub alpha_term: f64,
    /// From `(2n+1)ħ/(mω)·α̈²`.
    pub zero_point_term: f64,
    /// From `2x0²α̈²`.
    pub x0_term: f64,
    /// `total > PERTURBATIVE_LIMIT`.
    pub regime_violated: bool,
}

/// Noise-averaged loss of overlap modulus for white force noise of strength
/// λ²γ acting independently on both branches.
///
/// `D = (λ²γ m² / 2ħ²) ∫ [2α² + (2n+1)ħ/(mω) + 2x0²] α̈² dt`, where the
/// factor ½ comes from the equal-time contraction of the white-noise kernel
/// (midpoint/Stratonovich reading of the force noise).
pub fn visibility_loss(traj: &Trajectory, cfg: &PhysicalConfig) -> Result<VisibilityLoss> {
    cfg.validate()?;
    let k = cfg.lambda_sq_gamma * cfg.m * cfg.m / (2.0 * HBAR * HBAR);
    let w = noise_functional_w(traj)?;
    let acc_sq = integrate_trajectory(traj, |_, a| a[2] * a[2])?;
    let zp = f64::from(2 * cfg.n + 1) * HBAR / (cfg.m * cfg.omega);
    let alpha_term = k * 2.0 * w;
    let zero_point_term = k * zp * acc_sq;
    let x0_term = k * 2.0 * cfg.x0 * cfg.x0 * acc_sq;
    let total = alpha_term + zero_point_term + x0_term;
    Ok(VisibilityLoss {
        total,
        alpha_term,
        zero_point_term,
        x0_term,
        regime_violated: total > PERTURBATIVE_LIMIT,
    })
}

/// Overlap predicted by second-order perturbation theory: modulus `1 − D`
/// (clamped to [0, 1]) and noise-free phase `(2c/ħ)∫α dt`.
pub fn perturbative_overlap(traj: &Trajectory, cfg: &PhysicalConfig) -> Result<OverlapResult> {
    let loss = visibility_loss(traj, cfg)?;
    let sens = sensitivity(traj)?;
    let raw = 1.0 - loss.total;
    let modulus = raw.clamp(0.0, 1.0);
    let (phase, winding) = fold_phase(cfg.c * sens.s);
    Ok(OverlapResult {
        modulus,
        phase,
        winding,
        source: OverlapSource::Perturbative,
        stderr_modulus: None,
        stderr_phase: None,
        regime_violated: loss.regime_violated || raw != modulus,
    })
}

/// Spin populations `(P↑, P↓)` after the closing beamsplitter.
pub fn populations(overlap: &OverlapResult) -> (f64, f64) {
    let up = 0.5 + 0.5 * overlap.modulus * overlap.phase.cos();
    (up, 1.0 - up)
}

/// One point of a fringe scan.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeRow {
    pub amplitude: f64,
    pub s_star: f64,
    pub s: f64,
    /// `P↑` for each requested force.
    pub p_up: Vec<f64>,
    pub modulus: f64,
    pub regime_violated: bool,
}

/// Populations as a function of sensitivity, scanning the amplitude `M` of a
/// polynomial family at fixed `t_f = cfg.t_f`. The modulus uses the
/// configured λ²γ; set it to zero for noiseless fringes.
pub fn fringe_scan(
    family: TrajectoryFamily,
    amplitudes: &[f64],
    forces: &[f64],
    cfg: &PhysicalConfig,
) -> Result<Vec<FringeRow>> {
    if forces.is_empty() {
        return Err(Error::InvalidArgument("fringe scan needs at least one force".into()));
    }
    cfg.validate()?;
    amplitudes
        .par_iter()
        .map(|&amp| {
            let traj = Trajectory::polynomial(family, amp, cfg.t_f)?;
            let base = perturbative_overlap(&traj, cfg)?;
            let sens = sensitivity(&traj)?;
            let p_up = forces
                .iter()
                .map(|&c| {
                    let (phase, winding) = fold_phase(c * sens.s);
                    populations(&OverlapResult { phase, winding, ..base }).0
                })
                .collect();
            Ok(FringeRow {
                amplitude: amp,
                s_star: sens.s_star,
                s: sens.s,
                p_up,
                modulus: base.modulus,
                regime_violated: base.regime_violated,
            })
        })
        .collect()
}

/// Local maxima of `y(x)` refined by a three-point parabola. Assumes a
/// locally uniform `x` spacing.
pub fn fringe_peaks(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut peaks = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        if y[i] > y[i - 1] && y[i] >= y[i + 1] {
            let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
            let curv = y0 - 2.0 * y1 + y2;
            let off = if curv != 0.0 { 0.5 * (y0 - y2) / curv } else { 0.0 };
            peaks.push(x[i] + off * 0.5 * (x[i + 1] - x[i - 1]));
        }
    }
    peaks
}

/// Average distance between the first and last of at least two peaks.
pub fn mean_peak_spacing(peaks: &[f64]) -> Option<f64> {
    (peaks.len() >= 2).then(|| (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{make_fourth_order, make_sixth_order};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn sensitivity_closed_forms() {
        let s6 = sensitivity(&make_sixth_order(0.3, 0.7).unwrap()).unwrap();
        assert!(rel(s6.s_star, 16.0 / 35.0 * 0.3 * 0.7) < 1e-13);
        assert!(rel(s6.s, 2.0 * s6.s_star / HBAR) < 1e-15);
        let s4 = sensitivity(&make_fourth_order(0.3, 0.7).unwrap()).unwrap();
        assert!(rel(s4.s_star, 8.0 / 15.0 * 0.3 * 0.7) < 1e-13);
        let zero = sensitivity(&make_sixth_order(0.0, 0.7).unwrap()).unwrap();
        assert_eq!((zero.s_star, zero.s), (0.0, 0.0));
    }

    #[test]
    fn noise_functional_closed_forms() {
        let (m, tf) = (0.4, 1.3);
        let w6 = noise_functional_w(&make_sixth_order(m, tf).unwrap()).unwrap();
        assert!(rel(w6, 16_777_216.0 / 146_965.0 * m.powi(4) / tf.powi(3)) < 1e-12);
        let w4 = noise_functional_w(&make_fourth_order(m, tf).unwrap()).unwrap();
        assert!(rel(w4, 3_014_656.0 / 45_045.0 * m.powi(4) / tf.powi(3)) < 1e-12);
        // 827·(8/15)⁴ is the rounded form of the same coefficient.
        assert!(rel(w4 * tf.powi(3) / m.powi(4), 827.0 * (8.0f64 / 15.0).powi(4)) < 1e-3);
        assert_eq!(noise_functional_w(&make_sixth_order(0.0, tf).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn prefactors() {
        let p6 = prefactor(TrajectoryFamily::SixthOrder, 0.7, 0.9).unwrap();
        assert!(rel(p6, 384_160_000.0 / 146_965.0) < 1e-12);
        assert_eq!(p6.round(), 2614.0);
        let p4 = prefactor(TrajectoryFamily::FourthOrder, 0.7, 0.9).unwrap();
        assert!(rel(p4, 828_000.0 / 1001.0) < 1e-12);
        assert_eq!(p4.round(), 827.0);
        let scaled = prefactor(TrajectoryFamily::SixthOrder, 1.4, 2.7).unwrap();
        assert!(rel(scaled, p6) < 1e-12);
        assert!(prefactor(TrajectoryFamily::SixthOrder, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_noise_means_no_loss() {
        let tr = make_sixth_order(0.3, 0.7).unwrap();
        let cfg = PhysicalConfig::default();
        let loss = visibility_loss(&tr, &cfg).unwrap();
        assert_eq!(loss.total, 0.0);
        let ov = perturbative_overlap(&tr, &cfg).unwrap();
        assert_eq!(ov.modulus, 1.0);
        assert_eq!(ov.source, OverlapSource::Perturbative);
        assert!(ov.stderr_modulus.is_none());
    }

    #[test]
    fn motionless_trap_has_no_loss() {
        let tr = make_sixth_order(0.0, 0.7).unwrap();
        let cfg = PhysicalConfig::default().with_lambda_sq_gamma(1e-3);
        assert_eq!(visibility_loss(&tr, &cfg).unwrap().total, 0.0);
    }

    #[test]
    fn large_displacement_is_dominated_by_alpha_term() {
        let cfg = PhysicalConfig::default().with_lambda_sq_gamma(1e-8);
        let tr = make_sixth_order(0.433, 0.7).unwrap();
        let loss = visibility_loss(&tr, &cfg).unwrap();
        let w = noise_functional_w(&tr).unwrap();
        let k = cfg.lambda_sq_gamma * cfg.m * cfg.m / (HBAR * HBAR);
        assert!(rel(loss.alpha_term, k * w) < 1e-14);
        assert!(loss.alpha_term / loss.total > 0.99);
        let sum = loss.alpha_term + loss.zero_point_term + loss.x0_term;
        assert!(rel(sum, loss.total) < 1e-12);
    }

    #[test]
    fn level_enters_as_two_n_plus_one() {
        let tr = make_sixth_order(0.01, 0.7).unwrap();
        let base = PhysicalConfig::default().with_lambda_sq_gamma(1e-8);
        let l0 = visibility_loss(&tr, &base).unwrap();
        let l3 = visibility_loss(&tr, &PhysicalConfig { n: 3, ..base }).unwrap();
        assert!(rel(l3.zero_point_term, 7.0 * l0.zero_point_term) < 1e-13);
        assert_eq!(l3.alpha_term, l0.alpha_term);
    }

    #[test]
    fn regime_violation_is_flagged_and_clamped() {
        let tr = make_sixth_order(0.433, 0.7).unwrap();
        let cfg = PhysicalConfig::default().with_lambda_sq_gamma(1e-3);
        let loss = visibility_loss(&tr, &cfg).unwrap();
        assert!(loss.regime_violated);
        let ov = perturbative_overlap(&tr, &cfg).unwrap();
        assert_eq!(ov.modulus, 0.0);
        assert!(ov.regime_violated);
    }

    #[test]
    fn phase_is_force_times_sensitivity() {
        let tr = make_sixth_order(0.2, 0.7).unwrap();
        let cfg = PhysicalConfig::default();
        let ov = perturbative_overlap(&tr, &cfg).unwrap();
        let want = 2.0 * 10.0 / HBAR * 16.0 / 35.0 * 0.2 * 0.7;
        assert!(rel(ov.unwrapped_phase(), want) < 1e-13);
        let no_force = perturbative_overlap(&tr, &PhysicalConfig { c: 0.0, ..cfg }).unwrap();
        assert_eq!(no_force.phase, 0.0);
    }

    #[test]
    fn populations_limits() {
        let mk = |modulus: f64, phase: f64| OverlapResult {
            modulus,
            phase,
            winding: 0,
            source: OverlapSource::Perturbative,
            stderr_modulus: None,
            stderr_phase: None,
            regime_violated: false,
        };
        let (u, d) = populations(&mk(1.0, 0.0));
        assert_eq!((u, d), (1.0, 0.0));
        let (u, d) = populations(&mk(1.0, PI));
        assert!(u.abs() < 1e-15 && (d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fold_phase_edges() {
        assert_eq!(fold_phase(PI), (PI, 0));
        let (w, n) = fold_phase(-PI);
        assert!((w - PI).abs() < 1e-15 && n == -1);
        let (w, n) = fold_phase(7.0 * PI / 2.0);
        assert!((w + PI / 2.0).abs() < 1e-12 && n == 2);
    }

    #[test]
    fn fringe_period_from_peaks() {
        // Peak spacing in S* must be πħ/c; locate maxima on a fine scan.
        let cfg = PhysicalConfig::default();
        let amps: Vec<f64> = (0..4001).map(|i| 0.5 * i as f64 / 4000.0).collect();
        let rows = fringe_scan(TrajectoryFamily::SixthOrder, &amps, &[10.0], &cfg).unwrap();
        let x: Vec<f64> = rows.iter().map(|r| r.s_star).collect();
        let p: Vec<f64> = rows.iter().map(|r| r.p_up[0]).collect();
        let peaks = fringe_peaks(&x, &p);
        assert!(peaks.len() >= 3);
        let spacing = mean_peak_spacing(&peaks).unwrap();
        assert!(rel(spacing, PI * HBAR / 10.0) < 1e-4, "{spacing}");
    }

    proptest! {
        #[test]
        fn phase_independent_of_noise(lsg in 0.0f64..1e-6, amp in 0.01f64..0.5) {
            let tr = make_sixth_order(amp, 0.7).unwrap();
            let quiet = perturbative_overlap(&tr, &PhysicalConfig::default()).unwrap();
            let noisy = perturbative_overlap(&tr, &PhysicalConfig::default().with_lambda_sq_gamma(lsg)).unwrap();
            prop_assert_eq!(quiet.phase, noisy.phase);
            prop_assert_eq!(quiet.winding, noisy.winding);
        }

        #[test]
        fn populations_sum_to_one(m in 0.0f64..1.0, ph in -PI..PI) {
            let ov = OverlapResult {
                modulus: m, phase: ph, winding: 0, source: OverlapSource::MonteCarlo,
                stderr_modulus: Some(0.0), stderr_phase: Some(0.0), regime_violated: false,
            };
            let (u, d) = populations(&ov);
            prop_assert_eq!(u + d, 1.0);
        }

        #[test]
        fn loss_decomposition_sums(lsg in 0.0f64..1e-6, amp in 0.0f64..0.5, x0 in -0.05f64..0.05, n in 0u32..5) {
            let tr = make_fourth_order(amp, 0.9).unwrap();
            let cfg = PhysicalConfig { x0, n, ..PhysicalConfig::default().with_lambda_sq_gamma(lsg) };
            let l = visibility_loss(&tr, &cfg).unwrap();
            let sum = l.alpha_term + l.zero_point_term + l.x0_term;
            prop_assert!((sum - l.total).abs() <= 1e-12 * l.total.abs());
        }
    }
}
