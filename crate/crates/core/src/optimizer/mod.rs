//! Optimal trajectories at fixed sensitivity.
//!
//! Minimizing `W = ∫α²α̈² dt` at fixed `S* = ∫α dt` with endpoints shifted to
//! `α = ε` gives, in the scaled variables `θ = α/ε`, `τ = t/t_f`,
//!
//! ```text
//! 6θθ̈² + 4θ̇²θ̈ + 8θθ̇θ⃛ + 2θ²θ'''' = δ,   θ = 1, θ̇ = 0 at τ = 0, 1,
//! ```
//!
//! with `δ = Λt_f⁴/ε³`. Each solution yields `S̃ = ∫θ dτ` and
//! `W̃ = ∫θ²θ̈² dτ`, and the physical bound follows from
//! `W = (W̃/S̃⁴)·S*⁴/t_f⁷`, independent of ε.

mod banded;
mod bvp;

pub use banded::BandMatrix;
pub use bvp::{MAX_NEWTON, RESIDUAL_TOL};

use bvp::{Collocation, State};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::trajectory::Trajectory;

/// Mesh intervals used when the caller has no preference.
pub const DEFAULT_GRID_N: usize = 8192;
/// Smallest S̃ included in the quartic fit by default.
pub const DEFAULT_FIT_SMIN: f64 = 2.0;
/// Largest δ ratio between consecutive continuation steps.
const MAX_STEP_FACTOR: f64 = 2.0;
/// First continuation target when starting from the constant solution.
const FIRST_DELTA: f64 = 1.0;

/// Converged (or flagged) solution of the scaled problem on a uniform mesh.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub delta: f64,
    pub tau: Vec<f64>,
    pub theta: Vec<f64>,
    pub dtheta: Vec<f64>,
    pub ddtheta: Vec<f64>,
    pub dddtheta: Vec<f64>,
    pub s_tilde: f64,
    pub w_tilde: f64,
    pub converged: bool,
    /// Scaled ∞-norm of the collocation residual.
    pub residual_norm: f64,
    /// Newton iterations spent on the final δ value.
    pub newton_iterations: usize,
}

impl BvpSolution {
    fn from_state(delta: f64, y: &[State], converged: bool, residual_norm: f64, iterations: usize) -> Result<Self> {
        let n = y.len() - 1;
        let tau = (0..=n).map(|i| i as f64 / n as f64).collect();
        let col = |k: usize| y.iter().map(|s| s[k]).collect::<Vec<f64>>();
        let (theta, dtheta, ddtheta, dddtheta) = (col(0), col(1), col(2), col(3));
        let (s_tilde, w_tilde) = scaled_functionals(&theta, &dtheta, &ddtheta)?;
        Ok(Self {
            delta,
            tau,
            theta,
            dtheta,
            ddtheta,
            dddtheta,
            s_tilde,
            w_tilde,
            converged,
            residual_norm,
            newton_iterations: iterations,
        })
    }

    pub fn intervals(&self) -> usize {
        self.theta.len() - 1
    }

    /// Rows `(θ, θ', θ'', θ''')` per node.
    pub fn state(&self) -> Vec<[f64; 4]> {
        (0..self.theta.len())
            .map(|i| [self.theta[i], self.dtheta[i], self.ddtheta[i], self.dddtheta[i]])
            .collect()
    }

    /// `W̃/S̃⁴`.
    pub fn ratio(&self) -> f64 {
        self.w_tilde / self.s_tilde.powi(4)
    }

    /// `max|θ(τ) − θ(1 − τ)|` over the nodes.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.theta.len();
        (0..n)
            .map(|i| (self.theta[i] - self.theta[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    /// ∞-norm difference in θ against a solution on a mesh refined by an
    /// integer factor (nodes nest).
    pub fn mesh_difference(&self, finer: &BvpSolution) -> Result<f64> {
        let (a, b) = (self.intervals(), finer.intervals());
        if b % a != 0 {
            return Err(Error::InvalidArgument(format!(
                "mesh with {b} intervals does not refine {a} intervals"
            )));
        }
        let stride = b / a;
        Ok(self
            .theta
            .iter()
            .enumerate()
            .map(|(i, t)| (t - finer.theta[i * stride]).abs())
            .fold(0.0, f64::max))
    }

    /// Physical trajectory `α(t) = ε θ(t/t_f)` with ε chosen so that
    /// `∫α dt = s_star`.
    pub fn trajectory(&self, s_star: f64, t_f: f64) -> Result<Trajectory> {
        optimal_trajectory(self, s_star, t_f)
    }
}

/// `∫θ dτ` and `∫θ²θ̈² dτ` from the quintic Hermite interpolant of the
/// nodal `(θ, θ', θ'')`, with 9-point Gauss–Legendre per interval.
fn scaled_functionals(theta: &[f64], dtheta: &[f64], ddtheta: &[f64]) -> Result<(f64, f64)> {
    let unit = Trajectory::grid_interpolant(theta, dtheta, ddtheta, 1.0, 1.0)?;
    let gl = GaussLegendre::new(9);
    let knots = unit.breakpoints();
    let (mut s, mut w) = (0.0, 0.0);
    for pair in knots.windows(2) {
        for (x, wt) in gl.mapped(pair[0], pair[1]) {
            let [a, _, acc] = unit.eval3(x)?;
            s += wt * a;
            w += wt * a * a * acc * acc;
        }
    }
    Ok((s, w))
}

/// Pointwise `6θθ̈² + 4θ̇²θ̈ + 8θθ̇θ⃛ + 2θ²θ'''' − δ` at the interior nodes
/// `2..=N−2` of a uniform grid of `(θ, θ', θ'', θ''')` rows; θ'''' is the
/// five-point central derivative of θ'''.
pub fn euler_poisson_residual(state: &[[f64; 4]], delta: f64) -> Result<Vec<f64>> {
    let len = state.len();
    if len < 5 {
        return Err(Error::InvalidArgument(format!("residual needs >= 5 grid points, got {len}")));
    }
    let h = 1.0 / (len - 1) as f64;
    Ok((2..len - 2)
        .map(|i| {
            let [t, t1, t2, t3] = state[i];
            let t4 = (state[i - 2][3] - 8.0 * state[i - 1][3] + 8.0 * state[i + 1][3] - state[i + 2][3]) / (12.0 * h);
            6.0 * t * t2 * t2 + 4.0 * t1 * t1 * t2 + 8.0 * t * t1 * t3 + 2.0 * t * t * t4 - delta
        })
        .collect())
}

fn constant_state(intervals: usize) -> Vec<State> {
    vec![[1.0, 0.0, 0.0, 0.0]; intervals + 1]
}

/// Small-δ solution `θ ≈ 1 + (δ/48)τ²(1−τ)²` of the linearized problem.
fn linear_guess(intervals: usize, delta: f64) -> Vec<State> {
    let c = delta / 48.0;
    (0..=intervals)
        .map(|i| {
            let t = i as f64 / intervals as f64;
            // τ²(1−τ)² = τ² − 2τ³ + τ⁴ and its derivatives.
            [
                1.0 + c * (t * t - 2.0 * t.powi(3) + t.powi(4)),
                c * (2.0 * t - 6.0 * t * t + 4.0 * t.powi(3)),
                c * (2.0 - 12.0 * t + 12.0 * t * t),
                c * (-12.0 + 24.0 * t),
            ]
        })
        .collect()
}

/// Continuation state: last converged δ and its solution.
struct Tracker {
    col: Collocation,
    delta: f64,
    y: Vec<State>,
    prev: Option<(f64, Vec<State>)>,
}

struct Attempt {
    y: Vec<State>,
    residual: f64,
    converged: bool,
    iterations: usize,
}

impl Tracker {
    fn new(intervals: usize) -> Self {
        Self {
            col: Collocation::new(intervals),
            delta: 0.0,
            y: constant_state(intervals),
            prev: None,
        }
    }

    fn predict(&self, next: f64) -> Vec<State> {
        if self.delta == 0.0 {
            return linear_guess(self.col.intervals, next);
        }
        match &self.prev {
            // Secant extrapolation in log δ.
            Some((d_prev, y_prev)) if *d_prev > 0.0 => {
                let s = (next / self.delta).ln() / (self.delta / d_prev).ln();
                self.y
                    .iter()
                    .zip(y_prev)
                    .map(|(a, b)| std::array::from_fn(|k| a[k] + s * (a[k] - b[k])))
                    .collect()
            }
            _ => self.y.clone(),
        }
    }

    /// Advances to `target` in geometric steps of at most [`MAX_STEP_FACTOR`],
    /// shrinking the step on Newton failure.
    fn advance(&mut self, target: f64) -> Result<Attempt> {
        if target == self.delta {
            let (_, res) = self.col.residual(&self.y, target)?;
            return Ok(Attempt { y: self.y.clone(), residual: res, converged: res < RESIDUAL_TOL, iterations: 0 });
        }
        let mut factor = MAX_STEP_FACTOR;
        loop {
            let next = if self.delta == 0.0 {
                target.min(FIRST_DELTA * (factor / MAX_STEP_FACTOR))
            } else {
                (self.delta * factor).min(target)
            };
            let outcome = match self.col.newton(next, self.predict(next)) {
                Ok(o) => Some(o),
                Err(Error::SingularTheta { .. }) | Err(Error::SingularMatrix(_)) if factor > 1.01 => None,
                Err(e) => return Err(e),
            };
            match outcome {
                Some(o) if o.converged => {
                    let old = std::mem::replace(&mut self.y, o.y);
                    self.prev = Some((self.delta, old));
                    self.delta = next;
                    if next == target {
                        return Ok(Attempt {
                            y: self.y.clone(),
                            residual: o.residual,
                            converged: true,
                            iterations: o.iterations,
                        });
                    }
                    factor = (factor * factor).min(MAX_STEP_FACTOR);
                }
                other => {
                    if factor <= 1.01 {
                        let o = other.expect("errors at the minimum step propagate");
                        return Ok(Attempt { y: o.y, residual: o.residual, converged: false, iterations: o.iterations });
                    }
                    factor = factor.sqrt();
                }
            }
        }
    }
}

fn check_grid(grid_n: usize) -> Result<()> {
    if grid_n < 64 {
        return Err(Error::InvalidArgument(format!("grid_n must be >= 64, got {grid_n}")));
    }
    Ok(())
}

/// Solves the scaled problem at `delta` on `grid_n` uniform intervals,
/// continuing from the constant solution at δ = 0.
pub fn solve_bvp(delta: f64, grid_n: usize) -> Result<BvpSolution> {
    check_grid(grid_n)?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be finite and >= 0, got {delta}")));
    }
    let mut tracker = Tracker::new(grid_n);
    let a = tracker.advance(delta)?;
    BvpSolution::from_state(delta, &a.y, a.converged, a.residual, a.iterations)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Log,
    Linear,
}

impl std::str::FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Spacing::Log),
            "linear" => Ok(Spacing::Linear),
            other => Err(Error::InvalidArgument(format!("unknown spacing `{other}` (log|linear)"))),
        }
    }
}

/// One δ of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub s_tilde: f64,
    pub w_tilde: f64,
    pub converged: bool,
    pub residual_norm: f64,
}

impl SweepRow {
    pub fn ratio(&self) -> f64 {
        self.w_tilde / self.s_tilde.powi(4)
    }
}

impl From<&BvpSolution> for SweepRow {
    fn from(s: &BvpSolution) -> Self {
        Self {
            delta: s.delta,
            s_tilde: s.s_tilde,
            w_tilde: s.w_tilde,
            converged: s.converged,
            residual_norm: s.residual_norm,
        }
    }
}

pub fn sweep_points(delta_min: f64, delta_max: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if !(delta_min > 0.0 && delta_max > delta_min && delta_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sweep needs 0 < delta_min < delta_max, got ({delta_min}, {delta_max})"
        )));
    }
    if points < 2 {
        return Err(Error::InvalidArgument("sweep needs at least 2 points".into()));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let f = i as f64 / last;
            if i == 0 {
                return delta_min;
            }
            if i + 1 == points {
                return delta_max;
            }
            match spacing {
                Spacing::Log => (delta_min.ln() + f * (delta_max / delta_min).ln()).exp(),
                Spacing::Linear => delta_min + f * (delta_max - delta_min),
            }
        })
        .collect())
}

/// Solves at each sweep point by continuation from the previous converged
/// one. A failed first point aborts; later failures are flagged and the
/// continuation resumes from the last converged solution.
pub fn sweep_delta_solutions(
    delta_min: f64,
    delta_max: f64,
    points: usize,
    spacing: Spacing,
    grid_n: usize,
) -> Result<Vec<BvpSolution>> {
    check_grid(grid_n)?;
    let targets = sweep_points(delta_min, delta_max, points, spacing)?;
    let mut tracker = Tracker::new(grid_n);
    let mut out = Vec::with_capacity(points);
    for (i, &d) in targets.iter().enumerate() {
        let attempt = match tracker.advance(d) {
            Ok(a) => a,
            Err(e) if i == 0 => {
                return Err(Error::Continuation { delta: d, reason: e.to_string() });
            }
            Err(_) => {
                let (_, res) = tracker.col.residual(&tracker.y, d).unwrap_or((Vec::new(), f64::INFINITY));
                Attempt { y: tracker.y.clone(), residual: res, converged: false, iterations: 0 }
            }
        };
        if i == 0 && !attempt.converged {
            return Err(Error::Continuation {
                delta: d,
                reason: format!("Newton stalled at scaled residual {:e}", attempt.residual),
            });
        }
        out.push(BvpSolution::from_state(d, &attempt.y, attempt.converged, attempt.residual, attempt.iterations)?);
    }
    Ok(out)
}

/// Summary rows of [`sweep_delta_solutions`].
pub fn sweep_delta(delta_min: f64, delta_max: f64, points: usize, spacing: Spacing, grid_n: usize) -> Result<Vec<SweepRow>> {
    Ok(sweep_delta_solutions(delta_min, delta_max, points, spacing, grid_n)?
        .iter()
        .map(SweepRow::from)
        .collect())
}

/// Indices `i` where `S̃` fails to increase from row `i − 1` to row `i`.
pub fn monotonicity_violations(rows: &[SweepRow]) -> Vec<usize> {
    rows.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].converged && w[1].converged && w[1].s_tilde <= w[0].s_tilde)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Least-squares slope of W̃ against S̃⁴ through the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticFit {
    pub k: f64,
    pub rows_used: usize,
    /// `(δ, W̃/S̃⁴)` for every row in the fit.
    pub ratios: Vec<(f64, f64)>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Slope refitted on the upper half (by δ) of the rows.
    pub k_upper_half: f64,
}

pub const MIN_FIT_ROWS: usize = 10;

fn slope(rows: &[&SweepRow]) -> f64 {
    let num: f64 = rows.iter().map(|r| r.w_tilde * r.s_tilde.powi(4)).sum();
    let den: f64 = rows.iter().map(|r| r.s_tilde.powi(8)).sum();
    num / den
}

/// Fits `W̃ = k S̃⁴` over converged rows with `S̃ ≥ s_min`.
pub fn fit_quartic(rows: &[SweepRow], s_min: f64) -> Result<QuarticFit> {
    let mut used: Vec<&SweepRow> = rows.iter().filter(|r| r.converged && r.s_tilde >= s_min).collect();
    if used.len() < MIN_FIT_ROWS {
        return Err(Error::InvalidArgument(format!(
            "quartic fit needs >= {MIN_FIT_ROWS} converged rows with S_tilde >= {s_min}, got {}",
            used.len()
        )));
    }
    used.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let (lo, hi) = (used[0].delta, used[used.len() - 1].delta);
    if !(lo > 0.0 && hi / lo >= 100.0) {
        return Err(Error::InvalidArgument(format!(
            "quartic fit rows span δ ∈ [{lo:e}, {hi:e}], need two decades"
        )));
    }
    let ratios: Vec<(f64, f64)> = used.iter().map(|r| (r.delta, r.ratio())).collect();
    let ratio_min = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let ratio_max = ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(QuarticFit {
        k: slope(&used),
        rows_used: used.len(),
        k_upper_half: slope(&used[used.len() / 2..]),
        ratios,
        ratio_min,
        ratio_max,
    })
}

/// Lower bound `W_min = k S*⁴/t_f⁷` on the noise functional at fixed sensitivity.
pub fn optimal_bound(s_star: f64, t_f: f64, k: f64) -> Result<f64> {
    if !(s_star >= 0.0 && s_star.is_finite()) {
        return Err(Error::InvalidArgument(format!("S* must be >= 0, got {s_star}")));
    }
    if !(t_f > 0.0 && t_f.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_f must be > 0, got {t_f}")));
    }
    Ok(k * s_star.powi(4) / t_f.powi(7))
}

/// Grid-interpolated trajectory `α(t) = ε θ(t/t_f)`, `ε = s_star/(t_f S̃)`.
pub fn optimal_trajectory(sol: &BvpSolution, s_star: f64, t_f: f64) -> Result<Trajectory> {
    if !(s_star > 0.0 && s_star.is_finite()) {
        return Err(Error::InvalidArgument(format!("S* must be > 0, got {s_star}")));
    }
    let eps = s_star / (t_f * sol.s_tilde);
    Trajectory::grid_interpolant(&sol.theta, &sol.dtheta, &sol.ddtheta, eps, t_f)
}
