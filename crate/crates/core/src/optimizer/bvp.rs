//! Collocation discretization of the scaled Euler–Poisson problem and its
//! damped Newton solver.
//!
//! Unknowns are `y = (θ, θ', θ'', θ''')` at the `N + 1` nodes of a uniform
//! mesh on [0, 1]. Each interval contributes the four-stage Lobatto IIIA
//! (Simpson) collocation equations, which are fourth-order accurate and use
//! a cubic interpolant midpoint.

use super::banded::BandMatrix;
use crate::error::{Error, Result};

pub(crate) type State = [f64; 4];

/// Scaled residual target for a converged solve.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Newton iteration cap per δ value.
pub const MAX_NEWTON: usize = 50;
/// Stop polishing below this scaled residual.
const POLISH_TOL: f64 = 1e-13;
const THETA_FLOOR: f64 = 1e-8;

fn singular(node: usize, theta: f64) -> Error {
    Error::SingularTheta { node, theta }
}

/// `y' = F(y)` for the first-order form of
/// `6θθ''² + 4θ'²θ'' + 8θθ'θ''' + 2θ²θ'''' = δ`.
pub(crate) fn rhs(y: &State, delta: f64, node: usize) -> Result<State> {
    let [t, t1, t2, t3] = *y;
    if !(t.abs() >= THETA_FLOOR) {
        return Err(singular(node, t));
    }
    let num = delta - 6.0 * t * t2 * t2 - 4.0 * t1 * t1 * t2 - 8.0 * t * t1 * t3;
    Ok([t1, t2, t3, num / (2.0 * t * t)])
}

pub(crate) fn jacobian(y: &State, delta: f64, node: usize) -> Result<[[f64; 4]; 4]> {
    let [t, t1, t2, t3] = *y;
    if !(t.abs() >= THETA_FLOOR) {
        return Err(singular(node, t));
    }
    let num = delta - 6.0 * t * t2 * t2 - 4.0 * t1 * t1 * t2 - 8.0 * t * t1 * t3;
    let inv = 1.0 / (2.0 * t * t);
    Ok([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [
            (-6.0 * t2 * t2 - 8.0 * t1 * t3) * inv - num / (t * t * t),
            (-8.0 * t1 * t2 - 8.0 * t * t3) * inv,
            (-12.0 * t * t2 - 4.0 * t1 * t1) * inv,
            -4.0 * t1 / t,
        ],
    ])
}

fn matmul(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Uniform-mesh collocation system for a fixed number of intervals.
#[derive(Debug, Clone)]
pub(crate) struct Collocation {
    pub intervals: usize,
    pub h: f64,
}

pub(crate) struct NewtonOutcome {
    pub y: Vec<State>,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl Collocation {
    pub fn new(intervals: usize) -> Self {
        Self {
            intervals,
            h: 1.0 / intervals as f64,
        }
    }

    fn unknowns(&self) -> usize {
        4 * (self.intervals + 1)
    }

    /// Residual vector (boundary rows first and last) and its scaled ∞-norm.
    pub fn residual(&self, y: &[State], delta: f64) -> Result<(Vec<f64>, f64)> {
        let n = self.intervals;
        let h = self.h;
        let f: Vec<State> = y
            .iter()
            .enumerate()
            .map(|(i, yi)| rhs(yi, delta, i))
            .collect::<Result<_>>()?;
        let mut fmax = [0.0f64; 4];
        for fi in &f {
            for k in 0..4 {
                fmax[k] = fmax[k].max(fi[k].abs());
            }
        }
        let mut r = vec![0.0; self.unknowns()];
        r[0] = y[0][0] - 1.0;
        r[1] = y[0][1];
        let mut worst = r[0].abs().max(r[1].abs());
        for i in 0..n {
            let ym = midpoint(&y[i], &y[i + 1], &f[i], &f[i + 1], h);
            let fm = rhs(&ym, delta, i)?;
            for k in 0..4 {
                let v = y[i + 1][k] - y[i][k] - h / 6.0 * (f[i][k] + 4.0 * fm[k] + f[i + 1][k]);
                r[2 + 4 * i + k] = v;
                worst = worst.max(v.abs() / (h * (1.0 + fmax[k])));
            }
        }
        let last = self.unknowns();
        r[last - 2] = y[n][0] - 1.0;
        r[last - 1] = y[n][1];
        worst = worst.max(r[last - 2].abs()).max(r[last - 1].abs());
        Ok((r, worst))
    }

    fn jacobian_matrix(&self, y: &[State], delta: f64) -> Result<BandMatrix> {
        let n = self.intervals;
        let h = self.h;
        let mut a = BandMatrix::zeros(self.unknowns(), 5, 5);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        let mut f_next = rhs(&y[0], delta, 0)?;
        let mut j_next = jacobian(&y[0], delta, 0)?;
        for i in 0..n {
            let (fi, ji) = (f_next, j_next);
            f_next = rhs(&y[i + 1], delta, i + 1)?;
            j_next = jacobian(&y[i + 1], delta, i + 1)?;
            let ym = midpoint(&y[i], &y[i + 1], &fi, &f_next, h);
            let jm = jacobian(&ym, delta, i)?;
            let mut da = [[0.0; 4]; 4];
            let mut db = [[0.0; 4]; 4];
            for r in 0..4 {
                for c in 0..4 {
                    let id = if r == c { 1.0 } else { 0.0 };
                    da[r][c] = 0.5 * id + h / 8.0 * ji[r][c];
                    db[r][c] = 0.5 * id - h / 8.0 * j_next[r][c];
                }
            }
            let ma = matmul(&jm, &da);
            let mb = matmul(&jm, &db);
            let row0 = 2 + 4 * i;
            for r in 0..4 {
                for c in 0..4 {
                    let id = if r == c { 1.0 } else { 0.0 };
                    a.set(row0 + r, 4 * i + c, -id - h / 6.0 * (ji[r][c] + 4.0 * ma[r][c]));
                    a.set(row0 + r, 4 * (i + 1) + c, id - h / 6.0 * (j_next[r][c] + 4.0 * mb[r][c]));
                }
            }
        }
        let last = self.unknowns();
        a.set(last - 2, 4 * n, 1.0);
        a.set(last - 1, 4 * n + 1, 1.0);
        Ok(a)
    }

    /// Damped Newton from `guess`: full steps are halved until the scaled
    /// residual drops, for at most [`MAX_NEWTON`] iterations.
    pub fn newton(&self, delta: f64, guess: Vec<State>) -> Result<NewtonOutcome> {
        let mut y = guess;
        let (mut r, mut res) = self.residual(&y, delta)?;
        let mut iterations = 0;
        while iterations < MAX_NEWTON && res > POLISH_TOL {
            iterations += 1;
            let jac = self.jacobian_matrix(&y, delta)?;
            let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
            jac.solve(&mut step)?;
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda > 1e-4 {
                let trial: Vec<State> = y
                    .iter()
                    .enumerate()
                    .map(|(i, yi)| std::array::from_fn(|k| yi[k] + lambda * step[4 * i + k]))
                    .collect();
                match self.residual(&trial, delta) {
                    Ok((rt, rest)) if rest < res => {
                        y = trial;
                        r = rt;
                        res = rest;
                        accepted = true;
                        break;
                    }
                    // A trial step through θ = 0 counts as a failed step.
                    Ok(_) | Err(Error::SingularTheta { .. }) => lambda *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            if !accepted {
                break;
            }
        }
        Ok(NewtonOutcome {
            y,
            residual: res,
            converged: res < RESIDUAL_TOL,
            iterations,
        })
    }
}

fn midpoint(a: &State, b: &State, fa: &State, fb: &State, h: f64) -> State {
    std::array::from_fn(|k| 0.5 * (a[k] + b[k]) - h / 8.0 * (fb[k] - fa[k]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_matches_finite_differences() {
        let y = [1.7, -0.3, 2.2, 5.1];
        let delta = 40.0;
        let j = jacobian(&y, delta, 0).unwrap();
        for c in 0..4 {
            let e = 1e-6 * (1.0 + y[c].abs());
            let mut p = y;
            let mut m = y;
            p[c] += e;
            m[c] -= e;
            let fp = rhs(&p, delta, 0).unwrap();
            let fm = rhs(&m, delta, 0).unwrap();
            for r in 0..4 {
                let fd = (fp[r] - fm[r]) / (2.0 * e);
                assert!((fd - j[r][c]).abs() < 1e-6 * (1.0 + fd.abs()), "({r},{c}): {fd} vs {}", j[r][c]);
            }
        }
    }

    #[test]
    fn collocation_jacobian_matches_finite_differences() {
        let col = Collocation::new(6);
        let delta = 300.0;
        let y: Vec<State> = (0..=6)
            .map(|i| {
                let t = i as f64 / 6.0;
                [1.0 + 3.0 * t * t * (1.0 - t), 0.2 * t, -1.0 + t, 0.5 - t * t]
            })
            .collect();
        let dense = col.jacobian_matrix(&y, delta).unwrap();
        let base = col.residual(&y, delta).unwrap().0;
        for i in 0..y.len() {
            for k in 0..4 {
                let e = 1e-7;
                let mut yp = y.clone();
                yp[i][k] += e;
                let rp = col.residual(&yp, delta).unwrap().0;
                for row in 0..base.len() {
                    let fd = (rp[row] - base[row]) / e;
                    let an = dense.get(row, 4 * i + k);
                    assert!((fd - an).abs() < 1e-4 * (1.0 + an.abs()), "row {row} col {}: {fd} vs {an}", 4 * i + k);
                }
            }
        }
    }

    #[test]
    fn zero_theta_is_singular() {
        assert!(matches!(rhs(&[0.0, 0.0, 0.0, 0.0], 1.0, 3), Err(Error::SingularTheta { node: 3, .. })));
    }
}
