//! Trap trajectories α(t) on [0, t_f] with analytic derivatives up to 4th order.

use crate::error::{Error, Result};

/// Polynomial trajectory families with α = α̇ = 0 at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFamily {
    /// `M(64u³ − 192u⁴ + 192u⁵ − 64u⁶)`; α̈ also vanishes at the ends.
    SixthOrder,
    /// `M(16u⁴ − 32u³ + 16u²)`; α̈ does not vanish at the ends.
    FourthOrder,
}

impl TrajectoryFamily {
    /// Coefficients of α/M in powers of u = t/t_f.
    fn coefficients(self) -> [f64; 7] {
        match self {
            TrajectoryFamily::SixthOrder => [0.0, 0.0, 0.0, 64.0, -192.0, 192.0, -64.0],
            TrajectoryFamily::FourthOrder => [0.0, 0.0, 16.0, -32.0, 16.0, 0.0, 0.0],
        }
    }

    /// Closed-form `∫α dt / (M t_f)`.
    pub fn sensitivity_coefficient(self) -> f64 {
        match self {
            TrajectoryFamily::SixthOrder => 16.0 / 35.0,
            TrajectoryFamily::FourthOrder => 8.0 / 15.0,
        }
    }

    /// Closed-form `∫α²α̈² dt · t_f³ / M⁴`.
    pub fn noise_coefficient(self) -> f64 {
        match self {
            TrajectoryFamily::SixthOrder => 16_777_216.0 / 146_965.0,
            TrajectoryFamily::FourthOrder => 3_014_656.0 / 45_045.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrajectoryFamily::SixthOrder => "sixth",
            TrajectoryFamily::FourthOrder => "fourth",
        }
    }
}

impl std::str::FromStr for TrajectoryFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sixth" | "6" | "sixth-order" => Ok(TrajectoryFamily::SixthOrder),
            "fourth" | "4" | "fourth-order" => Ok(TrajectoryFamily::FourthOrder),
            other => Err(Error::InvalidArgument(format!("unknown trajectory family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    SixthOrder,
    FourthOrder,
    GridInterpolant,
}

#[derive(Debug, Clone)]
enum Shape {
    Polynomial {
        family: TrajectoryFamily,
        amplitude: f64,
        /// Coefficients of d^k(α/M)/du^k in powers of u, k = 0..=4.
        derivs: [[f64; 7]; 5],
    },
    Grid(GridData),
}

/// Piecewise-quintic Hermite data on a uniform τ mesh; `α(t) = scale·θ(t/t_f)`.
#[derive(Debug, Clone)]
struct GridData {
    scale: f64,
    intervals: usize,
    /// Six monomial coefficients per interval in the local variable s ∈ [0, 1].
    coeffs: Vec<[f64; 6]>,
}

/// Immutable trap trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    t_f: f64,
    shape: Shape,
}

fn check_tf(t_f: f64) -> Result<()> {
    if t_f.is_finite() && t_f > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("t_f must be > 0, got {t_f}")))
    }
}

impl Trajectory {
    pub fn polynomial(family: TrajectoryFamily, amplitude: f64, t_f: f64) -> Result<Self> {
        check_tf(t_f)?;
        if !amplitude.is_finite() {
            return Err(Error::InvalidArgument("amplitude must be finite".into()));
        }
        let mut derivs = [[0.0; 7]; 5];
        derivs[0] = family.coefficients();
        for k in 1..5 {
            for j in 0..6 {
                derivs[k][j] = derivs[k - 1][j + 1] * (j + 1) as f64;
            }
        }
        Ok(Self {
            t_f,
            shape: Shape::Polynomial {
                family,
                amplitude,
                derivs,
            },
        })
    }

    /// Builds a C² trajectory from samples of θ, θ' and θ'' (derivatives with
    /// respect to τ = t/t_f) on a uniform mesh over τ ∈ [0, 1].
    pub fn grid_interpolant(
        theta: &[f64],
        dtheta: &[f64],
        ddtheta: &[f64],
        scale: f64,
        t_f: f64,
    ) -> Result<Self> {
        check_tf(t_f)?;
        let n = theta.len();
        if n < 2 || dtheta.len() != n || ddtheta.len() != n {
            return Err(Error::InvalidArgument(
                "grid interpolant needs >= 2 nodes and matching derivative arrays".into(),
            ));
        }
        let intervals = n - 1;
        let h = 1.0 / intervals as f64;
        let coeffs = (0..intervals)
            .map(|i| {
                let a0 = theta[i];
                let a1 = h * dtheta[i];
                let a2 = 0.5 * h * h * ddtheta[i];
                let p = theta[i + 1] - a0 - a1 - a2;
                let d = h * dtheta[i + 1] - a1 - 2.0 * a2;
                let e = h * h * ddtheta[i + 1] - 2.0 * a2;
                [
                    a0,
                    a1,
                    a2,
                    10.0 * p - 4.0 * d + 0.5 * e,
                    -15.0 * p + 7.0 * d - e,
                    6.0 * p - 3.0 * d + 0.5 * e,
                ]
            })
            .collect();
        Ok(Self {
            t_f,
            shape: Shape::Grid(GridData {
                scale,
                intervals,
                coeffs,
            }),
        })
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn kind(&self) -> TrajectoryKind {
        match &self.shape {
            Shape::Polynomial { family: TrajectoryFamily::SixthOrder, .. } => TrajectoryKind::SixthOrder,
            Shape::Polynomial { family: TrajectoryFamily::FourthOrder, .. } => TrajectoryKind::FourthOrder,
            Shape::Grid(_) => TrajectoryKind::GridInterpolant,
        }
    }

    pub fn family(&self) -> Option<TrajectoryFamily> {
        match &self.shape {
            Shape::Polynomial { family, .. } => Some(*family),
            Shape::Grid(_) => None,
        }
    }

    /// Maximum displacement `M` of polynomial kinds.
    pub fn amplitude(&self) -> Option<f64> {
        match &self.shape {
            Shape::Polynomial { amplitude, .. } => Some(*amplitude),
            Shape::Grid(_) => None,
        }
    }

    /// Times at which the integrand may lose smoothness; always includes 0 and t_f.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Polynomial { .. } => vec![0.0, self.t_f],
            Shape::Grid(g) => (0..=g.intervals)
                .map(|i| self.t_f * i as f64 / g.intervals as f64)
                .collect(),
        }
    }

    /// d^order α / dt^order at `t`.
    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        if order > 4 {
            return Err(Error::DerivativeOrder(order));
        }
        if !(0.0..=self.t_f).contains(&t) {
            return Err(Error::OutOfRange { t, t_f: self.t_f });
        }
        Ok(self.eval_unchecked(t, order))
    }

    /// α, α̇, α̈ at `t`.
    pub fn eval3(&self, t: f64) -> Result<[f64; 3]> {
        if !(0.0..=self.t_f).contains(&t) {
            return Err(Error::OutOfRange { t, t_f: self.t_f });
        }
        Ok([
            self.eval_unchecked(t, 0),
            self.eval_unchecked(t, 1),
            self.eval_unchecked(t, 2),
        ])
    }

    fn eval_unchecked(&self, t: f64, order: usize) -> f64 {
        let u = t / self.t_f;
        let time_scale = self.t_f.powi(order as i32);
        match &self.shape {
            Shape::Polynomial { amplitude, derivs, .. } => {
                let c = &derivs[order];
                let v = c.iter().rev().fold(0.0, |acc, &cj| acc * u + cj);
                amplitude * v / time_scale
            }
            Shape::Grid(g) => {
                let pos = u * g.intervals as f64;
                let i = (pos.floor() as usize).min(g.intervals - 1);
                let s = pos - i as f64;
                let a = &g.coeffs[i];
                let v = match order {
                    0 => a.iter().rev().fold(0.0, |acc, &c| acc * s + c),
                    _ => {
                        // k-th derivative of Σ a_j s^j
                        let mut acc = 0.0;
                        for j in (order..6).rev() {
                            let falling: f64 = ((j - order + 1)..=j).map(|x| x as f64).product();
                            acc = acc * s + a[j] * falling;
                        }
                        acc
                    }
                };
                let h = 1.0 / g.intervals as f64;
                g.scale * v / (h.powi(order as i32) * time_scale)
            }
        }
    }
}

pub fn make_sixth_order(amplitude: f64, t_f: f64) -> Result<Trajectory> {
    Trajectory::polynomial(TrajectoryFamily::SixthOrder, amplitude, t_f)
}

pub fn make_fourth_order(amplitude: f64, t_f: f64) -> Result<Trajectory> {
    Trajectory::polynomial(TrajectoryFamily::FourthOrder, amplitude, t_f)
}

/// Force `f = mα̈` that cancels the inertial term in the moving frame.
pub fn compensating_force(traj: &Trajectory, m: f64, t: f64) -> Result<f64> {
    Ok(m * traj.eval(t, 2)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use proptest::prelude::*;

    #[test]
    fn sixth_order_shape() {
        let tr = make_sixth_order(0.3, 0.7).unwrap();
        assert!((tr.eval(0.35, 0).unwrap() - 0.3).abs() < 1e-15);
        let unit = make_sixth_order(1.0, 1.0).unwrap();
        // Horner by hand: u³(64 + u(-192 + u(192 - 64u)))
        let u = 0.25f64;
        let oracle = u * u * u * (64.0 + u * (-192.0 + u * (192.0 - 64.0 * u)));
        assert!((oracle - 0.421875).abs() < 1e-15);
        assert!((unit.eval(0.25, 0).unwrap() - 0.421875).abs() < 1e-14);
        assert!(unit.eval(0.5, 1).unwrap().abs() < 1e-13);
        for t in [0.0, 1.0] {
            for k in 0..3 {
                assert!(unit.eval(t, k).unwrap().abs() < 1e-12, "order {k} at {t}");
            }
        }
    }

    #[test]
    fn zero_amplitude_is_flat() {
        for fam in [TrajectoryFamily::SixthOrder, TrajectoryFamily::FourthOrder] {
            let tr = Trajectory::polynomial(fam, 0.0, 2.0).unwrap();
            for k in 0..5 {
                assert_eq!(tr.eval(0.7, k).unwrap(), 0.0);
            }
            assert_eq!(compensating_force(&tr, 100.0, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn fourth_order_shape() {
        let tr = make_fourth_order(1.0, 1.0).unwrap();
        assert!((tr.eval(0.5, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!((tr.eval(0.0, 2).unwrap() - 32.0).abs() < 1e-13);
        assert!((tr.eval(1.0, 2).unwrap() - 32.0).abs() < 1e-12);
        assert!(tr.eval(0.0, 1).unwrap().abs() < 1e-15);
        assert!(tr.eval(1.0, 1).unwrap().abs() < 1e-12);
        assert!((compensating_force(&tr, 1.0, 0.0).unwrap() - 32.0).abs() < 1e-13);
        let scaled = make_fourth_order(2.0, 0.5).unwrap();
        assert!((scaled.eval(0.0, 2).unwrap() - 32.0 * 2.0 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn sixth_order_force_vanishes_at_ends() {
        let tr = make_sixth_order(0.2, 0.7).unwrap();
        assert!(compensating_force(&tr, 144.0, 0.0).unwrap().abs() < 1e-12);
        assert!(compensating_force(&tr, 144.0, 0.7).unwrap().abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let tr = make_sixth_order(1.0, 1.0).unwrap();
        assert!(matches!(tr.eval(-1e-9, 0), Err(Error::OutOfRange { .. })));
        assert!(matches!(tr.eval(1.0 + 1e-9, 0), Err(Error::OutOfRange { .. })));
        assert!(matches!(tr.eval(0.5, 5), Err(Error::DerivativeOrder(5))));
        assert!(make_sixth_order(1.0, 0.0).is_err());
        assert!(make_fourth_order(1.0, -1.0).is_err());
    }

    #[test]
    fn force_integrates_to_zero() {
        let gl = GaussLegendre::new(16);
        for fam in [TrajectoryFamily::SixthOrder, TrajectoryFamily::FourthOrder] {
            let tr = Trajectory::polynomial(fam, 0.4, 0.7).unwrap();
            let total = gl.integrate(0.0, 0.7, |t| compensating_force(&tr, 144.3, t).unwrap());
            assert!(total.abs() < 1e-10, "{fam:?}: {total}");
        }
    }

    #[test]
    fn grid_interpolant_reproduces_quintic() {
        // A quintic is reproduced exactly by quintic Hermite interpolation.
        let p = |x: f64| 1.0 + x * x * (1.0 - x) * (1.0 - x) * (2.0 + x);
        let dp = |x: f64| {
            let h = 1e-5;
            (p(x - 2.0 * h) - 8.0 * p(x - h) + 8.0 * p(x + h) - p(x + 2.0 * h)) / (12.0 * h)
        };
        // Exact derivatives from expanding: x²(1-x)²(2+x) = 2x² - 3x³ + x⁵
        let d1 = |x: f64| 4.0 * x - 9.0 * x * x + 5.0 * x.powi(4);
        let d2 = |x: f64| 4.0 - 18.0 * x + 20.0 * x.powi(3);
        let n = 9;
        let tau: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let th: Vec<f64> = tau.iter().map(|&x| p(x)).collect();
        let d: Vec<f64> = tau.iter().map(|&x| d1(x)).collect();
        let dd: Vec<f64> = tau.iter().map(|&x| d2(x)).collect();
        let tr = Trajectory::grid_interpolant(&th, &d, &dd, 0.5, 2.0).unwrap();
        assert_eq!(tr.kind(), TrajectoryKind::GridInterpolant);
        assert_eq!(tr.breakpoints().len(), n);
        for k in 0..40 {
            let t = 2.0 * k as f64 / 39.0;
            let x = t / 2.0;
            assert!((tr.eval(t, 0).unwrap() - 0.5 * p(x)).abs() < 1e-13);
            assert!((tr.eval(t, 1).unwrap() - 0.5 * d1(x) / 2.0).abs() < 1e-12);
            assert!((tr.eval(t, 1).unwrap() - 0.5 * dp(x) / 2.0).abs() < 1e-8);
            assert!((tr.eval(t, 2).unwrap() - 0.5 * d2(x) / 4.0).abs() < 1e-11);
            let d3 = -18.0 + 60.0 * x * x;
            assert!((tr.eval(t, 3).unwrap() - 0.5 * d3 / 8.0).abs() < 1e-9);
        }
    }

    fn fd_check(tr: &Trajectory, t: f64, order: usize) -> (f64, f64) {
        let h = 1e-3 * tr.t_f();
        let f = |x: f64| tr.eval(x, order - 1).unwrap();
        let fd = (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h);
        (fd, tr.eval(t, order).unwrap())
    }

    proptest! {
        #[test]
        fn derivatives_match_central_differences(
            u in 0.01f64..0.99,
            amp in 0.05f64..2.0,
            t_f in 0.2f64..3.0,
            sixth in any::<bool>(),
            order in 1usize..5,
        ) {
            let fam = if sixth { TrajectoryFamily::SixthOrder } else { TrajectoryFamily::FourthOrder };
            let tr = Trajectory::polynomial(fam, amp, t_f).unwrap();
            let (fd, exact) = fd_check(&tr, u * t_f, order);
            let scale = amp / t_f.powi(order as i32);
            prop_assert!((fd - exact).abs() <= 1e-8 * exact.abs().max(scale),
                "order {} fd {} exact {}", order, fd, exact);
        }

        #[test]
        fn sixth_order_is_symmetric(u in 0.0f64..1.0, amp in -2.0f64..2.0, t_f in 0.1f64..5.0) {
            let tr = make_sixth_order(amp, t_f).unwrap();
            let t = u * t_f;
            let a = tr.eval(t, 0).unwrap();
            let b = tr.eval(t_f - t, 0).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * amp.abs().max(1e-300));
        }
    }
}
