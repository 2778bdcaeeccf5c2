//! Gauss–Legendre rules and an adaptive Gauss–Kronrod (7/15) integrator.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A fixed Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Like [`integrate`](Self::integrate) for fallible integrands.
    pub fn try_integrate<F: FnMut(f64) -> Result<f64>>(&self, a: f64, b: f64, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (x, w) in self.mapped(a, b) {
            acc += w * f(x)?;
        }
        Ok(acc)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// QUADPACK qk15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Adaptive Gauss–Kronrod integration with global bisection until the summed
/// error estimate drops below `abs_tol`.
pub fn integrate_adaptive<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&mut f, a, b)?;
    let mut segments = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = segments.iter().map(|s| s.3).sum();
        if total_err <= abs_tol {
            return Ok(segments.iter().map(|s| s.2).sum());
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { a, b, tol: abs_tol });
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = segments.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid)?;
        let (v2, e2) = gk15(&mut f, mid, hi)?;
        segments.push((lo, mid, v1, e1));
        segments.push((mid, hi, v2, e2));
    }
}
