//! Banded LU with partial pivoting for the collocation Jacobian.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals. Storage leaves room
/// for the extra `kl` super-diagonals that row pivoting can fill in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        if r >= self.n || c >= self.n || c + self.kl < r || c > r + self.ku + self.kl {
            return None;
        }
        Some(r * self.width + c + self.kl - r)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.slot(r, c).map_or(0.0, |i| self.data[i])
    }

    /// Panics if `(r, c)` lies outside the declared band.
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        assert!(
            c + self.kl >= r && c <= r + self.ku,
            "entry ({r}, {c}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let i = self.slot(r, c).expect("index in range");
        self.data[i] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let cur = self.get(r, c);
        self.set(r, c, cur + v);
    }

    /// Solves `A x = b` in place, consuming the factorization.
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let reach = self.ku + self.kl;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularMatrix(k));
            }
            let last_col = (k + reach).min(n - 1);
            if piv != k {
                for c in k..=last_col {
                    let (i, j) = (self.slot(k, c).unwrap(), self.slot(piv, c));
                    let pv = j.map_or(0.0, |j| self.data[j]);
                    let kv = self.data[i];
                    self.data[i] = pv;
                    if let Some(j) = j {
                        self.data[j] = kv;
                    }
                }
                b.swap(k, piv);
            }
            let pivot = self.get(k, k);
            for r in k + 1..=last_row {
                let l = self.get(r, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                let ri = self.slot(r, k).unwrap();
                self.data[ri] = 0.0;
                for c in k + 1..=last_col {
                    let kv = self.get(k, c);
                    if kv != 0.0 {
                        let i = self.slot(r, c).unwrap();
                        self.data[i] -= l * kv;
                    }
                }
                b[r] -= l * b[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let mut acc = b[k];
            for c in k + 1..=last_col {
                acc -= self.get(k, c) * b[c];
            }
            b[k] = acc / self.get(k, k);
        }
        Ok(())
    }
}
