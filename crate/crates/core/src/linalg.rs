//! Banded LU with partial pivoting, used by both Newton solvers.

use crate::error::{Error, Result};

/// Square matrix stored by diagonals: `kl` sub-diagonals and `ku`
/// super-diagonals. Row-interchanges during factorization can widen the upper
/// band to `kl + ku`, so storage reserves that width up front.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    // row-major: row i holds columns i - kl ..= i + kl + ku
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

    pub fn size(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.kl + self.ku {
            None
        } else {
            Some(i * self.width + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |p| self.data[p])
    }

    /// Adds `value` to entry `(i, j)`; panics if it lies outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let p = self.slot(i, j).expect("checked above");
        self.data[p] += value;
    }

    /// Solves `A x = b` in place, consuming the matrix.
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let kl = self.kl;
        let ku_eff = self.kl + self.ku;
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-300_f64.max(f64::EPSILON * 1e-6);
        for col in 0..n {
            let last = (col + kl).min(n - 1);
            let mut pivot_row = col;
            let mut best = self.get(col, col).abs();
            for r in col + 1..=last {
                let v = self.get(r, col).abs();
                if v > best {
                    best = v;
                    pivot_row = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular(col));
            }
            let right = (col + ku_eff).min(n - 1);
            if pivot_row != col {
                for c in col..=right {
                    let a = self.get(col, c);
                    let p = self.get(pivot_row, c);
                    let sa = self.slot(col, c).expect("in band");
                    self.data[sa] = p;
                    match self.slot(pivot_row, c) {
                        Some(sp) => self.data[sp] = a,
                        None => debug_assert!(a == 0.0),
                    }
                }
                b.swap(col, pivot_row);
            }
            let diag = self.get(col, col);
            let span = right - col;
            let pivot_start = col * self.width + kl + 1;
            let pivot: Vec<f64> = self.data[pivot_start..pivot_start + span].to_vec();
            for r in col + 1..=last {
                let sr = self.slot(r, col).expect("in band");
                let factor = self.data[sr] / diag;
                if factor == 0.0 {
                    continue;
                }
                self.data[sr] = 0.0;
                // columns col+1..=right of row r are contiguous after the slot of col
                let row = &mut self.data[sr + 1..sr + 1 + span];
                for (x, &v) in row.iter_mut().zip(&pivot) {
                    *x -= factor * v;
                }
                b[r] -= factor * b[col];
            }
        }
        for row in (0..n).rev() {
            let right = (row + ku_eff).min(n - 1);
            let mut acc = b[row];
            for c in row + 1..=right {
                acc -= self.get(row, c) * b[c];
            }
            b[row] = acc / self.get(row, row);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(n, kl, ku) in &[(1, 0, 0), (6, 1, 1), (30, 3, 2), (40, 5, 7), (25, 0, 4)] {
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    // weak diagonal so pivoting is actually exercised
                    let v: f64 = rng.gen_range(-1.0..1.0) + if i == j { 0.05 } else { 0.0 };
                    band.add(i, j, v);
                    dense[(i, j)] = v;
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut x = rhs.clone();
            band.solve(&mut x).unwrap();
            let r = &dense * DVector::from_vec(x) - DVector::from_vec(rhs);
            assert!(r.amax() < 1e-9, "n={n} residual {}", r.amax());
        }
    }

    #[test]
    fn detects_singular() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.add(0, 0, 1.0);
        band.add(1, 0, 1.0);
        band.add(2, 2, 1.0);
        let mut b = vec![1.0, 1.0, 1.0];
        assert!(matches!(band.solve(&mut b), Err(Error::Singular(_))));
    }
}
