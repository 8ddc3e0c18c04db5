//! Elementary symmetric functions on the Gårding cone `Γ_k`.
//!
//! `S_k(λ)` is evaluated with the product recurrence over `∏(1 + λ_i x)`, which
//! is `O(nk)` and exact for the orders used here. The matrix helpers reduce a
//! Hermitian matrix to its spectrum first, so `S_k(A) = S_k(λ(A))`.

mod critical;
mod inequalities;
mod sampling;
mod suite;

pub use critical::{
    critical_quantity, critical_quantity_scale, gradient_exponent, sample_critical_config, CriticalPointConfig,
};
pub use inequalities::{
    check_concavity_segment, check_deleted_ratios, check_single_index, check_single_index_all, deleted_trace,
    estimate_theta, theta_ratio, Margin, DeletedRatioMargins,
};
pub use sampling::{sample_cone_boundary, sample_open_cone};
pub use suite::{run_suite, PropertyTally, SuiteConfig, SuiteReport};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalue vector of a complex Hessian, stored in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("spectrum must have at least one entry".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite eigenvalue {bad}")));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `max |λ_i|`, used to scale tolerances.
    pub fn magnitude(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn sigma(&self, k: usize) -> Result<f64> {
        sigma_k(&self.values, k)
    }
}

/// All elementary symmetric polynomials `S_0..=S_max_order` of `lambda`.
pub fn elementary_symmetric(lambda: &[f64], max_order: usize) -> Vec<f64> {
    let top = max_order.min(lambda.len());
    let mut e = vec![0.0; max_order + 1];
    e[0] = 1.0;
    for (i, &l) in lambda.iter().enumerate() {
        for j in (1..=top.min(i + 1)).rev() {
            e[j] += l * e[j - 1];
        }
    }
    e
}

/// `S_k(λ)`, with `S_0 = 1`.
pub fn sigma_k(lambda: &[f64], k: usize) -> Result<f64> {
    if k > lambda.len() {
        return Err(Error::Domain(format!(
            "order k = {k} exceeds dimension n = {}",
            lambda.len()
        )));
    }
    Ok(elementary_symmetric(lambda, k)[k])
}

/// `S_k` of `lambda` with the entries at `excluded` removed.
pub fn sigma_k_deleted(lambda: &[f64], k: usize, excluded: &[usize]) -> Result<f64> {
    if excluded.len() > 2 {
        return Err(Error::Domain("at most two indices may be excluded".into()));
    }
    for (pos, &i) in excluded.iter().enumerate() {
        if i >= lambda.len() {
            return Err(Error::Domain(format!(
                "excluded index {i} out of range for n = {}",
                lambda.len()
            )));
        }
        if excluded[..pos].contains(&i) {
            return Err(Error::Domain(format!("excluded index {i} repeated")));
        }
    }
    let kept: Vec<f64> = lambda
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded.contains(i))
        .map(|(_, &v)| v)
        .collect();
    sigma_k(&kept, k)
}

/// `S_k(λ|i)` for every `i`.
pub(crate) fn deleted_sigmas(lambda: &[f64], k: usize) -> Vec<f64> {
    (0..lambda.len())
        .map(|i| {
            let kept: Vec<f64> = lambda
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .collect();
            if k > kept.len() {
                0.0
            } else {
                elementary_symmetric(&kept, k)[k]
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeMembership {
    pub k: usize,
    pub inside_open: bool,
    pub inside_closed: bool,
    /// `S_1, ..., S_k`.
    pub margins: Vec<f64>,
}

impl ConeMembership {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn cone_test(lambda: &[f64], k: usize, tol: f64) -> ConeMembership {
    let k_eff = k.min(lambda.len());
    let e = elementary_symmetric(lambda, k_eff);
    let margins = e[1..].to_vec();
    ConeMembership {
        k,
        inside_open: margins.iter().all(|&m| m > tol),
        inside_closed: margins.iter().all(|&m| m >= -tol),
        margins,
    }
}

fn hermitian_defect(a: &DMatrix<Complex64>) -> (f64, f64) {
    let n = a.nrows();
    let mut defect = 0.0_f64;
    let mut size = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
            size = size.max(a[(i, j)].norm());
        }
    }
    (defect, size)
}

/// Tries to find a diagonal unitary `D` with `D^* A D` real. Returns the
/// reduced real symmetric matrix on success.
fn phase_reduce(a: &DMatrix<Complex64>, tol: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut theta = vec![f64::NAN; n];
    for root in 0..n {
        if !theta[root].is_nan() {
            continue;
        }
        theta[root] = 0.0;
        let mut stack = vec![root];
        while let Some(j) = stack.pop() {
            for k in 0..n {
                if k != j && theta[k].is_nan() && a[(j, k)].norm() > tol {
                    // e^{-iθ_j} A_jk e^{iθ_k} real
                    theta[k] = theta[j] - a[(j, k)].arg();
                    stack.push(k);
                }
            }
        }
    }
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let phase = Complex64::from_polar(1.0, theta[k] - theta[j]);
            let b = a[(j, k)] * phase;
            if b.im.abs() > tol {
                return None;
            }
            out[(j, k)] = b.re;
        }
    }
    Some(out)
}

fn check_hermitian(a: &DMatrix<Complex64>) -> Result<f64> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Domain(format!(
            "expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let (defect, size) = hermitian_defect(a);
    let tol = 1e-12 * size.max(1.0);
    if defect > tol {
        return Err(Error::Domain(format!(
            "matrix is not Hermitian: defect {defect:e} exceeds {tol:e}"
        )));
    }
    Ok(tol)
}

fn symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Eigenvalues and unitary eigenvectors of a Hermitian matrix, via the real
/// path whenever a diagonal phase reduction exists.
pub fn hermitian_eigen(a: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let tol = check_hermitian(a)?;
    let n = a.nrows();
    if let Some(real) = phase_reduce(a, tol) {
        // recover the phases used so the eigenvectors live in the original basis
        let mut theta = vec![0.0; n];
        let mut seen = vec![false; n];
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut stack = vec![root];
            while let Some(j) = stack.pop() {
                for k in 0..n {
                    if k != j && !seen[k] && a[(j, k)].norm() > tol {
                        theta[k] = theta[j] - a[(j, k)].arg();
                        seen[k] = true;
                        stack.push(k);
                    }
                }
            }
        }
        let (vals, vecs) = symmetric_eigen(&real);
        let q = DMatrix::from_fn(n, n, |r, c| {
            Complex64::from_polar(1.0, theta[r]) * vecs[(r, c)]
        });
        return Ok((vals, q));
    }
    let herm = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// `S_k(A)` together with the spectrum of a Hermitian matrix.
pub fn sk_of_hermitian(a: &DMatrix<Complex64>, k: usize) -> Result<(f64, Spectrum)> {
    let (vals, _) = hermitian_eigen(a)?;
    let spectrum = Spectrum::new(vals)?;
    let sk = spectrum.sigma(k)?;
    Ok((sk, spectrum))
}

/// Real symmetric shortcut of [`sk_of_hermitian`].
pub fn sk_of_symmetric(a: &DMatrix<f64>, k: usize) -> Result<(f64, Spectrum)> {
    let (vals, _) = symmetric_eigen(a);
    let spectrum = Spectrum::new(vals)?;
    let sk = spectrum.sigma(k)?;
    Ok((sk, spectrum))
}

/// Derivative of `S_k` with respect to the matrix entries. For a Hermitian
/// perturbation `E`, `d/dt S_k(A + tE) = tr(F E)`.
#[derive(Clone, Debug)]
pub struct HessianDerivative {
    pub f_matrix: DMatrix<Complex64>,
    pub trace_f: f64,
    pub spectrum: Spectrum,
}

fn cone_guard(lambda: &[f64], k: usize) -> Result<()> {
    let scale = lambda.iter().fold(1.0_f64, |m, v| m.max(v.abs())).powi(k as i32);
    let cone = cone_test(lambda, k, 1e-12 * scale);
    if cone.inside_closed {
        Ok(())
    } else {
        Err(Error::Cone {
            k,
            margins: cone.margins,
        })
    }
}

pub fn hessian_derivative(a: &DMatrix<Complex64>, k: usize) -> Result<HessianDerivative> {
    let n = a.nrows();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("order k = {k} must lie in 1..={n}")));
    }
    let (vals, q) = hermitian_eigen(a)?;
    cone_guard(&vals, k)?;
    let weights = deleted_sigmas(&vals, k - 1);
    let mut f = DMatrix::<Complex64>::zeros(n, n);
    for (i, &w) in weights.iter().enumerate() {
        let col = q.column(i);
        f += (col * col.adjoint()) * Complex64::new(w, 0.0);
    }
    let trace_f = weights.iter().sum();
    Ok(HessianDerivative {
        f_matrix: f,
        trace_f,
        spectrum: Spectrum::new(vals)?,
    })
}

/// Real symmetric version used inside the grid Newton loop. Returns the
/// derivative matrix and the (unsorted) eigenvalues.
pub fn hessian_derivative_real(a: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let n = a.nrows();
    let (vals, q) = symmetric_eigen(a);
    let weights = deleted_sigmas(&vals, k - 1);
    let mut f = DMatrix::<f64>::zeros(n, n);
    for (i, &w) in weights.iter().enumerate() {
        let col = q.column(i);
        f += (col * col.transpose()) * w;
    }
    (f, vals)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn subset_sum(lambda: &[f64], k: usize) -> f64 {
        let n = lambda.len();
        (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| {
                (0..n)
                    .filter(|i| m & (1 << i) != 0)
                    .map(|i| lambda[i])
                    .product::<f64>()
            })
            .sum()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_k(&[1.0; 4], 2).unwrap(), 6.0);
        assert_eq!(sigma_k(&[1.0, 2.0, 3.0], 2).unwrap(), subset_sum(&[1.0, 2.0, 3.0], 2));
        assert_eq!(sigma_k(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
        assert_eq!(sigma_k(&[0.0, 5.0, 7.0], 3).unwrap(), 0.0);
        assert_eq!(sigma_k(&[3.0, -2.0], 0).unwrap(), 1.0);
        assert!(matches!(sigma_k(&[1.0, 2.0], 3), Err(Error::Domain(_))));
    }

    #[test]
    fn recurrence_matches_enumeration() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 3.0 - 1.0
        };
        for n in 1..=10 {
            for _ in 0..20 {
                let lambda: Vec<f64> = (0..n).map(|_| next()).collect();
                for k in 0..=n {
                    let fast = sigma_k(&lambda, k).unwrap();
                    let slow = subset_sum(&lambda, k);
                    let scale = subset_sum(&lambda.iter().map(|v| v.abs()).collect::<Vec<_>>(), k);
                    assert!((fast - slow).abs() <= 1e-13 * scale.max(1e-300), "n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn deleted_examples() {
        let s = Spectrum::new(vec![1.0, 2.0, 3.0]).unwrap();
        // sorted (3, 2, 1); second entry is 2
        assert_eq!(sigma_k_deleted(s.values(), 1, &[1]).unwrap(), 4.0);
        assert_eq!(sigma_k_deleted(&[1.0, 1.0, 1.0], 2, &[0]).unwrap(), 1.0);
        assert_eq!(sigma_k_deleted(&[2.0, 2.0], 0, &[0]).unwrap(), 1.0);
        assert!(sigma_k_deleted(&[2.0, 2.0], 0, &[5]).is_err());
        assert!(sigma_k_deleted(&[2.0, 2.0, 1.0], 1, &[1, 1]).is_err());
        assert!(sigma_k_deleted(&[2.0, 2.0, 1.0], 2, &[0, 1]).is_err());
    }

    #[test]
    fn cone_examples() {
        let c = cone_test(&[1.0, 1.0, -0.5], 1, 0.0);
        assert!(c.inside_open);
        let c = cone_test(&[1.0, 1.0, -0.5], 2, 0.0);
        assert!(!c.inside_open && c.inside_closed);
        assert_eq!(c.margins[1], 0.0);
        for k in 1..=5 {
            assert!(cone_test(&[1.0; 5], k, 0.0).inside_open);
        }
    }

    #[test]
    fn spectrum_rejects_bad_input() {
        assert!(Spectrum::new(vec![]).is_err());
        assert!(Spectrum::new(vec![1.0, f64::NAN]).is_err());
        assert_eq!(Spectrum::new(vec![1.0, 3.0, 2.0]).unwrap().values(), &[3.0, 2.0, 1.0]);
    }

    fn cdiag(d: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(d.len(), d.len(), |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn hermitian_examples() {
        let (s, l) = sk_of_hermitian(&cdiag(&[1.0, 1.0, 1.0]), 2).unwrap();
        assert_relative_eq!(s, 3.0, epsilon = 1e-14);
        assert_eq!(l.len(), 3);
        let (s, l) = sk_of_hermitian(&cdiag(&[1.0, 2.0, 3.0]), 2).unwrap();
        assert_relative_eq!(s, 11.0, epsilon = 1e-13);
        assert_relative_eq!(l.values()[0], 3.0, epsilon = 1e-14);
        let (s, _) = sk_of_hermitian(&cdiag(&[0.0, 0.0]), 1).unwrap();
        assert_eq!(s, 0.0);

        let mut bad = cdiag(&[1.0, 1.0]);
        bad[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(sk_of_hermitian(&bad, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn general_hermitian_path_agrees_with_dense_solver() {
        // a 3-cycle of phases cannot be removed by a diagonal unitary
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[one * 2.0, i, i, -i, one * 3.0, i, -i, -i, one * 1.0],
        );
        assert!(phase_reduce(&a, 1e-12).is_none());
        let (s2, spec) = sk_of_hermitian(&a, 2).unwrap();
        // S_2 equals the sum of principal 2x2 minors
        let minors = (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)])
            + (a[(0, 0)] * a[(2, 2)] - a[(0, 2)] * a[(2, 0)])
            + (a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)]);
        assert_relative_eq!(s2, minors.re, epsilon = 1e-12);
        assert_relative_eq!(spec.values().iter().sum::<f64>(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn derivative_examples() {
        let d = hessian_derivative(&cdiag(&[1.0, 1.0, 1.0]), 2).unwrap();
        for i in 0..3 {
            assert_relative_eq!(d.f_matrix[(i, i)].re, 2.0, epsilon = 1e-13);
        }
        let d = hessian_derivative(&cdiag(&[1.0, 2.0, 3.0]), 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d.f_matrix[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-13);
            }
        }
        assert!(matches!(
            hessian_derivative(&cdiag(&[1.0, -3.0, 0.5]), 2),
            Err(Error::Cone { .. })
        ));
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[one * 3.0, one * 0.4 + i * 0.2, one * 0.1, one * 0.4 - i * 0.2, one * 2.0, i * 0.3, one * 0.1, -i * 0.3, one * 1.5],
        );
        let e = DMatrix::from_row_slice(
            3,
            3,
            &[one * 0.3, one * 0.1 - i * 0.7, i * 0.2, one * 0.1 + i * 0.7, -one, one * 0.5, -i * 0.2, one * 0.5, one * 0.2],
        );
        for k in 1..=3 {
            let d = hessian_derivative(&a, k).unwrap();
            let h = 1e-5;
            let plus = sk_of_hermitian(&(&a + &e * Complex64::new(h, 0.0)), k).unwrap().0;
            let minus = sk_of_hermitian(&(&a - &e * Complex64::new(h, 0.0)), k).unwrap().0;
            let fd = (plus - minus) / (2.0 * h);
            let analytic = (&d.f_matrix * &e).trace().re;
            assert_relative_eq!(fd, analytic, epsilon = 1e-7, max_relative = 1e-7);
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(6, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(binomial(10, 3), 120.0);
    }
}
