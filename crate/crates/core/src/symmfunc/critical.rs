//! First-order data at an interior maximum of `log |Du|^2 - a log(-u)`.
//!
//! In coordinates diagonalizing the complex Hessian, the vanishing gradient of
//! the auxiliary function forces the complex symmetric block `U_{li} = u_{z_l z_i}`
//! to satisfy, for every `i`,
//! `Σ_l U_{li} conj(Du_l) = Du_i (a |Du|^2 / u - λ_i)`.
//! [`sample_critical_config`] draws such blocks and [`critical_quantity`] evaluates the
//! quantity that the gradient bound needs to be nonnegative.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{cone_test, deleted_sigmas, Spectrum};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CriticalPointConfig {
    pub lambda: Spectrum,
    pub grad: Vec<Complex64>,
    pub u_value: f64,
    pub second_sym: DMatrix<Complex64>,
    pub a_exponent: f64,
}

impl CriticalPointConfig {
    /// Largest violation of the critical-point constraint over the indices.
    pub fn constraint_residual(&self) -> f64 {
        let n = self.grad.len();
        let g2: f64 = self.grad.iter().map(|z| z.norm_sqr()).sum();
        let l = self.lambda.values();
        (0..n)
            .map(|i| {
                let lhs: Complex64 = (0..n).map(|m| self.second_sym[(m, i)] * self.grad[m].conj()).sum();
                let rhs = self.grad[i] * (self.a_exponent * g2 / self.u_value - l[i]);
                (lhs - rhs).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Magnitude used to scale tolerances on the constraint residual.
    pub fn constraint_scale(&self) -> f64 {
        let g = self.grad.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let u_norm = self.second_sym.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let g2 = g * g;
        g * (u_norm + self.lambda.magnitude() + self.a_exponent * g2 / self.u_value.abs()).max(1.0)
    }
}

/// `a = (2n - k) / (n - k)`.
pub fn gradient_exponent(n: usize, k: usize) -> f64 {
    (2 * n - k) as f64 / (n - k) as f64
}

fn pack_index(n: usize) -> Vec<(usize, usize)> {
    let mut idx = Vec::with_capacity(n * (n + 1) / 2);
    for r in 0..n {
        for c in r..n {
            idx.push((r, c));
        }
    }
    idx
}

/// Real linear system `M x = rhs` for the independent entries of `U`, with
/// off-diagonal unknowns scaled by `√2` so `|x|` is the Frobenius norm of `U`.
fn constraint_system(grad: &[Complex64], rhs: &[Complex64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = grad.len();
    let idx = pack_index(n);
    let m = idx.len();
    let mut sys = DMatrix::<f64>::zeros(2 * n, 2 * m);
    let sqrt2 = std::f64::consts::SQRT_2;
    for (e, &(r, c)) in idx.iter().enumerate() {
        let w = if r == c { 1.0 } else { sqrt2 };
        // U_rc enters equation i = c through conj(grad_r), and i = r through conj(grad_c)
        let mut touch = vec![(c, grad[r].conj())];
        if r != c {
            touch.push((r, grad[c].conj()));
        }
        for (i, coef) in touch {
            let coef = coef / w;
            // (x + iy) * (p + iq) = (xp - yq) + i(xq + yp)
            sys[(2 * i, 2 * e)] += coef.re;
            sys[(2 * i, 2 * e + 1)] -= coef.im;
            sys[(2 * i + 1, 2 * e)] += coef.im;
            sys[(2 * i + 1, 2 * e + 1)] += coef.re;
        }
    }
    let b = DVector::from_fn(2 * n, |row, _| {
        let z = rhs[row / 2];
        if row % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    (sys, b)
}

fn unpack(n: usize, x: &DVector<f64>) -> DMatrix<Complex64> {
    let mut u = DMatrix::<Complex64>::zeros(n, n);
    for (e, &(r, c)) in pack_index(n).iter().enumerate() {
        let w = if r == c { 1.0 } else { std::f64::consts::SQRT_2 };
        let z = Complex64::new(x[2 * e], x[2 * e + 1]) / w;
        u[(r, c)] = z;
        u[(c, r)] = z;
    }
    u
}

/// Minimum-norm symmetric solution of the critical-point constraint plus a
/// seeded null-space perturbation no larger than that solution.
pub fn sample_critical_config(
    lambda: &Spectrum,
    k: usize,
    grad: &[Complex64],
    u_value: f64,
    seed: u64,
) -> Result<CriticalPointConfig> {
    let n = lambda.len();
    if grad.len() != n {
        return Err(Error::Domain(format!(
            "gradient has {} entries, spectrum has {n}",
            grad.len()
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::Domain(format!("order k = {k} must lie in 1..{n}")));
    }
    if !(u_value < 0.0) {
        return Err(crate::error::param("u_value", u_value, "must be negative"));
    }
    let cone = cone_test(lambda.values(), k, 0.0);
    if !cone.inside_open {
        return Err(Error::Cone {
            k,
            margins: cone.margins,
        });
    }
    let a = gradient_exponent(n, k);
    let g2: f64 = grad.iter().map(|z| z.norm_sqr()).sum();
    let l = lambda.values();
    let rhs: Vec<Complex64> = (0..n).map(|i| grad[i] * (a * g2 / u_value - l[i])).collect();
    let (sys, b) = constraint_system(grad, &rhs);

    let svd = sys.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = 1e-12 * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < 2 * n {
        return Err(Error::Construction {
            rank,
            expected: 2 * n,
            residual: f64::NAN,
        });
    }
    let particular = svd
        .solve(&b, cutoff)
        .map_err(|e| Error::Domain(format!("pseudo-inverse failed: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DVector::from_fn(sys.ncols(), |_, _| rng.gen_range(-1.0..1.0));
    let image = &sys * &raw;
    let back = svd
        .solve(&image, cutoff)
        .map_err(|e| Error::Domain(format!("pseudo-inverse failed: {e}")))?;
    let null = raw - back;
    let null_norm = null.norm();
    let x = if null_norm > 0.0 {
        let fraction: f64 = rng.gen_range(0.0..1.0);
        &particular + null * (fraction * particular.norm() / null_norm)
    } else {
        particular
    };

    let config = CriticalPointConfig {
        lambda: lambda.clone(),
        grad: grad.to_vec(),
        u_value,
        second_sym: unpack(n, &x),
        a_exponent: a,
    };
    let residual = config.constraint_residual();
    if residual > 1e-12 * config.constraint_scale() {
        return Err(Error::Construction {
            rank,
            expected: 2 * n,
            residual,
        });
    }
    Ok(config)
}

/// The sum over `i` of
/// `S_{k-1}(λ|i) [ Σ_l |U_li|^2 + λ_i^2 - c |Du_i|^2/|Du|^2 λ_i^2
///   - c |Σ_l conj(Du_l) U_li|^2/|Du|^2 - 2c λ_i Re(Σ_l U_li conj(Du_l) conj(Du_i))/|Du|^2 ]`
/// with `c = n/(2n-k)`. Evaluated as written, without using the constraint.
pub fn critical_quantity(config: &CriticalPointConfig, k: usize) -> f64 {
    let l = config.lambda.values();
    let n = l.len();
    let grad = &config.grad;
    let u = &config.second_sym;
    let g2: f64 = grad.iter().map(|z| z.norm_sqr()).sum();
    let c = n as f64 / (2 * n - k) as f64;
    let weights = deleted_sigmas(l, k - 1);
    (0..n)
        .map(|i| {
            let col_sq: f64 = (0..n).map(|m| u[(m, i)].norm_sqr()).sum();
            let contracted: Complex64 = (0..n).map(|m| u[(m, i)] * grad[m].conj()).sum();
            let cross = (contracted * grad[i].conj()).re;
            weights[i]
                * (col_sq + l[i] * l[i]
                    - c * grad[i].norm_sqr() / g2 * l[i] * l[i]
                    - c * contracted.norm_sqr() / g2
                    - 2.0 * c * l[i] * cross / g2)
        })
        .sum()
}

/// Tolerance scale for [`critical_quantity`]: the size of its largest positive terms.
pub fn critical_quantity_scale(config: &CriticalPointConfig, k: usize) -> f64 {
    let l = config.lambda.values();
    let weights = deleted_sigmas(l, k - 1);
    let u_sq: f64 = config.second_sym.iter().map(|z| z.norm_sqr()).sum();
    let wmax = weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    wmax * (u_sq + config.lambda.magnitude().powi(2)) * l.len() as f64
}

#[cfg(test)]
mod tests {
    use super::super::sigma_k_deleted;
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_component_gradient_fixes_one_column() {
        let lambda = Spectrum::new(vec![2.0, 1.0, 0.5]).unwrap();
        let grad = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let u = -0.7;
        let cfg = sample_critical_config(&lambda, 2, &grad, u, 3).unwrap();
        let a = gradient_exponent(3, 2);
        // column 1 of U is forced: U_11 = a/u - λ_1, U_l1 = 0 for l > 1
        assert_relative_eq!(cfg.second_sym[(0, 0)].re, a / u - 2.0, epsilon = 1e-12);
        assert!(cfg.second_sym[(0, 0)].im.abs() < 1e-12);
        assert!(cfg.second_sym[(1, 0)].norm() < 1e-12);
        assert!(cfg.second_sym[(2, 0)].norm() < 1e-12);
        assert!(cfg.constraint_residual() < 1e-12);
    }

    #[test]
    fn seeds_differ_only_in_null_space() {
        let lambda = Spectrum::new(vec![1.5, 0.8, -0.3]).unwrap();
        let grad = vec![c(0.3, -0.2), c(1.0, 0.4), c(-0.5, 0.1)];
        let a = sample_critical_config(&lambda, 2, &grad, -1.3, 1).unwrap();
        let b = sample_critical_config(&lambda, 2, &grad, -1.3, 2).unwrap();
        assert!(a.constraint_residual() < 1e-12 * a.constraint_scale());
        assert!(b.constraint_residual() < 1e-12 * b.constraint_scale());
        let diff = &a.second_sym - &b.second_sym;
        assert!(diff.iter().map(|z| z.norm()).fold(0.0, f64::max) > 1e-6);
        // the difference maps to zero under the constraint operator
        for i in 0..3 {
            let s: Complex64 = (0..3).map(|m| diff[(m, i)] * grad[m].conj()).sum();
            assert!(s.norm() < 1e-12);
        }
        // symmetric, not Hermitian
        assert!((a.second_sym[(0, 1)] - a.second_sym[(1, 0)]).norm() < 1e-15);
    }

    #[test]
    fn claim_at_diagonal_spectrum_without_second_derivatives() {
        let n = 4;
        let k = 2;
        let mu = 0.9;
        let lambda = Spectrum::new(vec![mu; n]).unwrap();
        let grad = vec![c(0.2, 0.1), c(-0.4, 0.0), c(0.0, 0.3), c(0.5, -0.5)];
        let cfg = CriticalPointConfig {
            lambda: lambda.clone(),
            grad: grad.clone(),
            u_value: -1.0,
            second_sym: DMatrix::zeros(n, n),
            a_exponent: gradient_exponent(n, k),
        };
        let g2: f64 = grad.iter().map(|z| z.norm_sqr()).sum();
        let cc = n as f64 / (2 * n - k) as f64;
        let want: f64 = (0..n)
            .map(|i| {
                sigma_k_deleted(lambda.values(), k - 1, &[i]).unwrap()
                    * mu
                    * mu
                    * (1.0 - cc * grad[i].norm_sqr() / g2)
            })
            .sum();
        assert_relative_eq!(critical_quantity(&cfg, k), want, epsilon = 1e-14);
        assert!(want > 0.0);
    }

    #[test]
    fn claim_invariant_under_gradient_rescaling() {
        let lambda = Spectrum::new(vec![1.2, 0.6, 0.1, -0.2]).unwrap();
        let grad = vec![c(0.3, 0.1), c(-0.2, 0.4), c(0.6, 0.0), c(0.1, -0.3)];
        let cfg = sample_critical_config(&lambda, 2, &grad, -0.8, 11).unwrap();
        let scaled = CriticalPointConfig {
            grad: grad.iter().map(|z| z * 3.0).collect(),
            u_value: cfg.u_value * 9.0,
            ..cfg.clone()
        };
        assert!(scaled.constraint_residual() < 1e-12 * scaled.constraint_scale());
        assert_relative_eq!(critical_quantity(&cfg, 2), critical_quantity(&scaled, 2), max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let lambda = Spectrum::new(vec![1.0, 1.0, 1.0]).unwrap();
        let grad = vec![c(1.0, 0.0); 3];
        assert!(sample_critical_config(&lambda, 2, &grad, 0.5, 0).is_err());
        assert!(matches!(
            sample_critical_config(&lambda, 2, &[c(0.0, 0.0); 3], -1.0, 0),
            Err(Error::Construction { rank: 0, .. })
        ));
        let outside = Spectrum::new(vec![1.0, -2.0, -2.0]).unwrap();
        assert!(matches!(
            sample_critical_config(&outside, 1, &grad, -1.0, 0),
            Err(Error::Cone { .. })
        ));
    }
}
