//! Signed margins for the cone inequalities. A margin is `lhs - rhs` of an
//! inequality that should read `lhs >= rhs`; callers decide the tolerance.

use rand::Rng;

use super::{cone_test, deleted_sigmas, sigma_k, sigma_k_deleted, Spectrum};
use crate::error::{Error, Result};

/// A signed margin together with the magnitude of the terms it was formed from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margin {
    pub value: f64,
    pub scale: f64,
}

impl Margin {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.value >= -rel_tol * self.scale.max(f64::MIN_POSITIVE)
    }

    fn min(self, other: Margin) -> Margin {
        if other.value < self.value {
            Margin {
                value: other.value,
                scale: self.scale.max(other.scale),
            }
        } else {
            Margin {
                value: self.value,
                scale: self.scale.max(other.scale),
            }
        }
    }
}

/// Margins of the two Newton–MacLaurin type inequalities on deleted spectra.
/// Part (a) needs `n - k - 1 >= 1`; for `k >= n - 1` it is `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeletedRatioMargins {
    pub a: Option<Margin>,
    pub b: Margin,
}

fn require_open(lambda: &[f64], k: usize) -> Result<()> {
    let cone = cone_test(lambda, k, 0.0);
    if cone.inside_open {
        Ok(())
    } else {
        Err(Error::Cone {
            k,
            margins: cone.margins,
        })
    }
}

fn require_closed(lambda: &[f64], k: usize) -> Result<()> {
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

fn check_order(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        Err(Error::Domain(format!("order k = {k} must lie in 1..={n}")))
    } else {
        Ok(())
    }
}

/// For each deleted index `i`:
/// (a) `S_k(λ|i)^2 / S_{k-1}(λ|i) >= ((k+1)/k)((n-k)/(n-k-1)) S_{k+1}(λ|i)`,
/// (b) `S_k(λ|i) / S_{k-1}(λ|i) <= (1/k)((n-k)/(n-1)) S_1(λ|i)`.
/// Both are minimized over `i`.
pub fn check_deleted_ratios(lambda: &Spectrum, k: usize) -> Result<DeletedRatioMargins> {
    let l = lambda.values();
    let n = l.len();
    check_order(n, k)?;
    if n < 2 {
        return Err(Error::Domain("deleted spectra need n >= 2".into()));
    }
    require_open(l, k)?;
    let mag = lambda.magnitude();
    let (kf, nf) = (k as f64, n as f64);
    let mut a: Option<Margin> = None;
    let mut b: Option<Margin> = None;
    for i in 0..n {
        let skm1 = sigma_k_deleted(l, k - 1, &[i])?;
        let sk = if k < n { sigma_k_deleted(l, k, &[i])? } else { 0.0 };
        if k + 2 <= n {
            let skp1 = if k + 1 < n {
                sigma_k_deleted(l, k + 1, &[i])?
            } else {
                0.0
            };
            let coef = (kf + 1.0) / kf * (nf - kf) / (nf - kf - 1.0);
            let m = Margin {
                value: sk * sk / skm1 - coef * skp1,
                scale: mag.powi(k as i32 + 1),
            };
            a = Some(a.map_or(m, |x| x.min(m)));
        }
        let s1 = sigma_k_deleted(l, 1, &[i])?;
        let m = Margin {
            value: (nf - kf) / (kf * (nf - 1.0)) * s1 - sk / skm1,
            scale: mag,
        };
        b = Some(b.map_or(m, |x| x.min(m)));
    }
    Ok(DeletedRatioMargins {
        a,
        b: b.expect("n >= 2 gives at least one index"),
    })
}

/// `λ_1 S_{k-1}(λ|i) - (k/n) S_k(λ)` for a single index.
pub fn check_single_index(lambda: &Spectrum, k: usize, i: usize) -> Result<Margin> {
    let l = lambda.values();
    let n = l.len();
    check_order(n, k)?;
    if i >= n {
        return Err(Error::Domain(format!("index {i} out of range for n = {n}")));
    }
    require_closed(l, k)?;
    let value = l[0] * sigma_k_deleted(l, k - 1, &[i])? - k as f64 / n as f64 * sigma_k(l, k)?;
    Ok(Margin {
        value,
        scale: lambda.magnitude().powi(k as i32),
    })
}

/// Smallest [`check_single_index`] margin over all indices.
pub fn check_single_index_all(lambda: &Spectrum, k: usize) -> Result<Margin> {
    let mut best = check_single_index(lambda, k, 0)?;
    for i in 1..lambda.len() {
        best = best.min(check_single_index(lambda, k, i)?);
    }
    Ok(best)
}

/// Minimum over `num_points` equispaced `t` of
/// `S_k^{1/k}(tλ_a + (1-t)λ_b) - [t S_k^{1/k}(λ_a) + (1-t) S_k^{1/k}(λ_b)]`.
pub fn check_concavity_segment(
    lambda_a: &Spectrum,
    lambda_b: &Spectrum,
    k: usize,
    num_points: usize,
) -> Result<Margin> {
    let (a, b) = (lambda_a.values(), lambda_b.values());
    if a.len() != b.len() {
        return Err(Error::Domain("spectra have different lengths".into()));
    }
    if num_points < 2 {
        return Err(Error::Domain("need at least two sample points".into()));
    }
    check_order(a.len(), k)?;
    require_open(a, k)?;
    require_open(b, k)?;
    let root = |l: &[f64]| -> Result<f64> { Ok(sigma_k(l, k)?.max(0.0).powf(1.0 / k as f64)) };
    let (ra, rb) = (root(a)?, root(b)?);
    let scale = lambda_a.magnitude().max(lambda_b.magnitude());
    let mut best = f64::INFINITY;
    for p in 0..num_points {
        let t = p as f64 / (num_points - 1) as f64;
        // both inputs share the same sorted-descending convention
        let mix: Vec<f64> = a.iter().zip(b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        best = best.min(root(&mix)? - (t * ra + (1.0 - t) * rb));
    }
    Ok(Margin { value: best, scale })
}

/// `S_{k-1}(λ|k) / (λ_1 S_{k-2}(λ|1k))` for a sorted spectrum; `None` when the
/// denominator vanishes.
pub fn theta_ratio(lambda: &Spectrum, k: usize) -> Result<Option<f64>> {
    let l = lambda.values();
    let n = l.len();
    if k < 2 || k > n {
        return Err(Error::Domain(format!("order k = {k} must lie in 2..={n}")));
    }
    require_closed(l, k)?;
    let num = sigma_k_deleted(l, k - 1, &[k - 1])?;
    let den = if k == 2 {
        l[0]
    } else {
        l[0] * sigma_k_deleted(l, k - 2, &[0, k - 1])?
    };
    let tiny = 1e-13 * lambda.magnitude().powi(k as i32 - 1);
    Ok(if den > tiny { Some(num / den) } else { None })
}

/// Numerical infimum of [`theta_ratio`] over `samples` random points of the
/// closed cone (half open-cone draws, half boundary draws).
pub fn estimate_theta<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    k: usize,
    samples: usize,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    for j in 0..samples {
        let raw = if j % 2 == 0 {
            super::sample_open_cone(rng, n, k)
        } else {
            super::sample_cone_boundary(rng, n, k)
        };
        if let Some(r) = theta_ratio(&Spectrum::new(raw)?, k)? {
            best = best.min(r);
        }
    }
    Ok(best)
}

/// `Σ_i S_{k-1}(λ|i)`; equals `(n-k+1) S_{k-1}(λ)`.
pub fn deleted_trace(lambda: &[f64], k: usize) -> f64 {
    deleted_sigmas(lambda, k - 1).iter().sum()
}

#[cfg(test)]
mod tests {
    use super::super::binomial;
    use super::*;
    use approx::assert_relative_eq;

    fn ones(n: usize) -> Spectrum {
        Spectrum::new(vec![1.0; n]).unwrap()
    }

    #[test]
    fn deleted_ratios_at_equal_entries() {
        for n in 3..=6 {
            for k in 1..n {
                let m = check_deleted_ratios(&ones(n), k).unwrap();
                assert!(m.b.value.abs() < 1e-12, "n={n} k={k}");
                if k + 2 <= n {
                    let (nn, kk) = (n - 1, k);
                    let want = binomial(nn, kk).powi(2) / binomial(nn, kk - 1)
                        - (kk as f64 + 1.0) / kk as f64 * (n - k) as f64 / (n - k - 1) as f64
                            * binomial(nn, kk + 1);
                    assert_relative_eq!(m.a.unwrap().value, want, epsilon = 1e-10);
                } else {
                    assert!(m.a.is_none());
                }
            }
        }
        assert!(check_deleted_ratios(&Spectrum::new(vec![1.0, -2.0, 0.1]).unwrap(), 2).is_err());
    }

    #[test]
    fn single_index_examples() {
        for n in 2..=5 {
            for k in 1..=n {
                for i in 0..n {
                    assert!(check_single_index(&ones(n), k, i).unwrap().value.abs() < 1e-12);
                }
            }
        }
        let mut e = vec![0.0; 4];
        e[0] = 1.0;
        let m = check_single_index(&Spectrum::new(e).unwrap(), 1, 0).unwrap();
        assert_relative_eq!(m.value, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn concavity_degenerate_segments() {
        let a = Spectrum::new(vec![2.0, 1.0, 0.5]).unwrap();
        let b = Spectrum::new(vec![6.0, 3.0, 1.5]).unwrap();
        for k in 1..=3 {
            assert!(check_concavity_segment(&a, &a, k, 11).unwrap().value.abs() < 1e-14);
            assert!(check_concavity_segment(&a, &b, k, 11).unwrap().value.abs() < 1e-13);
        }
    }

    #[test]
    fn deleted_trace_identity() {
        let l = [1.5, 0.7, -0.2, 0.4];
        for k in 1..=4 {
            let want = (4 - k + 1) as f64 * sigma_k(&l, k - 1).unwrap();
            assert_relative_eq!(deleted_trace(&l, k), want, epsilon = 1e-13);
        }
    }

    #[test]
    fn theta_ratio_at_equal_entries() {
        // S_{k-1} of n-1 ones over S_{k-2} of n-2 ones
        for n in 3..=6 {
            for k in 2..=n {
                let r = theta_ratio(&ones(n), k).unwrap().unwrap();
                assert_relative_eq!(r, binomial(n - 1, k - 1) / binomial(n - 2, k - 2), epsilon = 1e-12);
            }
        }
    }
}
