//! Seeded Monte-Carlo sweeps over the cone inequalities and the critical-point
//! claim. Each property keeps a tally of violations beyond a relative
//! tolerance and its worst scaled margin.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    binomial, check_concavity_segment, check_deleted_ratios, check_single_index_all, critical_quantity, critical_quantity_scale,
    hessian_derivative, sample_cone_boundary, sample_critical_config, sample_open_cone, sigma_k,
    Spectrum,
};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyTally {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    /// Smallest `margin / scale` seen; negative values are violations when
    /// they fall below `-tolerance`.
    pub worst: f64,
}

impl PropertyTally {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            samples: 0,
            violations: 0,
            worst: f64::INFINITY,
        }
    }

    fn record(&mut self, value: f64, scale: f64, tol: f64) {
        let rel = value / scale.max(f64::MIN_POSITIVE);
        self.samples += 1;
        self.worst = self.worst.min(rel);
        if !(rel >= -tol) {
            self.violations += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Draws per property, spread round-robin over the `(n, k)` pairs.
    pub samples: usize,
    pub max_dim: usize,
    /// Largest `n` for the critical-point claim.
    pub claim_max_dim: usize,
    pub tolerance: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            samples: 10_000,
            max_dim: 6,
            claim_max_dim: 4,
            tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub tallies: Vec<PropertyTally>,
    /// Largest `|margin|` of the single-index inequality at `λ = (1, ..., 1)`
    /// over all `(n, k)`.
    pub equality_defect: f64,
}

impl SuiteReport {
    pub fn violations(&self) -> usize {
        self.tallies.iter().map(|t| t.violations).sum()
    }
}

fn pairs(min_n: usize, max_n: usize, strict: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for n in min_n..=max_n {
        let top = if strict { n - 1 } else { n };
        for k in 1..=top {
            out.push((n, k));
        }
    }
    out
}

/// `Q diag(λ) Q^*` with `Q` from the QR factorization of a random complex matrix.
fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, lambda: &[f64]) -> DMatrix<Complex64> {
    let n = lambda.len();
    let m = DMatrix::<Complex64>::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let q = m.qr().q();
    let d = DMatrix::<Complex64>::from_diagonal(
        &nalgebra::DVector::from_iterator(n, lambda.iter().map(|&l| Complex64::new(l, 0.0))),
    );
    let a = &q * d * q.adjoint();
    // symmetrize away rounding so the Hermitian check sees an exact match
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tol = cfg.tolerance;

    let mut deleted_a = PropertyTally::new("deleted_ratio_lower");
    let mut deleted_b = PropertyTally::new("deleted_ratio_upper");
    let mut single = PropertyTally::new("single_index_sharp");
    let mut concave = PropertyTally::new("root_concavity");
    let mut trace = PropertyTally::new("derivative_trace");
    let mut contraction = PropertyTally::new("derivative_contraction");
    let mut claim = PropertyTally::new("critical_point_claim");

    let all = pairs(2, cfg.max_dim, false);
    let with_a = pairs(3, cfg.max_dim, true)
        .into_iter()
        .filter(|&(n, k)| k + 2 <= n)
        .collect::<Vec<_>>();
    for j in 0..cfg.samples {
        let (n, k) = all[j % all.len()];
        let lambda = Spectrum::new(sample_open_cone(&mut rng, n, k))?;
        deleted_b.record(check_deleted_ratios(&lambda, k)?.b.value, lambda.magnitude(), tol);

        let (n, k) = with_a[j % with_a.len()];
        let lambda = Spectrum::new(sample_open_cone(&mut rng, n, k))?;
        let m = check_deleted_ratios(&lambda, k)?.a.expect("k + 2 <= n");
        deleted_a.record(m.value, m.scale, tol);

        let (n, k) = all[j % all.len()];
        let raw = if j % 2 == 0 {
            sample_open_cone(&mut rng, n, k)
        } else {
            sample_cone_boundary(&mut rng, n, k)
        };
        let lambda = Spectrum::new(raw)?;
        let m = check_single_index_all(&lambda, k)?;
        single.record(m.value, m.scale, tol);

        let a = Spectrum::new(sample_open_cone(&mut rng, n, k))?;
        let b = Spectrum::new(sample_open_cone(&mut rng, n, k))?;
        let m = check_concavity_segment(&a, &b, k, 11)?;
        concave.record(m.value, m.scale, tol);

        let lambda = sample_open_cone(&mut rng, n, k);
        let mat = random_hermitian(&mut rng, &lambda);
        let d = hessian_derivative(&mat, k)?;
        let mag = d.spectrum.magnitude();
        let expected = (n - k + 1) as f64 * sigma_k(d.spectrum.values(), k - 1)?;
        let scale = mag.powi(k as i32 - 1).max(1.0) * binomial(n, k - 1);
        trace.record(-(d.trace_f - expected).abs(), scale, tol);
        let contracted: Complex64 = (d.f_matrix.transpose().component_mul(&mat)).sum();
        let expected = k as f64 * sigma_k(d.spectrum.values(), k)?;
        let scale = mag.powi(k as i32).max(1.0) * binomial(n, k) * k as f64;
        contraction.record(-(contracted.re - expected).abs() - contracted.im.abs(), scale, tol);
    }

    let claim_pairs = pairs(2, cfg.claim_max_dim, true);
    for j in 0..cfg.samples {
        let (n, k) = claim_pairs[j % claim_pairs.len()];
        let lambda = Spectrum::new(sample_open_cone(&mut rng, n, k))?;
        let grad: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let u_value = -rng.gen_range(0.05..2.0);
        let config = sample_critical_config(&lambda, k, &grad, u_value, rng.gen())?;
        if config.constraint_residual() > 1e-9 * config.constraint_scale() {
            claim.samples += 1;
            claim.violations += 1;
            continue;
        }
        claim.record(critical_quantity(&config, k), critical_quantity_scale(&config, k), tol);
    }

    let mut equality_defect = 0.0_f64;
    for (n, k) in pairs(2, cfg.max_dim, false) {
        let m = check_single_index_all(&Spectrum::new(vec![1.0; n])?, k)?;
        equality_defect = equality_defect.max(m.value.abs());
    }

    Ok(SuiteReport {
        tallies: vec![deleted_a, deleted_b, single, concave, trace, contraction, claim],
        equality_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_is_clean_and_reproducible() {
        let cfg = SuiteConfig {
            samples: 300,
            ..SuiteConfig::default()
        };
        let a = run_suite(&cfg).unwrap();
        assert_eq!(a.violations(), 0, "{:?}", a.tallies);
        assert!(a.equality_defect < 1e-12);
        assert_eq!(a, run_suite(&cfg).unwrap());
    }

    #[test]
    fn random_hermitian_has_requested_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lambda = [2.0, 0.5, -0.25];
        let a = random_hermitian(&mut rng, &lambda);
        let (mut vals, _) = super::super::hermitian_eigen(&a).unwrap();
        vals.sort_by(|x, y| y.total_cmp(x));
        for (v, l) in vals.iter().zip(lambda) {
            assert!((v - l).abs() < 1e-12, "{vals:?}");
        }
    }
}
