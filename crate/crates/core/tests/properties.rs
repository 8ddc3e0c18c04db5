use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

use khessian::barriers::ring_source_ceiling;
use khessian::estimates::fit_power;
use khessian::geometry::{normalize_scaling, reinhardt_hessian, RadialGrid};
use khessian::radial::{solve_radial, NewtonOptions, ProblemSpec};
use khessian::symmfunc::{cone_test, sigma_k, sigma_k_deleted, sk_of_hermitian, sk_of_symmetric};

fn brute_force_sigma(lambda: &[f64], k: usize) -> f64 {
    let n = lambda.len();
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| lambda[i]).product::<f64>())
        .sum()
}

fn spectrum(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0_f64, 2..=max_n)
}

/// A quadratic-plus-cubic polynomial `v(ρ)` in `n` variables with its
/// gradient and Hessian.
#[derive(Clone, Debug)]
struct Poly {
    lin: Vec<f64>,
    quad: DMatrix<f64>,
    cubic: Vec<f64>,
}

impl Poly {
    fn grad(&self, rho: &[f64]) -> Vec<f64> {
        let n = rho.len();
        (0..n)
            .map(|j| {
                self.lin[j]
                    + (0..n).map(|k| self.quad[(j, k)] * rho[k]).sum::<f64>()
                    + 3.0 * self.cubic[j] * rho[j] * rho[j]
            })
            .collect()
    }

    fn hess(&self, rho: &[f64]) -> DMatrix<f64> {
        let n = rho.len();
        DMatrix::from_fn(n, n, |j, k| {
            self.quad[(j, k)] + if j == k { 6.0 * self.cubic[j] * rho[j] } else { 0.0 }
        })
    }
}

fn poly_and_point() -> impl Strategy<Value = (Poly, Vec<f64>, Vec<f64>)> {
    (2usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0..2.0_f64, n),
            prop::collection::vec(-2.0..2.0_f64, n * n),
            prop::collection::vec(-1.0..1.0_f64, n),
            prop::collection::vec(0.01..3.0_f64, n),
            prop::collection::vec(0.0..std::f64::consts::TAU, n),
        )
            .prop_map(move |(lin, q, cubic, rho, phase)| {
                let raw = DMatrix::from_vec(n, n, q);
                let quad = (&raw + raw.transpose()) * 0.5;
                (Poly { lin, quad, cubic }, rho, phase)
            })
    })
}

/// `∂²u/∂z_j∂z̄_k` for `u(z) = v(|z_1|^2, ..., |z_n|^2)`:
/// `v_j δ_jk + conj(z_j) z_k v_jk`.
fn full_complex_hessian(poly: &Poly, rho: &[f64], phase: &[f64]) -> DMatrix<Complex64> {
    let n = rho.len();
    let z: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar(rho[j].sqrt(), phase[j])).collect();
    let g = poly.grad(rho);
    let h = poly.hess(rho);
    DMatrix::from_fn(n, n, |j, k| {
        let diag = if j == k { g[j] } else { 0.0 };
        Complex64::new(diag, 0.0) + z[j].conj() * z[k] * h[(j, k)]
    })
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn phase_reduction_preserves_the_spectrum((poly, rho, phase) in poly_and_point()) {
        let n = rho.len();
        let reduced = reinhardt_hessian(&rho, &poly.grad(&rho), &poly.hess(&rho));
        let full = full_complex_hessian(&poly, &rho, &phase);
        let oracle = sorted(SymmetricEigen::new(full.clone()).eigenvalues.iter().copied().collect());
        let real = sorted(SymmetricEigen::new(reduced.clone()).eigenvalues.iter().copied().collect());
        let scale = oracle.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in oracle.iter().zip(&real) {
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{oracle:?} vs {real:?}");
        }
        for k in 1..=n {
            let (via_full, _) = sk_of_hermitian(&full, k).unwrap();
            let (via_reduced, _) = sk_of_symmetric(&reduced, k).unwrap();
            prop_assert!((via_full - via_reduced).abs() <= 1e-9 * scale.powi(k as i32));
        }
    }

    #[test]
    fn sigma_matches_subset_enumeration(lambda in spectrum(7), k in 0usize..=7) {
        prop_assume!(k <= lambda.len());
        let fast = sigma_k(&lambda, k).unwrap();
        let slow = brute_force_sigma(&lambda, k);
        prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1.0));
    }

    #[test]
    fn sigma_is_symmetric_and_homogeneous(lambda in spectrum(6), c in 0.1..4.0_f64, seed in 0usize..720) {
        let n = lambda.len();
        for k in 1..=n {
            let base = sigma_k(&lambda, k).unwrap();
            let mut perm = lambda.clone();
            perm.rotate_left(seed % n);
            perm.swap(0, seed % n);
            let permuted = sigma_k(&perm, k).unwrap();
            let scaled = sigma_k(&lambda.iter().map(|v| c * v).collect::<Vec<_>>(), k).unwrap();
            let tol = 1e-10 * 3.0_f64.powi(k as i32) * (1u64 << n) as f64;
            prop_assert!((base - permuted).abs() <= tol);
            prop_assert!((scaled - c.powi(k as i32) * base).abs() <= tol * c.powi(k as i32));
        }
    }

    #[test]
    fn deletion_splits_sigma(lambda in spectrum(6), i in 0usize..6) {
        let n = lambda.len();
        prop_assume!(i < n);
        for k in 1..=n {
            let whole = sigma_k(&lambda, k).unwrap();
            let rest = if k < n { sigma_k_deleted(&lambda, k, &[i]).unwrap() } else { 0.0 };
            let split = rest
                + lambda[i] * sigma_k_deleted(&lambda, k - 1, &[i]).unwrap();
            prop_assert!((whole - split).abs() <= 1e-10 * 3.0_f64.powi(k as i32) * (1u64 << n) as f64);
        }
    }

    #[test]
    fn cone_is_stable_under_positive_shifts(lambda in spectrum(6), k in 1usize..6, c in 0.0..2.0_f64) {
        prop_assume!(k <= lambda.len());
        if cone_test(&lambda, k, 0.0).inside_open {
            let shifted: Vec<f64> = lambda.iter().map(|v| v + c).collect();
            prop_assert!(cone_test(&shifted, k, 0.0).inside_open);
        }
        let positive: Vec<f64> = lambda.iter().map(|v| v.abs() + 1e-3).collect();
        prop_assert!(cone_test(&positive, k, 0.0).inside_open);
    }

    #[test]
    fn fit_recovers_power_laws(exponent in -6.0..-0.5_f64, scale in 0.1..10.0_f64) {
        let x: Vec<f64> = (0..20).map(|i| 2.0 * 1.1_f64.powi(i)).collect();
        let y: Vec<f64> = x.iter().map(|v| scale * v.powf(exponent)).collect();
        let fit = fit_power(&x, &y, exponent).unwrap();
        prop_assert!(fit.relative_error() < 1e-10);
    }

    #[test]
    fn scaling_normalization_orders_the_radii(r0 in 0.1..5.0_f64, gap in 0.01..5.0_f64, gap2 in 0.01..5.0_f64) {
        let (t, s) = normalize_scaling(r0, r0 + gap, r0 + gap + gap2).unwrap();
        prop_assert!(0.0 < t && t < 1.0 && s > 0.0);
        prop_assert!(normalize_scaling(r0 + gap, r0, r0 + gap + gap2).is_err());
    }

    #[test]
    fn refinement_keeps_endpoints_and_doubles_intervals(lo in 0.01..1.0_f64, ratio in 1.5..100.0_f64, nodes in 16usize..200) {
        let g = RadialGrid::geometric(lo, lo * ratio, nodes).unwrap();
        let f = g.refine();
        prop_assert_eq!(f.len() - 1, 2 * (g.len() - 1));
        prop_assert_eq!(f.nodes()[0], g.nodes()[0]);
        prop_assert_eq!(f.nodes()[f.len() - 1], g.nodes()[g.len() - 1]);
        prop_assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ring_solutions_order_with_their_sources(
        nk in prop::sample::select(vec![(2usize, 1usize), (3, 1), (3, 2)]),
        small in 0.05..0.3_f64,
        factor in 1.1..3.0_f64,
    ) {
        let (n, k) = nk;
        let opts = NewtonOptions::default();
        let ceiling = ring_source_ceiling(n, k, 1.0, 4.0);
        let lo = solve_radial(&ProblemSpec::ring(n, k, 1.0, 2.0, small * ceiling).unwrap(), 201, &opts).unwrap();
        let hi = solve_radial(&ProblemSpec::ring(n, k, 1.0, 2.0, small * factor * ceiling).unwrap(), 201, &opts).unwrap();
        for i in 0..lo.len() {
            prop_assert!(hi.g[i] <= lo.g[i] + 1e-12);
        }
    }
}
