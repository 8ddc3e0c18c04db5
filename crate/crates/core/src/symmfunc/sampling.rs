//! Seeded random spectra in `Γ_k` and on its boundary.

use rand::Rng;

use super::{cone_test, elementary_symmetric};

/// Uniform draw from `[-1, 2]^n` conditioned on lying in the open cone.
/// Rejection keeps plenty of mass close to the boundary.
pub fn sample_open_cone<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<f64> {
    loop {
        let lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
        if cone_test(&lambda, k, 0.0).inside_open {
            return lambda;
        }
    }
}

fn min_margin(lambda: &[f64], k: usize) -> f64 {
    elementary_symmetric(lambda, k)[1..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// A point of `∂Γ_k`: an open-cone sample shifted along `-(1,...,1)` until the
/// smallest of `S_1..S_k` vanishes. The result lies in the closed cone.
pub fn sample_cone_boundary<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<f64> {
    let base = sample_open_cone(rng, n, k);
    let shifted = |tau: f64| base.iter().map(|v| v - tau).collect::<Vec<f64>>();
    // S_1 turns negative once tau exceeds the mean, so the root is bracketed
    let mut lo = 0.0;
    let mut hi = base.iter().sum::<f64>() / n as f64 + 1e-12;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if min_margin(&shifted(mid), k) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.abs().max(1.0) {
            break;
        }
    }
    shifted(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundary_samples_sit_on_the_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=6 {
            for k in 1..=n {
                let lambda = sample_cone_boundary(&mut rng, n, k);
                let cone = cone_test(&lambda, k, 1e-12);
                assert!(cone.inside_closed, "n={n} k={k} {:?}", cone.margins);
                assert!(cone.min_margin().abs() < 1e-10, "n={n} k={k}");
            }
        }
    }
}
