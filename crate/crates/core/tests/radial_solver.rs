use std::sync::Arc;

use khessian::barriers::{
    assemble_subsolution, lower_envelope, radial_sigma, ring_source_ceiling, ring_subsolution_jet,
    upper_envelope, w_eps_jet, ApproximationParams, HarmonicMajorant, RadialJet,
};
use khessian::geometry::InnerDomain;
use khessian::radial::{
    limit_sequence, solve_radial, solve_radial_on, InitialGuess, LimitStudy, NewtonOptions,
    ProblemSpec, RadialSolution, Source,
};

fn params(n: usize, k: usize, eps: f64) -> ApproximationParams {
    ApproximationParams::new(n, k, 0.5_f64.sqrt(), 1.5, 0.25, eps).unwrap()
}

/// `w^ε + c|z|^2`: the shift adds `c` to every eigenvalue, so it stays in the cone.
fn shifted_profile(p: &ApproximationParams, c: f64) -> impl Fn(f64) -> RadialJet + Clone {
    let p = p.clone();
    move |s| {
        let j = w_eps_jet(s, &p);
        RadialJet {
            value: j.value + c * s,
            d1: j.d1 + c,
            d2: j.d2,
        }
    }
}

fn sup_error(sol: &RadialSolution, exact: impl Fn(f64) -> RadialJet) -> f64 {
    sol.grid
        .iter()
        .zip(&sol.g)
        .map(|(&s, &g)| (g - exact(s).value).abs())
        .fold(0.0, f64::max)
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    for (n, k) in [(2, 1), (3, 1), (3, 2), (4, 3)] {
        let p = params(n, k, 0.1);
        let exact = shifted_profile(&p, 0.02);
        let src = exact.clone();
        let source = Source::Custom(Arc::new(move |s| {
            let j = src(s);
            radial_sigma(n, k, j.d1, j.d1 + s * j.d2)
        }));
        let mut spec = ProblemSpec::exterior(&p, 8.0).unwrap().with_source(source);
        spec.inner_bc = exact(spec.inner_sq()).value;
        spec.outer_bc = exact(spec.outer_sq()).value;
        let errors: Vec<f64> = [201, 401, 801]
            .iter()
            .map(|&m| sup_error(&solve_radial(&spec, m, &NewtonOptions::default()).unwrap(), &exact))
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..2.3).contains(&order), "({n},{k}) errors {errors:?}");
        }
    }
}

#[test]
fn exterior_solution_lies_between_subsolution_and_upper_envelope() {
    for (n, k) in [(2, 1), (3, 1), (3, 2)] {
        let p = params(n, k, 0.1);
        let spec = ProblemSpec::exterior(&p, 8.0).unwrap();
        let sol = solve_radial(&spec, 801, &NewtonOptions::default()).unwrap();
        let sub = assemble_subsolution(&p, &InnerDomain::ball(n, p.t)).unwrap();
        let slack = 5.0 * sol.log_spacing * sol.log_spacing;
        for (&s, &g) in sol.grid.iter().zip(&sol.g) {
            assert!(g >= sub.eval_radial(s).value - slack, "({n},{k}) below u_ at {s}");
            assert!(g >= lower_envelope(s, &p) - slack);
            assert!(g <= upper_envelope(s, p.t, &p) + slack, "({n},{k}) above envelope at {s}");
        }
        assert!(sol.cone_margin_min > 0.0);
    }
}

#[test]
fn ring_solution_lies_between_quadratic_and_harmonic_majorant() {
    let (r_in, r_out) = (1.0_f64, 2.0_f64);
    for (n, k) in [(2, 1), (3, 1), (3, 2), (4, 2)] {
        let ceiling = ring_source_ceiling(n, k, r_in * r_in, r_out * r_out);
        let spec = ProblemSpec::ring(n, k, r_in, r_out, 0.5 * ceiling).unwrap();
        let sol = solve_radial(&spec, 401, &NewtonOptions::default()).unwrap();
        let h = HarmonicMajorant::new(r_in, r_out, 0.0, 1.0, n).unwrap();
        for (&s, &g) in sol.grid.iter().zip(&sol.g) {
            let below = ring_subsolution_jet(s, r_in * r_in, r_out * r_out).value;
            assert!(g >= below - 1e-10, "({n},{k}) below the quadratic at {s}");
            assert!(g <= h.value(s.sqrt()) + 1e-10, "({n},{k}) above the majorant at {s}");
        }
    }
}

#[test]
fn initial_guesses_reach_the_same_solution() {
    for (n, k) in [(2, 1), (3, 2)] {
        let p = params(n, k, 0.2);
        let spec = ProblemSpec::exterior(&p, 4.0).unwrap();
        let grid = spec.grid(401).unwrap();
        let opts = NewtonOptions::default();
        let a = solve_radial_on(&spec, &grid, &opts, &InitialGuess::Quadrature).unwrap();
        let c = solve_radial_on(&spec, &grid, &opts, &InitialGuess::Values(a.g.clone())).unwrap();
        for i in 0..a.len() {
            assert!((a.g[i] - c.g[i]).abs() < 1e-12);
        }
        // the subsolution start stalls far from the solution when k >= 2
        if k == 1 {
            let b = solve_radial_on(&spec, &grid, &opts, &InitialGuess::Subsolution).unwrap();
            for i in 0..a.len() {
                assert!((a.g[i] - b.g[i]).abs() < 1e-9, "({n},{k}) node {i}");
            }
        }
    }
}

#[test]
fn cauchy_differences_shrink_with_r_doubling() {
    let study = LimitStudy::new(params(2, 1, 0.1), vec![0.1], vec![4.0, 8.0, 16.0, 32.0]);
    let report = limit_sequence(&study).unwrap();
    assert!(report.monotone());
    let ratios: Vec<f64> = report.cauchy.iter().filter_map(|c| c.ratio).collect();
    assert_eq!(ratios.len(), 2);
    for r in ratios {
        assert!(r >= 2.0, "Cauchy ratio {r}");
    }
}

#[test]
fn larger_source_gives_smaller_ring_solution() {
    let mut prev: Option<RadialSolution> = None;
    for eps in [0.05, 0.1, 0.2] {
        let spec = ProblemSpec::ring(3, 2, 1.0, 2.0, eps).unwrap();
        let sol = solve_radial(&spec, 201, &NewtonOptions::default()).unwrap();
        if let Some(p) = &prev {
            for i in 0..sol.len() {
                assert!(sol.g[i] <= p.g[i] + 1e-12);
            }
        }
        prev = Some(sol);
    }
}

#[test]
fn invalid_problems_are_rejected() {
    let p = params(2, 1, 0.1);
    assert!(ProblemSpec::exterior(&p, 2.0).is_err(), "R must exceed 1 + s");
    assert!(ProblemSpec::ring(2, 2, 1.0, 2.0, 0.1).is_err(), "k < n");
    assert!(ProblemSpec::ring(2, 1, 1.0, 2.0, -0.1).is_err());
    assert!(ProblemSpec::ring(2, 1, 2.0, 1.0, 0.1).is_err());
}
