use khessian::barriers::{w_eps, ApproximationParams};
use khessian::estimates::sandwich_nodes;
use khessian::export::reinhardt_csv;
use khessian::geometry::{InnerDomain, NodeClass};
use khessian::radial::{solve_radial, NewtonOptions, ProblemSpec};
use khessian::reinhardt::{
    axis_limit_audit, residual_field, solve_reinhardt, ReinhardtField, ReinhardtProblem,
};

fn opts() -> NewtonOptions {
    NewtonOptions {
        rel_tol: 1e-12,
        ..NewtonOptions::default()
    }
}

fn ball_problem(per_axis: usize) -> (ApproximationParams, ReinhardtProblem) {
    let p = ApproximationParams::new(2, 1, 0.75_f64.sqrt(), 0.5, 0.03, 0.02).unwrap();
    let problem = ReinhardtProblem::exterior(&p, InnerDomain::ball(2, p.t), 2.0, per_axis).unwrap();
    (p, problem)
}

fn norm_sq(problem: &ReinhardtProblem, p: usize) -> f64 {
    problem.grid.rho(p).iter().sum()
}

#[test]
fn spherical_solve_matches_radial_at_second_order() {
    let (p, _) = ball_problem(33);
    let radial = solve_radial(&ProblemSpec::exterior(&p, 2.0).unwrap(), 8001, &NewtonOptions::default()).unwrap();
    let errors: Vec<f64> = [17, 33, 65]
        .iter()
        .map(|&m| {
            let (_, problem) = ball_problem(m);
            let field = solve_reinhardt(&problem, &opts()).unwrap();
            (0..field.len())
                .filter(|&q| problem.grid.class(q) != NodeClass::Exterior)
                .map(|q| (field.values[q] - radial.interpolate(norm_sq(&problem, q)).unwrap()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.6, "errors {errors:?}");
    }
}

#[test]
fn boundary_nodes_hold_the_subsolution_exactly() {
    let (_, problem) = ball_problem(33);
    let field = solve_reinhardt(&problem, &opts()).unwrap();
    let sub = problem.subsolution.as_ref().unwrap();
    let mut seen = 0;
    for q in 0..field.len() {
        if problem.grid.class(q).is_boundary() {
            assert_eq!(field.values[q], sub.value_rho(&problem.grid.rho(q)));
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn ellipse_solve_converges_inside_the_envelopes() {
    let inner = InnerDomain::ellipsoid(vec![1.0, 2.0], 0.6).unwrap();
    let p = ApproximationParams::new(2, 1, inner.inscribed_radius(), 0.5, 0.03, 0.02).unwrap();
    let problem = ReinhardtProblem::exterior(&p, inner, 2.0, 65).unwrap();
    let field = solve_reinhardt(&problem, &opts()).unwrap();
    assert!(field.residual_norm <= 1e-8, "residual {}", field.residual_norm);
    assert!(field.cone_margin_min > 0.0);
    let live: Vec<usize> = (0..field.len())
        .filter(|&q| problem.grid.class(q) != NodeClass::Exterior)
        .collect();
    let s: Vec<f64> = live.iter().map(|&q| norm_sq(&problem, q)).collect();
    let v: Vec<f64> = live.iter().map(|&q| field.values[q]).collect();
    let h = problem.grid.spacing;
    for check in sandwich_nodes(&s, &v, p.t, &p, 5.0 * h * h) {
        assert!(!check.status.is_failure(), "{check:?}");
    }
}

/// `|z|^2` where the linear part of the glued subsolution hands over to `w^ε`.
fn glue_point(p: &ApproximationParams, problem: &ReinhardtProblem) -> f64 {
    let sub = problem.subsolution.as_ref().unwrap();
    let on_w = |s: f64| (sub.value_rho(&[0.0, s]) - w_eps(s, p)).abs() < 1e-13;
    let (mut lo, mut hi) = (p.t * p.t, sub.switch_sq);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if on_w(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn subsolution_restriction_is_a_discrete_subsolution_away_from_the_glue() {
    for m in [33, 65, 129] {
        let (p, problem) = ball_problem(m);
        let sub = problem.subsolution.as_ref().unwrap();
        let glue = glue_point(&p, &problem);
        let h = problem.grid.spacing;
        let residual = residual_field(&problem, &problem.boundary_extension()).unwrap();
        let mut audited = 0;
        for (q, r) in residual.iter().enumerate() {
            if !r.is_finite() || !problem.grid.class(q).is_unknown() {
                continue;
            }
            let rho = problem.grid.rho(q);
            // the continuous subsolution property holds everywhere
            assert!(sub.sk_margin(&rho).unwrap() >= -1e-12);
            // stencils reach at most 2h along each axis
            if (rho.iter().sum::<f64>() - glue).abs() > 4.0 * h {
                assert!(*r >= -5.0 * h * h, "{m}: residual {r} at {rho:?}");
                audited += 1;
            }
        }
        assert!(audited > 0);
    }
}

#[test]
fn three_dimensional_solves_match_radial() {
    for k in [1, 2] {
        let p = ApproximationParams::new(3, k, 0.9, 0.5, 0.03, 0.02).unwrap();
        let problem = ReinhardtProblem::exterior(&p, InnerDomain::ball(3, p.t), 2.0, 13).unwrap();
        let field = solve_reinhardt(&problem, &opts()).unwrap();
        let radial = solve_radial(&ProblemSpec::exterior(&p, 2.0).unwrap(), 4001, &NewtonOptions::default()).unwrap();
        let err = (0..field.len())
            .filter(|&q| problem.grid.class(q) != NodeClass::Exterior)
            .map(|q| (field.values[q] - radial.interpolate(norm_sq(&problem, q)).unwrap()).abs())
            .fold(0.0, f64::max);
        let h = problem.grid.spacing;
        assert!(err <= 5.0 * h * h, "k={k}: error {err}");
        assert!(field.cone_margin_min > 0.0);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let solve = |threads: usize| -> ReinhardtField {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let (_, problem) = ball_problem(33);
            solve_reinhardt(&problem, &opts()).unwrap()
        })
    };
    let a = solve(1);
    let b = solve(4);
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
    }
    assert_eq!(reinhardt_csv(&a, &[]).unwrap(), reinhardt_csv(&b, &[]).unwrap());
}

#[test]
fn axis_modulus_stays_bounded_under_refinement() {
    let moduli: Vec<f64> = [33, 65]
        .iter()
        .map(|&m| {
            let (_, problem) = ball_problem(m);
            let report = axis_limit_audit(&solve_reinhardt(&problem, &opts()).unwrap());
            assert!(report.nodes_checked > 0);
            report.jump_modulus
        })
        .collect();
    assert!(moduli[1] <= 1.5 * moduli[0], "moduli {moduli:?}");
}
