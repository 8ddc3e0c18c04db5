//! Explicit barriers: the Green function, its regularization `w^ε` with source
//! `f^ε = H_k(w^ε)`, the glued subsolution, the smooth maximum, and radial
//! harmonic majorants.
//!
//! Radial profiles are written in the variable `σ = |z|^2`; the complex
//! Hessian of `g(σ)` has eigenvalues `g'` (multiplicity `n-1`) and `g' + σ g''`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};
use crate::geometry::{reinhardt_hessian, InnerDomain};
use crate::symmfunc::{binomial, cone_test, elementary_symmetric, sigma_k, sk_of_symmetric};

/// Problem constants of the regularized exterior problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproximationParams {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub eps0: f64,
    /// Radius of a ball contained in the hole, after normalization.
    pub t: f64,
    /// Collar width: the hole is inside `B_1` and `B_{1+s}` is the outer ball.
    pub s: f64,
    pub mu: f64,
    pub b: f64,
}

impl ApproximationParams {
    /// Builds and validates parameters; `mu` and `b` get their defaults
    /// `mu^2 = t^2/(n+k-1)` and `b = k t^2 / (2(n+k))`.
    pub fn new(n: usize, k: usize, t: f64, s: f64, eps0: f64, eps: f64) -> Result<Self> {
        let mu = t / ((n + k - 1) as f64).sqrt();
        let b = k as f64 * t * t / (2 * (n + k)) as f64;
        let p = Self {
            n,
            k,
            eps,
            eps0,
            t,
            s,
            mu,
            b,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.n, self.k);
        if !(1 <= k && k < n) {
            return Err(param("k", k as f64, format!("need 1 <= k < n = {n}")));
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(param("t", self.t, "must lie in (0, 1)"));
        }
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(param("s", self.s, "must be positive"));
        }
        let ceiling = self.s * self.s / 8.0;
        if !(self.eps0 < ceiling) {
            return Err(param(
                "eps0",
                self.eps0,
                format!("must be below s^2/8 = {ceiling}"),
            ));
        }
        if !(self.eps > 0.0 && self.eps <= self.eps0) {
            return Err(param(
                "eps",
                self.eps,
                format!("must lie in (0, eps0 = {}]", self.eps0),
            ));
        }
        if !(self.mu > self.eps) {
            return Err(param(
                "mu",
                self.mu,
                format!("must exceed eps = {}", self.eps),
            ));
        }
        let b_max = k as f64 * self.t * self.t / (2 * (n + k)) as f64;
        if !(self.b > 0.0 && self.b <= b_max * (1.0 + 1e-12)) {
            return Err(param(
                "b",
                self.b,
                format!("must lie in (0, k t^2/(2(n+k)) = {b_max}]"),
            ));
        }
        Ok(())
    }

    /// Same constants with a different `eps`.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let p = Self {
            eps,
            ..self.clone()
        };
        p.validate()?;
        Ok(p)
    }

    /// `1 - n/k`, the power of `|z|^2` in the Green function.
    pub fn power(&self) -> f64 {
        1.0 - self.n as f64 / self.k as f64
    }

    /// `2 - 2n/k`, the power of `|z|`.
    pub fn decay_exponent(&self) -> f64 {
        2.0 * self.power()
    }

    /// `a = (2n - k)/(n - k)`.
    pub fn gradient_exponent(&self) -> f64 {
        (2 * self.n - self.k) as f64 / (self.n - self.k) as f64
    }

    /// Upper end `(a-1)/(8a^2)` of the admissible exponents in the second-order
    /// test quantity.
    pub fn sigma_ceiling(&self) -> f64 {
        let a = self.gradient_exponent();
        (a - 1.0) / (8.0 * a * a)
    }

    /// `(2(n-k)/(k(2n-k)))^2`, the constant in the interior gradient bound.
    pub fn gradient_constant(&self) -> f64 {
        let (n, k) = (self.n as f64, self.k as f64);
        (2.0 * (n - k) / (k * (2.0 * n - k))).powi(2)
    }

    /// `R_1 = max{1+s, t eps0 / sqrt(1-t^2)}`.
    pub fn r1(&self) -> f64 {
        (1.0 + self.s).max(self.t * self.eps0 / (1.0 - self.t * self.t).sqrt())
    }

    /// `R_2 = sqrt(max{R_1^2, 16 t^{-2} (1+eps0^2), 16})`.
    pub fn r2(&self) -> f64 {
        let r1 = self.r1();
        (r1 * r1)
            .max(16.0 * (1.0 + self.eps0 * self.eps0) / (self.t * self.t))
            .max(16.0)
            .sqrt()
    }
}

/// Value and first two derivatives of a radial profile in `σ = |z|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl RadialJet {
    /// Complex-Hessian eigenvalues `(g', g' + σ g'')`.
    pub fn eigen_pair(&self, norm_sq: f64) -> (f64, f64) {
        (self.d1, self.d1 + norm_sq * self.d2)
    }
}

/// Value, gradient and Hessian of a function of several variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

impl From<RadialJet> for Jet {
    fn from(j: RadialJet) -> Self {
        Jet {
            value: j.value,
            grad: vec![j.d1],
            hess: DMatrix::from_element(1, 1, j.d2),
        }
    }
}

/// `S_k` of the radial spectrum `(λ_a` repeated `n-1` times, `λ_b)`.
pub fn radial_sigma(n: usize, k: usize, lambda_a: f64, lambda_b: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    binomial(n - 1, k) * lambda_a.powi(k as i32)
        + binomial(n - 1, k - 1) * lambda_a.powi(k as i32 - 1) * lambda_b
}

/// `-σ^{1-n/k}`.
pub fn green_function(norm_sq: f64, params: &ApproximationParams) -> Result<f64> {
    if !(norm_sq > 0.0) {
        return Err(Error::Domain(format!(
            "Green function needs |z|^2 > 0, got {norm_sq}"
        )));
    }
    Ok(-norm_sq.powf(params.power()))
}

pub fn green_jet(norm_sq: f64, power: f64) -> RadialJet {
    let base = norm_sq.powf(power);
    RadialJet {
        value: -base,
        d1: -power * base / norm_sq,
        d2: -power * (power - 1.0) * base / (norm_sq * norm_sq),
    }
}

/// `-((σ + ε^2)/(1 + ε^2))^{1-n/k}`.
pub fn w_eps(norm_sq: f64, params: &ApproximationParams) -> f64 {
    w_eps_jet(norm_sq, params).value
}

pub fn w_eps_jet(norm_sq: f64, params: &ApproximationParams) -> RadialJet {
    shifted_green_jet(norm_sq, params.eps * params.eps, params)
}

/// `-((σ + c)/(1 + ε^2))^{1-n/k}` with its derivatives.
fn shifted_green_jet(norm_sq: f64, shift: f64, params: &ApproximationParams) -> RadialJet {
    let p = params.power();
    let e2 = params.eps * params.eps;
    let x = (norm_sq + shift) / (1.0 + e2);
    let base = x.powf(p);
    let dx = 1.0 / (1.0 + e2);
    RadialJet {
        value: -base,
        d1: -p * base / x * dx,
        d2: -p * (p - 1.0) * base / (x * x) * dx * dx,
    }
}

/// `C(n,k) (n/k - 1)^k ε^2 (1+ε^2)^{n-k} (σ + ε^2)^{-n-1}`.
pub fn f_eps(norm_sq: f64, params: &ApproximationParams) -> f64 {
    f_eps_raw(norm_sq, params.n, params.k, params.eps)
}

pub(crate) fn f_eps_raw(norm_sq: f64, n: usize, k: usize, eps: f64) -> f64 {
    let e2 = eps * eps;
    let (nf, kf) = (n as f64, k as f64);
    binomial(n, k)
        * (nf / kf - 1.0).powi(k as i32)
        * e2
        * (1.0 + e2).powi((n - k) as i32)
        * (norm_sq + e2).powi(-(n as i32) - 1)
}

/// Euclidean length in `R^{2n}` of `D log f^ε` at `|z| = r`.
pub fn log_f_eps_gradient(r: f64, params: &ApproximationParams) -> f64 {
    (params.n as f64 + 1.0) * 2.0 * r / (r * r + params.eps * params.eps)
}

/// `-((μ^2 + σ)/(1 + ε^2))^{1-n/k}`, the comparison function of the
/// second-order barrier test.
pub fn w_hat_jet(norm_sq: f64, params: &ApproximationParams) -> RadialJet {
    shifted_green_jet(norm_sq, params.mu * params.mu, params)
}

/// Lower envelope `-(1+ε_0^2)^{n/k-1} σ^{1-n/k}` of every truncated solution.
pub fn lower_envelope(norm_sq: f64, params: &ApproximationParams) -> f64 {
    -(1.0 + params.eps0 * params.eps0).powf(-params.power()) * norm_sq.powf(params.power())
}

/// Upper envelope `-(σ / r_in^2)^{1-n/k}` for a hole containing `B_{r_in}`.
pub fn upper_envelope(norm_sq: f64, inscribed_radius: f64, params: &ApproximationParams) -> f64 {
    -(norm_sq / (inscribed_radius * inscribed_radius)).powf(params.power())
}

/// Even `C^2` kernel equal to `|t|` outside `[-δ, δ]`:
/// `m(t) = 3δ/8 + 3t^2/(4δ) - t^4/(8δ^3)` inside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothMaxSpec {
    pub delta: f64,
    pub c0: f64,
    pub c2: f64,
    pub c4: f64,
}

impl SmoothMaxSpec {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(param("delta", delta, "must be positive"));
        }
        Ok(Self {
            delta,
            c0: 3.0 * delta / 8.0,
            c2: 3.0 / (4.0 * delta),
            c4: -1.0 / (8.0 * delta.powi(3)),
        })
    }

    /// `(m, m', m'')` at `t`.
    pub fn kernel(&self, t: f64) -> (f64, f64, f64) {
        if t.abs() >= self.delta {
            (t.abs(), t.signum(), 0.0)
        } else {
            let t2 = t * t;
            (
                self.c0 + self.c2 * t2 + self.c4 * t2 * t2,
                2.0 * self.c2 * t + 4.0 * self.c4 * t2 * t,
                2.0 * self.c2 + 12.0 * self.c4 * t2,
            )
        }
    }
}

/// `H = (h + g + m(h - g))/2` with gradient and Hessian by the chain rule.
pub fn smooth_max(h: &Jet, g: &Jet, spec: &SmoothMaxSpec) -> Jet {
    let d = h.value - g.value;
    if d > spec.delta {
        return h.clone();
    }
    if -d > spec.delta {
        return g.clone();
    }
    let (m, m1, m2) = spec.kernel(d);
    let dg: Vec<f64> = h.grad.iter().zip(&g.grad).map(|(a, b)| a - b).collect();
    let dim = dg.len();
    let grad = (0..dim)
        .map(|j| 0.5 * (h.grad[j] + g.grad[j] + m1 * dg[j]))
        .collect();
    let hess = DMatrix::from_fn(dim, dim, |i, j| {
        let dh = h.hess[(i, j)] - g.hess[(i, j)];
        0.5 * (h.hess[(i, j)] + g.hess[(i, j)] + m2 * dg[i] * dg[j] + m1 * dh)
    });
    Jet {
        value: 0.5 * (h.value + g.value + m),
        grad,
        hess,
    }
}

/// Scalar version of [`smooth_max`] for radial profiles.
pub fn smooth_max_radial(h: RadialJet, g: RadialJet, spec: &SmoothMaxSpec) -> RadialJet {
    let j = smooth_max(&h.into(), &g.into(), spec);
    RadialJet {
        value: j.value,
        d1: j.grad[0],
        d2: j.hess[(0, 0)],
    }
}

/// The glued exterior subsolution: a linear function `φ` of `Σ a_j ρ_j`
/// near the hole, `w^ε` outside `B_{1+s/2}`, and a smooth maximum between.
#[derive(Clone, Debug)]
pub struct SubsolutionField {
    pub params: ApproximationParams,
    pub domain: InnerDomain,
    pub blend: SmoothMaxSpec,
    /// Slope multiplier `1 - (1 + s^2/(16+s^2))^{1-n/k}`.
    pub c_phi: f64,
    /// Normalization of the defining function in `φ`.
    pub denominator: f64,
    /// Beyond `|z|^2 = switch_sq` the field is exactly `w^ε`.
    pub switch_sq: f64,
}

fn collar_gap(params: &ApproximationParams) -> f64 {
    let s2 = params.s * params.s;
    let p = params.power();
    (1.0 + s2 / (16.0 + s2)).powf(p) - (1.0 + s2 / (8.0 + s2)).powf(p)
}

fn phi_slope(params: &ApproximationParams) -> f64 {
    let s2 = params.s * params.s;
    1.0 - (1.0 + s2 / (16.0 + s2)).powf(params.power())
}

fn phi_denominator(params: &ApproximationParams, domain: &InnerDomain) -> f64 {
    let amax = domain.weights.iter().copied().fold(0.0, f64::max);
    amax * (1.0 + params.s).powi(2) - domain.level
}

impl SubsolutionField {
    /// `φ` as a function of `L = Σ a_j ρ_j`.
    fn phi_of_level(&self, level: f64) -> f64 {
        self.c_phi * (level - self.domain.level) / self.denominator - 1.0
    }

    /// Jet in the coordinates `ρ_j = |z_j|^2`.
    pub fn eval_rho(&self, rho: &[f64]) -> Jet {
        let n = rho.len();
        let norm_sq: f64 = rho.iter().sum();
        let w = w_eps_jet(norm_sq, &self.params);
        let w_jet = Jet {
            value: w.value,
            grad: vec![w.d1; n],
            hess: DMatrix::from_element(n, n, w.d2),
        };
        if norm_sq >= self.switch_sq {
            return w_jet;
        }
        let level: f64 = self.domain.weights.iter().zip(rho).map(|(a, r)| a * r).sum();
        let phi = Jet {
            value: self.phi_of_level(level),
            grad: self
                .domain
                .weights
                .iter()
                .map(|a| self.c_phi * a / self.denominator)
                .collect(),
            hess: DMatrix::zeros(n, n),
        };
        smooth_max(&phi, &w_jet, &self.blend)
    }

    /// Radial jet; only meaningful when the hole is a ball.
    pub fn eval_radial(&self, norm_sq: f64) -> RadialJet {
        let w = w_eps_jet(norm_sq, &self.params);
        if norm_sq >= self.switch_sq {
            return w;
        }
        let slope = self.c_phi / self.denominator;
        let phi = RadialJet {
            value: self.phi_of_level(norm_sq),
            d1: slope,
            d2: 0.0,
        };
        smooth_max_radial(phi, w, &self.blend)
    }

    pub fn value_rho(&self, rho: &[f64]) -> f64 {
        self.eval_rho(rho).value
    }

    /// Reduced complex Hessian at `ρ`.
    pub fn complex_hessian(&self, rho: &[f64]) -> DMatrix<f64> {
        let jet = self.eval_rho(rho);
        reinhardt_hessian(rho, &jet.grad, &jet.hess)
    }

    /// `S_k(∂∂̄u) - f^ε` at `ρ`.
    pub fn sk_margin(&self, rho: &[f64]) -> Result<f64> {
        let (sk, _) = sk_of_symmetric(&self.complex_hessian(rho), self.params.k)?;
        Ok(sk - f_eps(rho.iter().sum(), &self.params))
    }

    /// `S_k` of the `φ` piece, a constant.
    pub fn phi_sigma(&self) -> f64 {
        let scaled: Vec<f64> = self
            .domain
            .weights
            .iter()
            .map(|a| self.c_phi * a / self.denominator)
            .collect();
        sigma_k(&scaled, self.params.k).expect("k < n")
    }

    /// Largest `ε` for which `H_k(u̲) >= f^ε` holds on the whole exterior;
    /// see [`subsolution_eps_ceiling`].
    pub fn eps_ceiling(&self) -> f64 {
        subsolution_eps_ceiling(&self.params, &self.domain)
    }
}

/// Largest `ε` with `f^ε <= S_k(φ)` on the hole boundary, where `f^ε` is
/// largest. Below it the glued field is a genuine subsolution.
pub fn subsolution_eps_ceiling(params: &ApproximationParams, domain: &InnerDomain) -> f64 {
    let c_phi = phi_slope(params);
    let den = phi_denominator(params, domain);
    let scaled: Vec<f64> = domain.weights.iter().map(|a| c_phi * a / den).collect();
    let target = sigma_k(&scaled, params.k).expect("k < n");
    let r = domain.inscribed_radius();
    let nearest = r * r;
    let f = |e: f64| f_eps_raw(nearest, params.n, params.k, e);
    // f vanishes at 0 and at infinity; locate the peak on a log scan
    let mut peak = 1e-8;
    let mut best = f(peak);
    let mut e = 1e-8;
    while e < 1e4 {
        let v = f(e);
        if v > best {
            best = v;
            peak = e;
        }
        e *= 1.05;
    }
    if best <= target {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, peak);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Minimum of `φ - w^ε` over the part of `B_1` outside the hole, scanning the
/// worst-case `L = Σ a_j ρ_j` for each `|z|^2`.
fn inner_gap(params: &ApproximationParams, domain: &InnerDomain, c_phi: f64, den: f64) -> f64 {
    let amin = domain.weights.iter().copied().fold(f64::INFINITY, f64::min);
    let lo = domain.inscribed_radius().powi(2);
    let hi = 1.0;
    let steps = 4000;
    (0..=steps)
        .map(|i| {
            let sq = lo + (hi - lo) * i as f64 / steps as f64;
            let level = domain.level.max(amin * sq);
            let phi = c_phi * (level - domain.level) / den - 1.0;
            phi - w_eps(sq, params)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Glues `φ` and `w^ε`. The blend width is half the smaller of the collar gap
/// `(1+s^2/(16+s^2))^{1-n/k} - (1+s^2/(8+s^2))^{1-n/k}` and the numerically
/// evaluated minimum of `φ - w^ε` inside `B_1`. The result is audited for
/// cone membership on a sample of points.
pub fn assemble_subsolution(
    params: &ApproximationParams,
    domain: &InnerDomain,
) -> Result<SubsolutionField> {
    params.validate()?;
    if params.eps > params.eps0 {
        return Err(param(
            "eps",
            params.eps,
            format!("exceeds eps0 = {}", params.eps0),
        ));
    }
    if domain.dim() != params.n {
        return Err(Error::Domain(format!(
            "hole has dimension {}, parameters have n = {}",
            domain.dim(),
            params.n
        )));
    }
    if !(domain.circumscribed_radius() < 1.0) {
        return Err(Error::Domain("the hole must lie inside the unit ball".into()));
    }
    let c_phi = phi_slope(params);
    let den = phi_denominator(params, domain);
    let gap_in = inner_gap(params, domain, c_phi, den);
    let gap_out = collar_gap(params);
    if !(gap_in > 0.0 && gap_out > 0.0) {
        return Err(Error::Assembly {
            location: 1.0,
            margins: vec![gap_in, gap_out],
        });
    }
    let delta = 0.5 * gap_in.min(gap_out);
    let switch_sq = (1.0 + params.s / 2.0).powi(2);
    let field = SubsolutionField {
        params: params.clone(),
        domain: domain.clone(),
        blend: SmoothMaxSpec::new(delta)?,
        c_phi,
        denominator: den,
        switch_sq,
    };
    // the switch to w^ε must happen where the blend already equals w^ε
    let amax = domain.weights.iter().copied().fold(0.0, f64::max);
    let phi_max = field.phi_of_level(amax * switch_sq);
    let w_switch = w_eps(switch_sq, params);
    if !(w_switch - phi_max > delta) {
        return Err(Error::Assembly {
            location: switch_sq,
            margins: vec![w_switch - phi_max - delta],
        });
    }
    audit_cone(&field)?;
    Ok(field)
}

fn audit_cone(field: &SubsolutionField) -> Result<()> {
    let params = &field.params;
    let n = params.n;
    let k = params.k;
    let lo = field.domain.inscribed_radius().powi(2);
    let hi = (1.0 + params.s).powi(2);
    let check = |rho: &[f64]| -> Result<()> {
        let a = field.complex_hessian(rho);
        let (_, spec) = sk_of_symmetric(&a, k)?;
        let scale = spec.magnitude().max(f64::MIN_POSITIVE).powi(k as i32);
        let cone = cone_test(spec.values(), k, 1e-12 * scale);
        if cone.inside_closed {
            Ok(())
        } else {
            Err(Error::Assembly {
                location: rho.iter().sum(),
                margins: cone.margins,
            })
        }
    };
    if field.domain.is_ball() {
        for i in 0..=400 {
            let sq = lo + (hi - lo) * i as f64 / 400.0;
            let jet = field.eval_radial(sq);
            let (la, lb) = jet.eigen_pair(sq);
            let mut lambda = vec![la; n - 1];
            lambda.push(lb);
            let e = elementary_symmetric(&lambda, k);
            let scale = la.abs().max(lb.abs()).max(f64::MIN_POSITIVE).powi(k as i32);
            if e[1..].iter().any(|&m| m < -1e-12 * scale) {
                return Err(Error::Assembly {
                    location: sq,
                    margins: e[1..].to_vec(),
                });
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut accepted = 0;
    while accepted < 400 {
        let rho: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..hi)).collect();
        let sq: f64 = rho.iter().sum();
        if sq > hi || field.domain.defining(&rho) < 0.0 {
            continue;
        }
        check(&rho)?;
        accepted += 1;
    }
    Ok(())
}

/// Subsolution of the ring problem `u = 0` on `|z| = r_in`, `u = 1` on
/// `|z| = r_out`: the quadratic `(σ - r_in^2)/(r_out^2 - r_in^2)`, whose
/// `S_k` is the constant returned by [`ring_source_ceiling`].
pub fn ring_subsolution_jet(norm_sq: f64, inner_sq: f64, outer_sq: f64) -> RadialJet {
    let den = outer_sq - inner_sq;
    RadialJet {
        value: (norm_sq - inner_sq) / den,
        d1: 1.0 / den,
        d2: 0.0,
    }
}

/// `C(n,k) / (r_out^2 - r_in^2)^k`: ring sources up to this value admit the
/// quadratic subsolution.
pub fn ring_source_ceiling(n: usize, k: usize, inner_sq: f64, outer_sq: f64) -> f64 {
    binomial(n, k) / (outer_sq - inner_sq).powi(k as i32)
}

/// Radial harmonic function `A + B r^{2-2n}` on `R^{2n}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicMajorant {
    pub constant: f64,
    pub coefficient: f64,
    pub n: usize,
}

impl HarmonicMajorant {
    /// Matches `inner_value` at `inner_radius` and `outer_value` at
    /// `outer_radius`, which may be `f64::INFINITY`.
    pub fn new(
        inner_radius: f64,
        outer_radius: f64,
        inner_value: f64,
        outer_value: f64,
        n: usize,
    ) -> Result<Self> {
        if !(inner_radius > 0.0 && outer_radius > inner_radius) || n < 2 {
            return Err(Error::Domain(format!(
                "harmonic majorant needs 0 < inner < outer and n >= 2, got ({inner_radius}, {outer_radius}, n = {n})"
            )));
        }
        let e = 2.0 - 2.0 * n as f64;
        let pin = inner_radius.powf(e);
        let pout = if outer_radius.is_infinite() {
            0.0
        } else {
            outer_radius.powf(e)
        };
        let coefficient = (inner_value - outer_value) / (pin - pout);
        Ok(Self {
            constant: outer_value - coefficient * pout,
            coefficient,
            n,
        })
    }

    pub fn value(&self, r: f64) -> f64 {
        self.constant + self.coefficient * r.powf(2.0 - 2.0 * self.n as f64)
    }
}
