//! Finite-difference stencils on the `ρ`-grid.
//!
//! Every derivative at a node is a linear functional of nodal values plus a
//! constant collecting off-grid boundary values at cut cells.

use crate::error::{Error, Result};
use crate::geometry::ReinhardtGrid;

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Linear {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Linear {
    fn push(&mut self, node: usize, coef: f64) {
        self.terms.push((node, coef));
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(q, c)| acc + c * values[q])
    }

    pub fn scaled(&self, factor: f64) -> Linear {
        Linear {
            constant: self.constant * factor,
            terms: self.terms.iter().map(|&(q, c)| (q, c * factor)).collect(),
        }
    }

    pub fn add(&mut self, other: &Linear) {
        self.constant += other.constant;
        self.terms.extend_from_slice(&other.terms);
    }
}

/// Derivative functionals at one unknown node.
#[derive(Clone, Debug)]
pub(crate) struct NodeStencil {
    pub node: usize,
    pub rho: Vec<f64>,
    pub grad: Vec<Linear>,
    /// Row-major `n x n`, symmetric. Entries in an axis slot are left empty.
    pub hess: Vec<Linear>,
    /// Entries of the reduced Hessian, row-major `n x n`.
    pub matrix: Vec<Linear>,
}

/// Kind of mixed-derivative stencil chosen at a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum MixedKind {
    AntiDiagonal,
    MainDiagonal,
    Quadrant,
}

struct Ctx<'a> {
    grid: &'a ReinhardtGrid,
    idx: Vec<usize>,
}

impl Ctx<'_> {
    /// Grid node at `idx + shifts`, if it exists and is not exterior.
    fn at(&self, shifts: &[(usize, isize)]) -> Option<usize> {
        let mut idx = self.idx.clone();
        for &(j, d) in shifts {
            let i = idx[j] as isize + d;
            if i < 0 || i >= self.grid.per_axis as isize {
                return None;
            }
            idx[j] = i as usize;
        }
        let q = self.grid.flat(&idx);
        (self.grid.class(q) != crate::geometry::NodeClass::Exterior).then_some(q)
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Stencil {
            node: self.idx.clone(),
            reason: reason.into(),
        }
    }
}

/// Builds first and second derivative functionals at node `p`.
pub(crate) fn build<B: Fn(&[f64]) -> f64>(
    grid: &ReinhardtGrid,
    p: usize,
    boundary: &B,
) -> Result<(NodeStencil, Vec<MixedKind>)> {
    let n = grid.dim;
    let h = grid.spacing;
    let ctx = Ctx {
        grid,
        idx: grid.index(p),
    };
    let rho = grid.rho(p);
    let on_axis: Vec<bool> = ctx.idx.iter().map(|&i| i == 0).collect();
    let mut grad = vec![Linear::default(); n];
    let mut hess = vec![Linear::default(); n * n];
    let mut kinds = Vec::new();

    for j in 0..n {
        if on_axis[j] {
            let one = ctx
                .at(&[(j, 1)])
                .ok_or_else(|| ctx.err(format!("no neighbour along axis {j}")))?;
            match ctx.at(&[(j, 2)]) {
                Some(two) => {
                    grad[j].push(p, -1.5 / h);
                    grad[j].push(one, 2.0 / h);
                    grad[j].push(two, -0.5 / h);
                    let d = &mut hess[j * n + j];
                    d.push(p, 1.0 / (h * h));
                    d.push(one, -2.0 / (h * h));
                    d.push(two, 1.0 / (h * h));
                }
                None => {
                    // next to the outer face: forward difference corrected by the
                    // second difference taken one row back along another axis
                    grad[j].push(p, -1.0 / h);
                    grad[j].push(one, 1.0 / h);
                    let row = (0..n).filter(|&k| k != j).find_map(|k| {
                        Some((
                            ctx.at(&[(k, -1)])?,
                            ctx.at(&[(j, 1), (k, -1)])?,
                            ctx.at(&[(j, 2), (k, -1)])?,
                        ))
                    });
                    if let Some((a, b, c)) = row {
                        grad[j].push(a, -0.5 / h);
                        grad[j].push(b, 1.0 / h);
                        grad[j].push(c, -0.5 / h);
                        let d = &mut hess[j * n + j];
                        d.push(a, 1.0 / (h * h));
                        d.push(b, -2.0 / (h * h));
                        d.push(c, 1.0 / (h * h));
                    }
                }
            }
            continue;
        }
        let plus = ctx
            .at(&[(j, 1)])
            .ok_or_else(|| ctx.err(format!("no forward neighbour along {j}")))?;
        let hp = h;
        match ctx.at(&[(j, -1)]) {
            Some(minus) => {
                grad[j].push(plus, 0.5 / h);
                grad[j].push(minus, -0.5 / h);
                let d = &mut hess[j * n + j];
                d.push(plus, 1.0 / (h * h));
                d.push(p, -2.0 / (h * h));
                d.push(minus, 1.0 / (h * h));
            }
            None => {
                // the backward neighbour lies in the hole: cut the arm at the level set
                let a = grid.inner.weights[j];
                let hm = grid.inner.defining(&rho) / a;
                if !(hm > 0.0 && hm <= h * (1.0 + 1e-12)) {
                    return Err(ctx.err(format!("cut distance {hm} outside (0, h]")));
                }
                let mut at = rho.clone();
                at[j] -= hm;
                let vm = boundary(&at);
                let den = hp * hm * (hp + hm);
                grad[j].push(plus, hm * hm / den);
                grad[j].push(p, (hp * hp - hm * hm) / den);
                grad[j].constant -= hp * hp / den * vm;
                let d = &mut hess[j * n + j];
                d.push(plus, 2.0 * hm / den);
                d.push(p, -2.0 * (hp + hm) / den);
                d.constant += 2.0 * hp / den * vm;
            }
        }
    }

    for j in 0..n {
        for k in j + 1..n {
            if on_axis[j] || on_axis[k] {
                continue;
            }
            let (lin, kind) = mixed(&ctx, p, j, k, h)?;
            hess[k * n + j] = lin.clone();
            hess[j * n + k] = lin;
            kinds.push(kind);
        }
    }

    let mut matrix = vec![Linear::default(); n * n];
    for j in 0..n {
        let mut d = grad[j].clone();
        if !on_axis[j] {
            d.add(&hess[j * n + j].scaled(rho[j]));
        }
        matrix[j * n + j] = d;
        for k in j + 1..n {
            if on_axis[j] || on_axis[k] {
                continue;
            }
            let e = hess[j * n + k].scaled((rho[j] * rho[k]).sqrt());
            matrix[k * n + j] = e.clone();
            matrix[j * n + k] = e;
        }
    }

    Ok((
        NodeStencil {
            node: p,
            rho,
            grad,
            hess,
            matrix,
        },
        kinds,
    ))
}

fn mixed(
    ctx: &Ctx<'_>,
    p: usize,
    j: usize,
    k: usize,
    h: f64,
) -> Result<(Linear, MixedKind)> {
    let c = 1.0 / (2.0 * h * h);
    let nb = |s: &[(usize, isize)]| ctx.at(s);
    let axes = [
        nb(&[(j, 1)]),
        nb(&[(j, -1)]),
        nb(&[(k, 1)]),
        nb(&[(k, -1)]),
    ];
    if let [Some(jp), Some(jm), Some(kp), Some(km)] = axes {
        if let (Some(a), Some(b)) = (nb(&[(j, 1), (k, -1)]), nb(&[(j, -1), (k, 1)])) {
            let mut l = Linear::default();
            for q in [jp, jm, kp, km] {
                l.push(q, c);
            }
            l.push(a, -c);
            l.push(b, -c);
            l.push(p, -2.0 * c);
            return Ok((l, MixedKind::AntiDiagonal));
        }
        if let (Some(a), Some(b)) = (nb(&[(j, 1), (k, 1)]), nb(&[(j, -1), (k, -1)])) {
            let mut l = Linear::default();
            l.push(a, c);
            l.push(b, c);
            for q in [jp, jm, kp, km] {
                l.push(q, -c);
            }
            l.push(p, 2.0 * c);
            return Ok((l, MixedKind::MainDiagonal));
        }
    }
    for (sj, sk) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
        if let (Some(a), Some(b), Some(d)) = (
            nb(&[(j, sj), (k, sk)]),
            nb(&[(j, sj)]),
            nb(&[(k, sk)]),
        ) {
            let s = (sj * sk) as f64 / (h * h);
            let mut l = Linear::default();
            l.push(a, s);
            l.push(b, -s);
            l.push(d, -s);
            l.push(p, s);
            return Ok((l, MixedKind::Quadrant));
        }
    }
    Err(ctx.err(format!("no mixed stencil for axes ({j}, {k})")))
}
