//! Hierarchical tensor-product bases on the reference cube `[0,1]³`.
//!
//! 1D building blocks: shifted Legendre polynomials `ψ_a` (L2 direction) and the
//! H1 family `φ_0 = 1−t`, `φ_1 = t`, `φ_n = ∫_0^t ψ_{n−1}` for `n >= 2`.
//! A Nédélec (first kind) function of order `q` for component `c` is
//! `ψ_a(x_c) φ_b(x_{c1}) φ_d(x_{c2}) e_c` with `a < q`, `b, d <= q`, where `c1 < c2`
//! are the two remaining axes.

use crate::quadrature::legendre_with_derivative;

/// Shifted Legendre values `ψ_0..ψ_n` at `t`.
pub fn legendre_values(n: usize, t: f64) -> Vec<f64> {
    let x = 2.0 * t - 1.0;
    let mut v = Vec::with_capacity(n + 1);
    v.push(1.0);
    if n >= 1 {
        v.push(x);
    }
    for k in 2..=n {
        let next = ((2 * k - 1) as f64 * x * v[k - 1] - (k - 1) as f64 * v[k - 2]) / k as f64;
        v.push(next);
    }
    v
}

/// H1 family values and derivatives `φ_0..φ_q` at `t`.
pub fn h1_values(q: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let x = 2.0 * t - 1.0;
    let leg = legendre_values(q.max(1), t);
    let mut v = vec![1.0 - t, t];
    let mut d = vec![-1.0, 1.0];
    for n in 2..=q {
        let pn = if n < leg.len() { leg[n] } else { legendre_with_derivative(n, x).0 };
        v.push((pn - leg[n - 2]) / (2.0 * (2 * n - 1) as f64));
        d.push(leg[n - 1]);
    }
    v.truncate(q + 1);
    d.truncate(q + 1);
    (v, d)
}

/// The two axes other than `c`, ascending.
pub fn other_axes(c: usize) -> (usize, usize) {
    match c {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NedFn {
    pub comp: usize,
    pub a: usize,
    pub b: usize,
    pub d: usize,
}

/// All Nédélec functions of order `q`; dimension `3 q (q+1)²`.
pub fn ned_functions(q: usize) -> Vec<NedFn> {
    let mut out = Vec::with_capacity(3 * q * (q + 1) * (q + 1));
    for comp in 0..3 {
        for a in 0..q {
            for b in 0..=q {
                for d in 0..=q {
                    out.push(NedFn { comp, a, b, d });
                }
            }
        }
    }
    out
}

/// 1D tables at a point for order `q`.
#[derive(Debug, Clone)]
pub struct Tables1D {
    pub psi: [Vec<f64>; 3],
    pub phi: [Vec<f64>; 3],
    pub dphi: [Vec<f64>; 3],
}

impl Tables1D {
    pub fn at(q: usize, r: [f64; 3]) -> Self {
        let psi = [legendre_values(q, r[0]), legendre_values(q, r[1]), legendre_values(q, r[2])];
        let h = [h1_values(q, r[0]), h1_values(q, r[1]), h1_values(q, r[2])];
        Tables1D {
            psi,
            phi: [h[0].0.clone(), h[1].0.clone(), h[2].0.clone()],
            dphi: [h[0].1.clone(), h[1].1.clone(), h[2].1.clone()],
        }
    }
}

/// Reference value (only component `f.comp` is nonzero) and reference curl.
pub fn eval_ned(f: &NedFn, t: &Tables1D) -> (f64, [f64; 3]) {
    let (c1, c2) = other_axes(f.comp);
    let pa = t.psi[f.comp][f.a];
    let u = pa * t.phi[c1][f.b] * t.phi[c2][f.d];
    let du1 = pa * t.dphi[c1][f.b] * t.phi[c2][f.d];
    let du2 = pa * t.phi[c1][f.b] * t.dphi[c2][f.d];
    let mut grad = [0.0; 3];
    grad[c1] = du1;
    grad[c2] = du2;
    // curl(u e_c) = ∇u × e_c
    let curl = match f.comp {
        0 => [0.0, grad[2], -grad[1]],
        1 => [-grad[2], 0.0, grad[0]],
        _ => [grad[1], -grad[0], 0.0],
    };
    (u, curl)
}

/// Location of a trace function on the reference cube boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalEntity {
    /// edge along `axis`, at positions `pos` (0/1) of the two other axes (ascending)
    Edge { axis: usize, pos: [usize; 2] },
    /// face with normal `normal` at coordinate `pos` (0/1)
    Face { normal: usize, pos: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct TraceFn {
    pub f: NedFn,
    pub entity: LocalEntity,
    /// bubble index (>= 2) of the in-face H1 direction, for face functions
    pub bubble: usize,
}

/// Edge and face functions of the order-`p` Nédélec space (interior functions dropped).
pub fn trace_functions(p: usize) -> Vec<TraceFn> {
    let mut out = Vec::new();
    for f in ned_functions(p) {
        let (c1, c2) = other_axes(f.comp);
        match (f.b < 2, f.d < 2) {
            (true, true) => out.push(TraceFn { f, entity: LocalEntity::Edge { axis: f.comp, pos: [f.b, f.d] }, bubble: 0 }),
            (true, false) => out.push(TraceFn { f, entity: LocalEntity::Face { normal: c1, pos: f.b }, bubble: f.d }),
            (false, true) => out.push(TraceFn { f, entity: LocalEntity::Face { normal: c2, pos: f.d }, bubble: f.b }),
            (false, false) => {}
        }
    }
    out
}

/// Scalar trial functions `ψ_a(ξ) ψ_b(η) ψ_c(ζ)` with `a, b, c < p`.
pub fn l2_index(p: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(p * p * p);
    for a in 0..p {
        for b in 0..p {
            for c in 0..p {
                out.push([a, b, c]);
            }
        }
    }
    out
}
