//! Element matrices of the broken ultraweak formulation and static condensation.
//!
//! Unknowns per element: L2 fields `E, H` (three `Q_{p−1}` scalar components each) and
//! the tangential traces `Ê, Ĥ` (order-`p` Nédélec edge/face functions). Test functions
//! `(F, G)` live in the broken Nédélec space of order `p + Δp`. `F` tests Faraday's law,
//! `G` Ampère's law:
//!
//! ```text
//! ∇×E − b e_z×E + c H = f_F,     ∇×H − b e_z×H − a E = f_A,
//! b(u, v) = (E, ∇×F + b̄ e_z×F − ā G) + (H, ∇×G + b̄ e_z×G + c̄ F) + ⟨n×Ê, F⟩ + ⟨n×Ĥ, G⟩
//! ```
//!
//! with `a = i k0 ε_r diag(s, s, 1/s)`, `c = i k0 diag(s, s, 1/s)`, `b = i 𝗄 s`, and `s` the
//! complex stretch `∂z̃/∂z`. The test inner product is the adjoint graph norm with an
//! `α²`-weighted L2 term.

use faer::Mat;

use super::basis::{eval_ned, l2_index, ned_functions, other_axes, trace_functions, NedFn, Tables1D, TraceFn};
use super::dense::{adj_mul, adj_mul_add, cholesky, chol_solve, col, lower_solve, mul};
use super::geometry::QuadMap;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::C64;

pub type CVec3 = [C64; 3];

pub type LoadFn<'a> = dyn Fn([f64; 3]) -> (CVec3, CVec3) + Sync + 'a;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Everything needed to form one element's local system.
pub struct ElementInput<'a> {
    pub map: &'a QuadMap,
    pub z0: f64,
    pub h: f64,
    pub p: usize,
    pub dp: usize,
    pub k0: f64,
    pub k_env: f64,
    pub alpha: f64,
    /// relative permittivity at a physical point
    pub eps: &'a (dyn Fn([f64; 3]) -> C64 + Sync),
    /// `∂z̃/∂z` at a physical z
    pub stretch: &'a (dyn Fn(f64) -> C64 + Sync),
    /// impedance `z_s` enforced on the element's top face
    pub top_impedance: Option<f64>,
    /// Faraday and Ampère right-hand sides
    pub load: Option<&'a LoadFn<'a>>,
}

/// Sizes of the local spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalSizes {
    pub p: usize,
    pub q: usize,
    /// per-field test dimension
    pub n_test: usize,
    /// per-field trace dimension
    pub n_trace: usize,
    /// per-field scalar trial count `p³`
    pub n_scalar: usize,
}

impl LocalSizes {
    pub fn new(p: usize, dp: usize) -> Self {
        let q = p + dp;
        LocalSizes { p, q, n_test: 3 * q * (q + 1) * (q + 1), n_trace: 12 * p + 12 * p * (p - 1), n_scalar: p * p * p }
    }

    /// `E` and `H` coefficients.
    pub fn n_field(&self) -> usize {
        6 * self.n_scalar
    }

    pub fn n_unknown(&self) -> usize {
        self.n_field() + 2 * self.n_trace
    }
}

/// Gram matrix, load and the stiffness `B` of one element.
pub struct ElementSystem {
    pub sizes: LocalSizes,
    pub gram: Mat<C64>,
    pub b: Mat<C64>,
    pub l: Mat<C64>,
}

/// Local minimum-residual system `A x = r` in unknowns `[E, H, Ê, Ĥ]`.
pub struct NormalSystem {
    pub sizes: LocalSizes,
    pub a: Mat<C64>,
    pub r: Mat<C64>,
    /// `‖l‖²_{V'}`, needed for the residual
    pub l_norm2: f64,
}

/// Trace-only system after eliminating the L2 fields.
#[derive(Clone)]
pub struct Condensed {
    pub sizes: LocalSizes,
    pub s: Mat<C64>,
    pub g: Mat<C64>,
    /// `x_f = x0 − X x_t`
    pub x: Mat<C64>,
    pub x0: Mat<C64>,
}

struct Point {
    x: [f64; 3],
    r: [f64; 3],
    w: f64,
    jinv_t: [[f64; 3]; 3],
    jac: [[f64; 3]; 3],
    det: f64,
}

fn point_geometry(map: &QuadMap, z0: f64, h: f64, r: [f64; 3]) -> Result<Point> {
    let (xy, j2) = map.eval(r[0], r[1]);
    let d2 = j2[0][0] * j2[1][1] - j2[0][1] * j2[1][0];
    if !(d2 > 0.0) {
        return Err(Error::Geometry(format!("non-positive element Jacobian {d2}")));
    }
    let jac = [[j2[0][0], j2[0][1], 0.0], [j2[1][0], j2[1][1], 0.0], [0.0, 0.0, h]];
    let jinv_t = [[j2[1][1] / d2, -j2[1][0] / d2, 0.0], [-j2[0][1] / d2, j2[0][0] / d2, 0.0], [0.0, 0.0, 1.0 / h]];
    Ok(Point { x: [xy[0], xy[1], z0 + h * r[2]], r, w: 0.0, jinv_t, jac, det: d2 * h })
}

/// Physical value (`J^{-T} F_ref`) and physical curl (`J curl_ref / |J|`) of a Nédélec function.
fn physical_ned(f: &NedFn, t: &Tables1D, pt: &Point) -> ([f64; 3], [f64; 3]) {
    let (u, cr) = eval_ned(f, t);
    let c = f.comp;
    let v = [pt.jinv_t[0][c] * u, pt.jinv_t[1][c] * u, pt.jinv_t[2][c] * u];
    let mut curl = [0.0; 3];
    for i in 0..3 {
        curl[i] = (pt.jac[i][0] * cr[0] + pt.jac[i][1] * cr[1] + pt.jac[i][2] * cr[2]) / pt.det;
    }
    (v, curl)
}

fn cross_real(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Forms the Gram matrix, stiffness and load of one element.
pub fn element_system(inp: &ElementInput<'_>) -> Result<ElementSystem> {
    if inp.p < 1 || inp.dp < 1 {
        return Err(Error::Precondition("need p >= 1 and dp >= 1".into()));
    }
    let sz = LocalSizes::new(inp.p, inp.dp);
    let (p, q) = (sz.p, sz.q);
    let tests = ned_functions(q);
    let traces = trace_functions(p);
    let scalars = l2_index(p);
    let nv = sz.n_test;
    let ns = sz.n_scalar;
    let nf = sz.n_field();

    let nq = q + 2;
    let (gx, gw) = gauss_legendre(nq);
    let npts = nq * nq * nq;
    let rows = 3 * npts;

    let mut vm = Mat::<C64>::zeros(rows, nv);
    let mut rm = Mat::<C64>::zeros(rows, nv);
    let mut tm = Mat::<C64>::zeros(rows, 3 * ns);
    // per-row diagonal coefficients
    let mut a_d = vec![C64::new(0.0, 0.0); rows];
    let mut c_d = vec![C64::new(0.0, 0.0); rows];
    let mut fload = vec![C64::new(0.0, 0.0); rows];
    let mut aload = vec![C64::new(0.0, 0.0); rows];

    let mut ip = 0;
    for i in 0..nq {
        for j in 0..nq {
            for k in 0..nq {
                let mut pt = point_geometry(inp.map, inp.z0, inp.h, [gx[i], gx[j], gx[k]])?;
                pt.w = gw[i] * gw[j] * gw[k];
                let sw = (pt.w * pt.det).sqrt();
                let s = (inp.stretch)(pt.x[2]);
                let eps = (inp.eps)(pt.x);
                let aco = I * inp.k0 * eps;
                let cco = I * inp.k0;
                let diag = [s, s, s.inv()];
                let bbar = (I * inp.k_env * s).conj();
                for comp in 0..3 {
                    a_d[3 * ip + comp] = aco * diag[comp];
                    c_d[3 * ip + comp] = cco * diag[comp];
                }
                if let Some(load) = inp.load {
                    let (ff, fa) = load(pt.x);
                    for comp in 0..3 {
                        fload[3 * ip + comp] = ff[comp] * sw;
                        aload[3 * ip + comp] = fa[comp] * sw;
                    }
                }
                let tab = Tables1D::at(q, pt.r);
                for (n, f) in tests.iter().enumerate() {
                    let (v, curl) = physical_ned(f, &tab, &pt);
                    // e_z × v = (−v_y, v_x, 0)
                    let ez = [-v[1], v[0], 0.0];
                    for comp in 0..3 {
                        vm[(3 * ip + comp, n)] = C64::new(sw * v[comp], 0.0);
                        rm[(3 * ip + comp, n)] = C64::new(sw * curl[comp], 0.0) + bbar * (sw * ez[comp]);
                    }
                }
                for (n, idx) in scalars.iter().enumerate() {
                    let val = sw * tab.psi[0][idx[0]] * tab.psi[1][idx[1]] * tab.psi[2][idx[2]];
                    for comp in 0..3 {
                        tm[(3 * ip + comp, comp * ns + n)] = C64::new(val, 0.0);
                    }
                }
                ip += 1;
            }
        }
    }

    let alpha2 = inp.alpha * inp.alpha;
    let scaled = |d: &dyn Fn(usize) -> C64| Mat::from_fn(rows, nv, |r, c| vm[(r, c)] * d(r));
    let vmf = scaled(&|r| C64::new((c_d[r].norm_sqr() + alpha2).sqrt(), 0.0));
    let vmg = scaled(&|r| C64::new((a_d[r].norm_sqr() + alpha2).sqrt(), 0.0));
    let va = scaled(&|r| a_d[r].conj());
    let vc = scaled(&|r| c_d[r].conj());

    let rr = adj_mul(rm.as_ref(), rm.as_ref());
    let mut gram = Mat::<C64>::zeros(2 * nv, 2 * nv);
    {
        let gff = &rr + adj_mul(vmf.as_ref(), vmf.as_ref());
        let ggg = &rr + adj_mul(vmg.as_ref(), vmg.as_ref());
        let gfg = adj_mul(vc.as_ref(), rm.as_ref()) - adj_mul(rm.as_ref(), va.as_ref());
        gram.as_mut().submatrix_mut(0, 0, nv, nv).copy_from(&gff);
        gram.as_mut().submatrix_mut(nv, nv, nv, nv).copy_from(&ggg);
        gram.as_mut().submatrix_mut(0, nv, nv, nv).copy_from(&gfg);
        gram.as_mut().submatrix_mut(nv, 0, nv, nv).copy_from(gfg.adjoint());
    }

    let nu = sz.n_unknown();
    let mut b = Mat::<C64>::zeros(2 * nv, nu);
    {
        let bfe = adj_mul(rm.as_ref(), tm.as_ref());
        let bge = -adj_mul(va.as_ref(), tm.as_ref());
        let bfh = adj_mul(vc.as_ref(), tm.as_ref());
        b.as_mut().submatrix_mut(0, 0, nv, 3 * ns).copy_from(&bfe);
        b.as_mut().submatrix_mut(nv, 0, nv, 3 * ns).copy_from(&bge);
        b.as_mut().submatrix_mut(0, 3 * ns, nv, 3 * ns).copy_from(&bfh);
        b.as_mut().submatrix_mut(nv, 3 * ns, nv, 3 * ns).copy_from(&bfe);
    }

    face_terms(inp, &sz, &tests, &traces, &gx, &gw, &mut b, nf)?;

    let mut l = Mat::<C64>::zeros(2 * nv, 1);
    if inp.load.is_some() {
        let lf = adj_mul(vm.as_ref(), col(&fload).as_ref());
        let la = adj_mul(vm.as_ref(), col(&aload).as_ref());
        l.as_mut().submatrix_mut(0, 0, nv, 1).copy_from(&lf);
        l.as_mut().submatrix_mut(nv, 0, nv, 1).copy_from(&la);
    }
    Ok(ElementSystem { sizes: sz, gram, b, l })
}

#[allow(clippy::too_many_arguments)]
fn face_terms(
    inp: &ElementInput<'_>,
    sz: &LocalSizes,
    tests: &[NedFn],
    traces: &[TraceFn],
    gx: &[f64],
    gw: &[f64],
    b: &mut Mat<C64>,
    nf: usize,
) -> Result<()> {
    let nq = gx.len();
    let nv = sz.n_test;
    let nt = sz.n_trace;
    let rows = 3 * nq * nq;
    for m in 0..3 {
        for pos in 0..2 {
            let (ax, bx) = other_axes(m);
            let mut vf = Mat::<C64>::zeros(rows, nv);
            let mut tn = Mat::<C64>::zeros(rows, nt);
            let mut tt = Mat::<C64>::zeros(rows, nt);
            let impedance = if m == 2 && pos == 1 { inp.top_impedance } else { None };
            let mut ip = 0;
            for i in 0..nq {
                for j in 0..nq {
                    let mut r = [0.0; 3];
                    r[m] = pos as f64;
                    r[ax] = gx[i];
                    r[bx] = gx[j];
                    let pt = point_geometry(inp.map, inp.z0, inp.h, r)?;
                    let t = |c: usize| [pt.jac[0][c], pt.jac[1][c], pt.jac[2][c]];
                    let sign = if pos == 1 { 1.0 } else { -1.0 };
                    let cr = cross_real(t((m + 1) % 3), t((m + 2) % 3));
                    let nvec = [sign * cr[0], sign * cr[1], sign * cr[2]];
                    let area = (nvec[0] * nvec[0] + nvec[1] * nvec[1] + nvec[2] * nvec[2]).sqrt();
                    let sw = (gw[i] * gw[j]).sqrt();
                    let tq = Tables1D::at(sz.q, r);
                    for (n, f) in tests.iter().enumerate() {
                        let (v, _) = physical_ned(f, &tq, &pt);
                        for comp in 0..3 {
                            vf[(3 * ip + comp, n)] = C64::new(sw * v[comp], 0.0);
                        }
                    }
                    let tp = Tables1D::at(sz.p, r);
                    for (n, tr) in traces.iter().enumerate() {
                        let (e, _) = physical_ned(&tr.f, &tp, &pt);
                        let ne = cross_real(nvec, e);
                        for comp in 0..3 {
                            tn[(3 * ip + comp, n)] = C64::new(sw * ne[comp], 0.0);
                        }
                        if impedance.is_some() {
                            tt[(3 * ip, n)] = C64::new(sw * area * e[0], 0.0);
                            tt[(3 * ip + 1, n)] = C64::new(sw * area * e[1], 0.0);
                        }
                    }
                    ip += 1;
                }
            }
            let one = C64::new(1.0, 0.0);
            adj_mul_add(b.as_mut().submatrix_mut(0, nf, nv, nt), vf.as_ref(), tn.as_ref(), one);
            match impedance {
                None => adj_mul_add(b.as_mut().submatrix_mut(nv, nf + nt, nv, nt), vf.as_ref(), tn.as_ref(), one),
                Some(zs) => {
                    if !(zs > 0.0) {
                        return Err(Error::Precondition(format!("impedance must be positive, got {zs}")));
                    }
                    adj_mul_add(b.as_mut().submatrix_mut(nv, nf, nv, nt), vf.as_ref(), tt.as_ref(), C64::new(-1.0 / zs, 0.0));
                }
            }
        }
    }
    Ok(())
}

impl ElementSystem {
    /// Minimum-residual normal equations `Bᴴ G⁻¹ B x = Bᴴ G⁻¹ l`.
    pub fn normal(&self) -> Result<NormalSystem> {
        let lg = cholesky(self.gram.as_ref())?;
        let mut w = self.b.clone();
        lower_solve(lg.as_ref(), &mut w);
        let mut y = self.l.clone();
        lower_solve(lg.as_ref(), &mut y);
        let a = adj_mul(w.as_ref(), w.as_ref());
        let r = adj_mul(w.as_ref(), y.as_ref());
        let l_norm2 = (0..y.nrows()).map(|i| y[(i, 0)].norm_sqr()).sum();
        Ok(NormalSystem { sizes: self.sizes, a, r, l_norm2 })
    }
}

impl NormalSystem {
    /// Eliminates the L2 field block.
    pub fn condense(&self) -> Result<Condensed> {
        let nf = self.sizes.n_field();
        let nt = 2 * self.sizes.n_trace;
        let aff = self.a.as_ref().submatrix(0, 0, nf, nf).to_owned();
        let aft = self.a.as_ref().submatrix(0, nf, nf, nt).to_owned();
        let atf = self.a.as_ref().submatrix(nf, 0, nt, nf);
        let att = self.a.as_ref().submatrix(nf, nf, nt, nt);
        let lf = cholesky(aff.as_ref())?;
        let mut x = aft;
        chol_solve(lf.as_ref(), &mut x);
        let mut x0 = self.r.as_ref().submatrix(0, 0, nf, 1).to_owned();
        chol_solve(lf.as_ref(), &mut x0);
        let s = att.to_owned() - mul(atf, x.as_ref());
        let g = self.r.as_ref().submatrix(nf, 0, nt, 1).to_owned() - mul(atf, x0.as_ref());
        Ok(Condensed { sizes: self.sizes, s, g, x, x0 })
    }

    /// `‖B x − l‖²_{V'}` for a full local coefficient vector.
    pub fn residual2(&self, x: &[C64]) -> f64 {
        let xm = col(x);
        let ax = mul(self.a.as_ref(), xm.as_ref());
        let mut xax = C64::new(0.0, 0.0);
        let mut xr = C64::new(0.0, 0.0);
        for i in 0..x.len() {
            xax += x[i].conj() * ax[(i, 0)];
            xr += x[i].conj() * self.r[(i, 0)];
        }
        (xax.re - 2.0 * xr.re + self.l_norm2).max(0.0)
    }
}

impl Condensed {
    /// Recovers `[E, H]` coefficients from the local trace vector.
    pub fn recover(&self, xt: &[C64]) -> Vec<C64> {
        let xm = col(xt);
        let xx = mul(self.x.as_ref(), xm.as_ref());
        (0..self.x0.nrows()).map(|i| self.x0[(i, 0)] - xx[(i, 0)]).collect()
    }
}

/// Evaluates recovered `E, H` at reference point `r` from the field coefficients.
pub fn eval_fields(p: usize, coeffs: &[C64], r: [f64; 3]) -> (CVec3, CVec3) {
    let ns = p * p * p;
    let t = Tables1D::at(p, r);
    let mut e = [C64::new(0.0, 0.0); 3];
    let mut h = [C64::new(0.0, 0.0); 3];
    for (n, idx) in l2_index(p).iter().enumerate() {
        let val = t.psi[0][idx[0]] * t.psi[1][idx[1]] * t.psi[2][idx[2]];
        for comp in 0..3 {
            e[comp] += coeffs[comp * ns + n] * val;
            h[comp] += coeffs[3 * ns + comp * ns + n] * val;
        }
    }
    (e, h)
}

/// Evaluates a trace function combination (tangential trace space) at a reference point.
pub fn eval_trace(map: &QuadMap, z0: f64, h: f64, p: usize, coeffs: &[C64], r: [f64; 3]) -> Result<CVec3> {
    let pt = point_geometry(map, z0, h, r)?;
    let t = Tables1D::at(p, r);
    let mut out = [C64::new(0.0, 0.0); 3];
    for (n, tr) in trace_functions(p).iter().enumerate() {
        let (v, _) = physical_ned(&tr.f, &t, &pt);
        for comp in 0..3 {
            out[comp] += coeffs[n] * v[comp];
        }
    }
    Ok(out)
}

/// Values of each trace function on the face `(normal, pos)` at in-face coordinates.
/// Returns the physical point, the outward area vector and the physical function values.
pub fn trace_values_on_face(
    map: &QuadMap,
    z0: f64,
    h: f64,
    p: usize,
    normal: usize,
    pos: usize,
    uv: [f64; 2],
) -> Result<([f64; 3], [f64; 3], Vec<[f64; 3]>)> {
    let (ax, bx) = other_axes(normal);
    let mut r = [0.0; 3];
    r[normal] = pos as f64;
    r[ax] = uv[0];
    r[bx] = uv[1];
    let pt = point_geometry(map, z0, h, r)?;
    let t = |c: usize| [pt.jac[0][c], pt.jac[1][c], pt.jac[2][c]];
    let sign = if pos == 1 { 1.0 } else { -1.0 };
    let cr = cross_real(t((normal + 1) % 3), t((normal + 2) % 3));
    let tab = Tables1D::at(p, r);
    let vals = trace_functions(p).iter().map(|tr| physical_ned(&tr.f, &tab, &pt).0).collect();
    Ok((pt.x, [sign * cr[0], sign * cr[1], sign * cr[2]], vals))
}

/// Physical point of a reference point.
pub fn reference_to_physical(map: &QuadMap, z0: f64, h: f64, r: [f64; 3]) -> [f64; 3] {
    let xy = map.point(r[0], r[1]);
    [xy[0], xy[1], z0 + h * r[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::dense::hermitian_defect;

    fn unit_map() -> QuadMap {
        QuadMap::Bilinear { v: [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] }
    }

    #[test]
    fn gram_is_hermitian_positive_definite() {
        let map = QuadMap::Bilinear { v: [[0.0, 0.0], [1.2, 0.1], [1.0, 0.9], [-0.1, 1.1]] };
        let eps = |_: [f64; 3]| C64::new(2.1, 0.01);
        let st = |_: f64| C64::new(1.0, -0.3);
        let inp = ElementInput { map: &map, z0: 0.0, h: 0.7, p: 2, dp: 1, k0: 3.0, k_env: 2.0, alpha: 1.0, eps: &eps, stretch: &st, top_impedance: None, load: None };
        let sys = element_system(&inp).unwrap();
        assert!(hermitian_defect(sys.gram.as_ref()) < 1e-12);
        cholesky(sys.gram.as_ref()).unwrap();
    }

    #[test]
    fn curl_of_gradient_like_fields_vanish_through_mapping() {
        // Nédélec lowest-order sum along one axis: u = ψ_0 (φ_0 + φ_1) = 1, a constant field
        let map = QuadMap::Bilinear { v: [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]] };
        let pt = point_geometry(&map, 0.0, 1.0, [0.3, 0.4, 0.5]).unwrap();
        let tab = Tables1D::at(1, pt.r);
        let mut total = [0.0; 3];
        let mut curl = [0.0; 3];
        for b in 0..2 {
            for d in 0..2 {
                let (v, c) = physical_ned(&NedFn { comp: 0, a: 0, b, d }, &tab, &pt);
                for i in 0..3 {
                    total[i] += v[i];
                    curl[i] += c[i];
                }
            }
        }
        assert!((total[0] - 0.5).abs() < 1e-14 && total[1].abs() < 1e-14);
        assert!(curl.iter().all(|c| c.abs() < 1e-14));
        let _ = unit_map();
    }
}
