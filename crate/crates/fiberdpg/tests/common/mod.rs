#![allow(dead_code)]

use std::sync::Arc;

use fiberdpg::fem::element::CVec3;
use fiberdpg::fem::geometry::CrossSection;
use fiberdpg::fem::mesh::{build_mesh, Mesh};
use fiberdpg::fem::solver::*;
use fiberdpg::envelope::EnvelopeAnsatz;
use fiberdpg::fibermodes::*;
use fiberdpg::C64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Reference fiber with the cladding cut at three core radii.
pub fn desk_fiber() -> FiberConfig {
    let mut f = FiberConfig::reference();
    f.r_clad = 3.0 * f.r_core;
    f
}

pub fn eps_of(fiber: FiberConfig) -> ScalarField {
    Arc::new(move |x| {
        let n = fiber.index_at(x[0].hypot(x[1]));
        C64::new(n * n, 0.0)
    })
}

pub fn lp01_inlet(fiber: &FiberConfig) -> (LPMode, BoundaryData) {
    let m = solve_modes(fiber).unwrap()[0];
    let prof = ModeProfile::new(m, fiber, Polarization::X, Rotation::Cos);
    let data = BoundaryData::Electric(Some(Arc::new(move |x: [f64; 3]| {
        let v = prof.vector(x[0], x[1]);
        [C64::new(v[0], 0.0), C64::new(v[1], 0.0), ZERO]
    })));
    (m, data)
}

/// x-polarized plane wave `E_x = e^{−i k z}`, `H_y = n E_x`, in a PEC/PMC box.
pub fn plane_wave_problem(p: usize, nz: usize, k_env: f64) -> (Problem, impl Fn([f64; 3]) -> (CVec3, CVec3) + Sync + Clone) {
    let (k0, n) = (2.0f64, 1.5f64);
    let k = k0 * n;
    let cs = CrossSection::rectangle(0.5, 0.5, 1, 1).unwrap();
    let mesh = Arc::new(Mesh::new(cs, Mesh::uniform_levels(2.0, nz).unwrap()).unwrap());
    let exact = move |x: [f64; 3]| {
        let ph = C64::from_polar(1.0, -(k - k_env) * x[2]);
        ([ph, ZERO, ZERO], [ZERO, ph * n, ZERO])
    };
    let mut pr = Problem::new(mesh, p, k0, EnvelopeAnsatz::uniform(k_env).unwrap(), Arc::new(move |_| C64::new(n * n, 0.0)));
    let ex = exact;
    pr.inlet = BoundaryData::Electric(Some(Arc::new(move |x| ex(x).0)));
    pr.outlet = BoundaryData::Impedance(1.0 / n);
    (pr, exact)
}

/// Manufactured physical field `E = ψ e^{−iβz} x̂`, `H = (β/k0) ψ e^{−iβz} ŷ` on the desk fiber with
/// `ψ = cos(π r / 2R)`, vanishing on the PEC wall. Returns the problem with its source and the exact
/// field.
pub fn fiber_mms(fiber: FiberConfig, length: f64, n_layers: usize, refinement: usize, p: usize, beta: f64) -> (Problem, impl Fn([f64; 3]) -> (CVec3, CVec3) + Sync + Clone) {
    let k0 = fiber.k0();
    let big_r = fiber.r_clad;
    let q = std::f64::consts::PI / (2.0 * big_r);
    let psi = move |x: f64, y: f64| {
        let r = x.hypot(y);
        let c = (q * r).cos();
        // ∂ψ/∂x, ∂ψ/∂y with sin(qr)/r regular at the axis
        let s = if r > 1e-12 { (q * r).sin() / r } else { q };
        (c, -q * s * x, -q * s * y)
    };
    let exact = move |x: [f64; 3]| {
        let (c, _, _) = psi(x[0], x[1]);
        let ph = C64::from_polar(1.0, -beta * x[2]);
        ([ph * c, ZERO, ZERO], [ZERO, ph * (c * beta / k0), ZERO])
    };
    let source = move |x: [f64; 3]| {
        let (c, px, py) = psi(x[0], x[1]);
        let ph = C64::from_polar(1.0, -beta * x[2]);
        let n = fiber.index_at(x[0].hypot(x[1]));
        let ff = [ZERO, ZERO, -ph * py];
        let fa = [I * ph * c * (beta * beta / k0 - k0 * n * n), ZERO, ph * (beta / k0 * px)];
        (ff, fa)
    };
    let mesh = Arc::new(build_mesh(&fiber, length, n_layers, refinement).unwrap());
    let mut pr = Problem::new(mesh, p, k0, EnvelopeAnsatz::uniform(0.0).unwrap(), eps_of(fiber));
    let ex = exact;
    pr.inlet = BoundaryData::Electric(Some(Arc::new(move |x| ex(x).0)));
    pr.outlet = BoundaryData::Electric(Some(Arc::new(move |x| ex(x).0)));
    pr.source = Some(Arc::new(source));
    (pr, exact)
}

/// Combined relative L2 error of `(E, H)`.
pub fn combined(err: (f64, f64)) -> f64 {
    err.0.hypot(err.1) / std::f64::consts::SQRT_2
}

pub fn rate(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}
