//! Continuous-level envelope algebra on sampled fields.
//!
//! A physical field `E` is written as `E = 𝖤 · exp(−i 𝗄 z)`. The first-order envelope
//! operator acting on `(𝖤, 𝖧)` is
//!
//! ```text
//! row 1: −iωε 𝖤 + (∇× − i𝗄 e_z×) 𝖧
//! row 2: (∇× − i𝗄 e_z×) 𝖤 + iωμ0 𝖧
//! ```
//!
//! Sampled fields live on uniform boxes with lengths in µm. The operator itself is
//! evaluated in SI units (derivatives are rescaled to m⁻¹).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const PER_UM_TO_PER_M: f64 = 1e6;

pub type CVec3 = [C64; 3];

/// `e_z × v = (−v_y, v_x, 0)`.
pub fn rotate_ez(v: CVec3) -> CVec3 {
    [-v[1], v[0], C64::new(0.0, 0.0)]
}

pub fn cross(a: CVec3, b: CVec3) -> CVec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Envelope wavenumber, uniform or piecewise constant in z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvelopeAnsatz {
    Uniform { k: f64 },
    /// `edges = [0, l_1, ..., L]`; region `i` spans `[edges[i], edges[i+1])`.
    Piecewise { edges: Vec<f64>, ks: Vec<f64> },
}

impl EnvelopeAnsatz {
    pub fn uniform(k: f64) -> Result<Self> {
        let a = EnvelopeAnsatz::Uniform { k };
        a.validate()?;
        Ok(a)
    }

    pub fn piecewise(edges: Vec<f64>, ks: Vec<f64>) -> Result<Self> {
        let a = EnvelopeAnsatz::Piecewise { edges, ks };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvelopeAnsatz::Uniform { k } => {
                if !(*k >= 0.0 && k.is_finite()) {
                    return Err(Error::Precondition(format!("envelope wavenumber must be >= 0, got {k}")));
                }
            }
            EnvelopeAnsatz::Piecewise { edges, ks } => {
                if edges.len() < 2 || ks.len() + 1 != edges.len() {
                    return Err(Error::Precondition("piecewise ansatz needs edges.len() == ks.len() + 1 >= 2".into()));
                }
                if edges[0] != 0.0 {
                    return Err(Error::Precondition("piecewise ansatz must start at z = 0".into()));
                }
                if edges.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Precondition("region edges must be strictly increasing".into()));
                }
                if ks.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
                    return Err(Error::Precondition("envelope wavenumbers must be >= 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn region_count(&self) -> usize {
        match self {
            EnvelopeAnsatz::Uniform { .. } => 1,
            EnvelopeAnsatz::Piecewise { ks, .. } => ks.len(),
        }
    }

    /// Region containing `z`; points past the last edge belong to the last region.
    pub fn region_of(&self, z: f64) -> usize {
        match self {
            EnvelopeAnsatz::Uniform { .. } => 0,
            EnvelopeAnsatz::Piecewise { edges, ks } => {
                let mut r = 0;
                while r + 1 < ks.len() && z >= edges[r + 1] {
                    r += 1;
                }
                r
            }
        }
    }

    pub fn k_of_region(&self, region: usize) -> f64 {
        match self {
            EnvelopeAnsatz::Uniform { k } => *k,
            EnvelopeAnsatz::Piecewise { ks, .. } => ks[region],
        }
    }

    pub fn k_at(&self, z: f64) -> f64 {
        self.k_of_region(self.region_of(z))
    }

    /// Interior region boundaries.
    pub fn interfaces(&self) -> Vec<f64> {
        match self {
            EnvelopeAnsatz::Uniform { .. } => vec![],
            EnvelopeAnsatz::Piecewise { edges, .. } => edges[1..edges.len() - 1].to_vec(),
        }
    }
}

/// Uniform periodic sampling box; lengths in µm. Index `i + n0 (j + n1 k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    pub n: [usize; 3],
    pub lo: [f64; 3],
    pub len: [f64; 3],
}

impl Grid3 {
    pub fn new(n: [usize; 3], lo: [f64; 3], len: [f64; 3]) -> Self {
        Grid3 { n, lo, len }
    }

    pub fn size(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.len[axis] / self.n[axis] as f64
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let i = idx % self.n[0];
        let j = (idx / self.n[0]) % self.n[1];
        let k = idx / (self.n[0] * self.n[1]);
        [
            self.lo[0] + i as f64 * self.spacing(0),
            self.lo[1] + j as f64 * self.spacing(1),
            self.lo[2] + k as f64 * self.spacing(2),
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing(0) * self.spacing(1) * self.spacing(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Envelope,
    Physical,
}

#[derive(Debug, Clone)]
pub struct FieldPair {
    pub grid: Grid3,
    pub e: Vec<CVec3>,
    pub h: Vec<CVec3>,
    pub kind: FieldKind,
}

impl FieldPair {
    pub fn zeros(grid: Grid3, kind: FieldKind) -> Self {
        let z = [C64::new(0.0, 0.0); 3];
        FieldPair { grid, e: vec![z; grid.size()], h: vec![z; grid.size()], kind }
    }

    pub fn from_fn(grid: Grid3, kind: FieldKind, f: impl Fn([f64; 3]) -> (CVec3, CVec3)) -> Self {
        let (e, h) = (0..grid.size()).map(|i| f(grid.point(i))).unzip();
        FieldPair { grid, e, h, kind }
    }

    fn check(&self) -> Result<()> {
        let n = self.grid.size();
        if self.e.len() != n || self.h.len() != n {
            return Err(Error::Shape(format!("grid has {n} samples, fields have {} and {}", self.e.len(), self.h.len())));
        }
        Ok(())
    }

    /// Discrete L2 norm `sqrt(Σ (|E|² + |H|²) ΔV)`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.e.iter().chain(&self.h).map(|v| v.iter().map(|c| c.norm_sqr()).sum::<f64>()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// Discrete inner product `Σ (E·F̄ + H·Ḡ) ΔV`.
    pub fn inner(&self, other: &FieldPair) -> C64 {
        let dot = |a: &CVec3, b: &CVec3| a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj();
        let s: C64 = self.e.iter().zip(&other.e).map(|(a, b)| dot(a, b)).sum::<C64>()
            + self.h.iter().zip(&other.h).map(|(a, b)| dot(a, b)).sum::<C64>();
        s * self.grid.cell_volume()
    }
}

/// Differentiation rule for sampled scalar fields; returns ∂f/∂x_axis in µm⁻¹.
pub trait Derivative {
    fn derivative(&self, grid: &Grid3, f: &[C64], axis: usize) -> Vec<C64>;
}

/// Fourier differentiation on a periodic box.
#[derive(Default)]
pub struct SpectralDerivative;

/// Fourth-order central differences on a periodic box.
#[derive(Default)]
pub struct CentralDifference4;

fn lines(grid: &Grid3, axis: usize) -> Vec<Vec<usize>> {
    let [n0, n1, n2] = grid.n;
    let mut out = Vec::new();
    match axis {
        0 => {
            for k in 0..n2 {
                for j in 0..n1 {
                    out.push((0..n0).map(|i| grid.index(i, j, k)).collect());
                }
            }
        }
        1 => {
            for k in 0..n2 {
                for i in 0..n0 {
                    out.push((0..n1).map(|j| grid.index(i, j, k)).collect());
                }
            }
        }
        _ => {
            for j in 0..n1 {
                for i in 0..n0 {
                    out.push((0..n2).map(|k| grid.index(i, j, k)).collect());
                }
            }
        }
    }
    out
}

impl Derivative for SpectralDerivative {
    fn derivative(&self, grid: &Grid3, f: &[C64], axis: usize) -> Vec<C64> {
        let n = grid.n[axis];
        let mut planner = FftPlanner::new();
        let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(n);
        let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(n);
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        let dk = 2.0 * PI / grid.len[axis];
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for line in lines(grid, axis) {
            for (b, &idx) in buf.iter_mut().zip(&line) {
                *b = f[idx];
            }
            fwd.process(&mut buf);
            for (m, b) in buf.iter_mut().enumerate() {
                let freq = if 2 * m < n {
                    m as f64
                } else if 2 * m == n {
                    0.0
                } else {
                    m as f64 - n as f64
                };
                *b *= I * (freq * dk) / n as f64;
            }
            inv.process(&mut buf);
            for (b, &idx) in buf.iter().zip(&line) {
                out[idx] = *b;
            }
        }
        out
    }
}

impl Derivative for CentralDifference4 {
    fn derivative(&self, grid: &Grid3, f: &[C64], axis: usize) -> Vec<C64> {
        let n = grid.n[axis];
        let h = grid.spacing(axis);
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        for line in lines(grid, axis) {
            for m in 0..n {
                let at = |o: isize| f[line[((m as isize + o).rem_euclid(n as isize)) as usize]];
                out[line[m]] = (at(-2) - at(-1) * 8.0 + at(1) * 8.0 - at(2)) / (12.0 * h);
            }
        }
        out
    }
}

/// Material data for sampled operators, SI units.
#[derive(Debug, Clone)]
pub struct MaterialCoefficients {
    pub mu0: f64,
    /// complex permittivity per sample (F/m)
    pub epsilon: Vec<C64>,
    pub omega: f64,
}

impl MaterialCoefficients {
    pub fn uniform(grid: &Grid3, eps_r: C64, omega: f64) -> Self {
        MaterialCoefficients { mu0: crate::units::MU0, epsilon: vec![eps_r * crate::units::EPS0; grid.size()], omega }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.epsilon.len() != n {
            return Err(Error::Shape(format!("permittivity has {} samples, grid has {n}", self.epsilon.len())));
        }
        if self.epsilon.iter().any(|e| !(e.re > 0.0)) {
            return Err(Error::Precondition("Re ε must be positive".into()));
        }
        Ok(())
    }
}

fn curl(grid: &Grid3, v: &[CVec3], d: &dyn Derivative) -> Vec<CVec3> {
    let comp = |c: usize| -> Vec<C64> { v.iter().map(|x| x[c]).collect() };
    let (vx, vy, vz) = (comp(0), comp(1), comp(2));
    let s = PER_UM_TO_PER_M;
    let dy_vz = d.derivative(grid, &vz, 1);
    let dz_vy = d.derivative(grid, &vy, 2);
    let dz_vx = d.derivative(grid, &vx, 2);
    let dx_vz = d.derivative(grid, &vz, 0);
    let dx_vy = d.derivative(grid, &vy, 0);
    let dy_vx = d.derivative(grid, &vx, 1);
    (0..v.len())
        .map(|i| [(dy_vz[i] - dz_vy[i]) * s, (dz_vx[i] - dx_vz[i]) * s, (dx_vy[i] - dy_vx[i]) * s])
        .collect()
}

fn add(a: CVec3, b: CVec3) -> CVec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(s: C64, a: CVec3) -> CVec3 {
    [s * a[0], s * a[1], s * a[2]]
}

/// 𝒜u in SI units; rows returned as (row 1, row 2) in the `e` and `h` slots.
pub fn apply_envelope_operator(u: &FieldPair, ansatz: &EnvelopeAnsatz, mat: &MaterialCoefficients, d: &dyn Derivative) -> Result<FieldPair> {
    u.check()?;
    mat.validate(u.grid.size())?;
    let ce = curl(&u.grid, &u.e, d);
    let ch = curl(&u.grid, &u.h, d);
    let mut out = FieldPair::zeros(u.grid, u.kind);
    for i in 0..u.grid.size() {
        let z = u.grid.point(i)[2];
        let ik = I * ansatz.k_at(z) * PER_UM_TO_PER_M;
        let iwe = I * mat.omega * mat.epsilon[i];
        let iwm = I * mat.omega * mat.mu0;
        out.e[i] = add(add(scale(-iwe, u.e[i]), ch[i]), scale(-ik, rotate_ez(u.h[i])));
        out.h[i] = add(add(ce[i], scale(-ik, rotate_ez(u.e[i]))), scale(iwm, u.h[i]));
    }
    Ok(out)
}

/// Standard (k = 0) Maxwell operator.
pub fn apply_maxwell_operator(u: &FieldPair, mat: &MaterialCoefficients, d: &dyn Derivative) -> Result<FieldPair> {
    apply_envelope_operator(u, &EnvelopeAnsatz::Uniform { k: 0.0 }, mat, d)
}

/// L2 adjoint 𝒜*v:
/// row 1 `−conj(iωε) F + (∇× + conj(i𝗄) e_z×) G`, row 2 `(∇× + conj(i𝗄) e_z×) F + conj(iωμ0) G`.
pub fn apply_envelope_adjoint(v: &FieldPair, ansatz: &EnvelopeAnsatz, mat: &MaterialCoefficients, d: &dyn Derivative) -> Result<FieldPair> {
    v.check()?;
    mat.validate(v.grid.size())?;
    let cf = curl(&v.grid, &v.e, d);
    let cg = curl(&v.grid, &v.h, d);
    let mut out = FieldPair::zeros(v.grid, v.kind);
    for i in 0..v.grid.size() {
        let z = v.grid.point(i)[2];
        let ikc = (I * ansatz.k_at(z) * PER_UM_TO_PER_M).conj();
        let iwe = (I * mat.omega * mat.epsilon[i]).conj();
        let iwm = (I * mat.omega * mat.mu0).conj();
        out.e[i] = add(add(scale(-iwe, v.e[i]), cg[i]), scale(ikc, rotate_ez(v.h[i])));
        out.h[i] = add(add(cf[i], scale(ikc, rotate_ez(v.e[i]))), scale(iwm, v.h[i]));
    }
    Ok(out)
}

fn phase_multiply(u: &FieldPair, ansatz: &EnvelopeAnsatz, sign: f64, kind: FieldKind) -> FieldPair {
    let mut out = u.clone();
    out.kind = kind;
    for i in 0..u.grid.size() {
        let z = u.grid.point(i)[2];
        let ph = C64::from_polar(1.0, sign * ansatz.k_at(z) * z);
        out.e[i] = scale(ph, u.e[i]);
        out.h[i] = scale(ph, u.h[i]);
    }
    out
}

/// Multiply by `exp(−i 𝗄 z)`, region-aware.
pub fn envelope_to_physical(u: &FieldPair, ansatz: &EnvelopeAnsatz) -> Result<FieldPair> {
    if u.kind != FieldKind::Envelope {
        return Err(Error::Precondition("envelope_to_physical expects an envelope field".into()));
    }
    Ok(phase_multiply(u, ansatz, -1.0, FieldKind::Physical))
}

/// Multiply by `exp(+i 𝗄 z)`, region-aware.
pub fn physical_to_envelope(u: &FieldPair, ansatz: &EnvelopeAnsatz) -> Result<FieldPair> {
    if u.kind != FieldKind::Physical {
        return Err(Error::Precondition("physical_to_envelope expects a physical field".into()));
    }
    Ok(phase_multiply(u, ansatz, 1.0, FieldKind::Envelope))
}

/// Spectra of a z-line sample and of its envelope.
///
/// Convention: `S(k) = (1/N) Σ_n f(z_n) exp(+i k z_n)`, so a wave `exp(−iκz)` has its
/// peak at `k = κ`. With this convention `𝖤̂(k) = Ê(k + 𝗄)`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// ascending wavenumbers (µm⁻¹)
    pub k: Vec<f64>,
    pub physical: Vec<C64>,
    pub envelope: Vec<C64>,
    pub dk: f64,
}

impl Spectrum {
    pub fn peak_k(values: &[C64], k: &[f64]) -> f64 {
        let (i, _) = values.iter().enumerate().max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap()).unwrap();
        k[i]
    }

    /// Max deviation of `𝖤̂(k) = Ê(k + 𝗄)` when 𝗄 is a whole number of bins.
    pub fn shift_mismatch(&self, k_env: f64) -> Option<f64> {
        let bins = k_env / self.dk;
        if (bins - bins.round()).abs() > 1e-9 {
            return None;
        }
        let s = bins.round() as isize;
        let n = self.k.len() as isize;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let j = (i + s).rem_euclid(n) as usize;
            worst = worst.max((self.envelope[i as usize] - self.physical[j]).norm());
        }
        Some(worst)
    }
}

fn check_uniform(z: &[f64]) -> Result<f64> {
    if z.len() < 2 {
        return Err(Error::Precondition("need at least two samples".into()));
    }
    let dz = z[1] - z[0];
    if !(dz > 0.0) {
        return Err(Error::Precondition("z samples must increase".into()));
    }
    for w in z.windows(2) {
        if ((w[1] - w[0]) - dz).abs() > 1e-9 * dz.abs().max(1e-300) * (z.len() as f64) {
            return Err(Error::Precondition("non-uniform z sampling".into()));
        }
    }
    Ok(dz)
}

/// Direct evaluation of `(1/N) Σ f(z_n) exp(+i k z_n)` at an arbitrary wavenumber.
pub fn line_transform_at(z: &[f64], f: &[C64], k: f64) -> C64 {
    let s: C64 = z.iter().zip(f).map(|(&z, &v)| v * C64::from_polar(1.0, k * z)).sum();
    s / z.len() as f64
}

pub fn shift_spectrum(z: &[f64], samples: &[C64], k_env: f64) -> Result<Spectrum> {
    if z.len() != samples.len() {
        return Err(Error::Shape("z and samples differ in length".into()));
    }
    let dz = check_uniform(z)?;
    let n = z.len();
    let mut planner = FftPlanner::new();
    let inv = planner.plan_fft_inverse(n);
    let transform = |vals: Vec<C64>| -> Vec<C64> {
        let mut buf = vals;
        inv.process(&mut buf);
        // reference the phase to z[0]
        (0..n).map(|m| buf[m] / n as f64).collect()
    };
    let phys = transform(samples.to_vec());
    let env_samples: Vec<C64> = z.iter().zip(samples).map(|(&z, &v)| v * C64::from_polar(1.0, k_env * z)).collect();
    let env = transform(env_samples);
    let dk = 2.0 * PI / (n as f64 * dz);
    let mut order: Vec<usize> = (0..n).collect();
    let freq = |m: usize| if m < n.div_ceil(2) { m as f64 } else { m as f64 - n as f64 };
    order.sort_by(|&a, &b| freq(a).partial_cmp(&freq(b)).unwrap());
    // phases referenced to z[0]: multiply by exp(+i k z0)
    let k: Vec<f64> = order.iter().map(|&m| freq(m) * dk).collect();
    let z0 = z[0];
    let physical = order.iter().zip(&k).map(|(&m, &kk)| phys[m] * C64::from_polar(1.0, kk * z0)).collect();
    let envelope = order.iter().zip(&k).map(|(&m, &kk)| env[m] * C64::from_polar(1.0, kk * z0)).collect();
    Ok(Spectrum { k, physical, envelope, dk })
}
