//! LP modes of weakly-guiding step-index fibers.

use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j, bessel_j_prime, bessel_j_zeros, bessel_j_zeros_below, bessel_k, bessel_k_log_derivative};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::units::{k0_from_lambda_nm, omega_from_lambda_nm, PER_UM_TO_PER_MM};

/// Step-index fiber. Radii in µm, vacuum wavelength in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub r_core: f64,
    pub r_clad: f64,
    pub n_core: f64,
    pub n_clad: f64,
    pub lambda_nm: f64,
}

impl FiberConfig {
    /// The ytterbium-doped reference fiber used throughout the tests.
    pub fn reference() -> Self {
        FiberConfig { r_core: 12.7, r_clad: 127.0, n_core: 1.4512, n_clad: 1.4500, lambda_nm: 1064.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.r_core, self.r_clad, self.n_core, self.n_clad, self.lambda_nm].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("fiber parameters must be finite".into()));
        }
        if self.r_core <= 0.0 || self.r_clad <= self.r_core {
            return Err(Error::Config(format!("need 0 < r_core < r_clad, got {} and {}", self.r_core, self.r_clad)));
        }
        if self.lambda_nm <= 0.0 {
            return Err(Error::Config("wavelength must be positive".into()));
        }
        if !(self.n_clad >= 1.0 && self.n_clad < self.n_core) {
            return Err(Error::Config(format!("need 1 <= n_clad < n_core, got {} and {}", self.n_clad, self.n_core)));
        }
        if (self.n_core - self.n_clad) / self.n_core > 0.05 {
            return Err(Error::Config("index contrast exceeds the weakly-guiding limit 0.05".into()));
        }
        Ok(())
    }

    /// Vacuum wavenumber ω/c in µm⁻¹.
    pub fn k0(&self) -> f64 {
        k0_from_lambda_nm(self.lambda_nm)
    }

    pub fn omega(&self) -> f64 {
        omega_from_lambda_nm(self.lambda_nm)
    }

    pub fn k_core(&self) -> f64 {
        self.k0() * self.n_core
    }

    pub fn k_clad(&self) -> f64 {
        self.k0() * self.n_clad
    }

    pub fn na(&self) -> f64 {
        (self.n_core * self.n_core - self.n_clad * self.n_clad).sqrt()
    }

    pub fn v_number(&self) -> f64 {
        self.r_core * self.k0() * self.na()
    }

    /// Refractive index at transverse radius `r` (µm).
    pub fn index_at(&self, r: f64) -> f64 {
        if r <= self.r_core {
            self.n_core
        } else {
            self.n_clad
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LPMode {
    pub l: u32,
    pub p: u32,
    /// transverse core eigenvalue ζ (µm⁻¹)
    pub zeta: f64,
    /// cladding decay rate χ (µm⁻¹)
    pub chi: f64,
    /// propagation constant (µm⁻¹)
    pub k_lp: f64,
    pub cutoff_v: Option<f64>,
    /// normalized core parameters u = ζ r_core and w = χ r_core
    pub u: f64,
    pub w: f64,
}

impl LPMode {
    pub fn label(&self) -> String {
        format!("LP{}{}", self.l, self.p)
    }
}

/// `u J_l'(u)/J_l(u) − w K_l'(w)/K_l(w)` with `u = ζ r_core`, `w = sqrt(V² − u²)`.
pub fn characteristic_residual(l: u32, zeta: f64, config: &FiberConfig) -> Result<f64> {
    let v = config.v_number();
    let u = zeta * config.r_core;
    let w2 = v * v - u * u;
    if !(u > 0.0) || !(w2 > 0.0) {
        return Err(Error::Domain(format!("r_core·ζ = {u} outside the guided window (0, {v})")));
    }
    residual_u(l, u, w2.sqrt())
}

fn residual_u(l: u32, u: f64, w: f64) -> Result<f64> {
    let j = bessel_j(l, u);
    if j == 0.0 {
        return Err(Error::Numeric(format!("J_{l} vanishes at u = {u}")));
    }
    Ok(u * bessel_j_prime(l, u) / j - bessel_k_log_derivative(l, w))
}

/// All guided LP modes, sorted by descending propagation constant.
pub fn solve_modes(config: &FiberConfig) -> Result<Vec<LPMode>> {
    config.validate()?;
    let v = config.v_number();
    let k_core = config.k_core();
    let mut modes = Vec::new();
    for l in 0u32.. {
        let roots = roots_for_order(l, v);
        if roots.is_empty() {
            break;
        }
        for (i, u) in roots.into_iter().enumerate() {
            let w = (v * v - u * u).sqrt();
            let zeta = u / config.r_core;
            let chi = w / config.r_core;
            let p = i as u32 + 1;
            modes.push(LPMode {
                l,
                p,
                zeta,
                chi,
                k_lp: (k_core * k_core - zeta * zeta).sqrt(),
                cutoff_v: cutoff_v(l, p),
                u,
                w,
            });
        }
    }
    modes.sort_by(|a, b| b.k_lp.partial_cmp(&a.k_lp).unwrap());
    Ok(modes)
}

/// Roots in `u` of the characteristic equation for azimuthal order `l`.
fn roots_for_order(l: u32, v: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    edges.extend(bessel_j_zeros_below(l, v));
    edges.push(v);
    let mut roots = Vec::new();
    for win in edges.windows(2) {
        let (a, b) = (win[0], win[1]);
        let delta = 1e-10 * (1.0 + b);
        let lo = if a == 0.0 { 1e-9 * v } else { a + delta };
        let hi = if b == v { v * (1.0 - 1e-13) } else { b - delta };
        if hi <= lo {
            continue;
        }
        let f = |u: f64| residual_u(l, u, (v * v - u * u).sqrt()).unwrap_or(f64::NAN);
        let (flo, fhi) = (f(lo), f(hi));
        if !(flo > 0.0 && fhi < 0.0) {
            continue;
        }
        let (mut x0, mut x1) = (lo, hi);
        while x1 - x0 > 1e-12 * v.max(1.0) * 1e-3 {
            let m = 0.5 * (x0 + x1);
            if m <= x0 || m >= x1 {
                break;
            }
            if f(m) > 0.0 {
                x0 = m;
            } else {
                x1 = m;
            }
        }
        roots.push(0.5 * (x0 + x1));
    }
    roots
}

/// Cutoff V-number of LP_lp; `None` for the fundamental mode.
pub fn cutoff_v(l: u32, p: u32) -> Option<f64> {
    assert!(p >= 1, "radial order starts at 1");
    match (l, p) {
        (0, 1) => None,
        (0, p) => Some(bessel_j_zeros(1, p as usize - 1)[p as usize - 2]),
        (l, p) => Some(bessel_j_zeros(l - 1, p as usize)[p as usize - 1]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beat {
    /// k_01 − k_lp in mm⁻¹
    pub delta_k: f64,
    /// 2π/Δk in mm
    pub beat_length: f64,
    pub wavelengths_per_beat: f64,
}

/// Beats of every mode against the first entry (the fundamental mode).
pub fn beat_lengths(modes: &[LPMode]) -> Result<Vec<Beat>> {
    if modes.len() < 2 {
        return Err(Error::Precondition("beat lengths need at least two modes".into()));
    }
    let k01 = modes[0].k_lp;
    modes[1..]
        .iter()
        .map(|m| {
            let dk = k01 - m.k_lp;
            if dk == 0.0 {
                return Err(Error::Degenerate(format!("{} is degenerate with the fundamental mode", m.label())));
            }
            let dk_mm = dk * PER_UM_TO_PER_MM;
            Ok(Beat { delta_k: dk_mm, beat_length: 2.0 * std::f64::consts::PI / dk_mm, wavelengths_per_beat: k01 / dk })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    X,
    Y,
}

/// Azimuthal dependence `cos(lφ)` or `sin(lφ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    Cos,
    Sin,
}

/// Analytic transverse profile of one polarization/rotation member of an LP mode,
/// normalized to unit L2 norm over the disk of radius `r_clad`.
#[derive(Debug, Clone, Copy)]
pub struct ModeProfile {
    pub mode: LPMode,
    pub polarization: Polarization,
    pub rotation: Rotation,
    r_core: f64,
    r_clad: f64,
    j_core: f64,
    k_core: f64,
    scale: f64,
}

impl ModeProfile {
    pub fn new(mode: LPMode, config: &FiberConfig, polarization: Polarization, rotation: Rotation) -> Self {
        let mut prof = ModeProfile {
            mode,
            polarization,
            rotation,
            r_core: config.r_core,
            r_clad: config.r_clad,
            j_core: bessel_j(mode.l, mode.u),
            k_core: bessel_k(mode.l, mode.w),
            scale: 1.0,
        };
        let angular = if mode.l == 0 {
            if rotation == Rotation::Sin {
                panic!("LP0p modes have no sine rotation");
            }
            2.0 * std::f64::consts::PI
        } else {
            std::f64::consts::PI
        };
        let radial = prof.radial_norm_squared();
        prof.scale = 1.0 / (angular * radial).sqrt();
        prof
    }

    /// Every polarization/rotation member of `mode`.
    pub fn members(mode: LPMode, config: &FiberConfig) -> Vec<ModeProfile> {
        let rotations: &[Rotation] = if mode.l == 0 { &[Rotation::Cos] } else { &[Rotation::Cos, Rotation::Sin] };
        let mut out = Vec::new();
        for &pol in &[Polarization::X, Polarization::Y] {
            for &rot in rotations {
                out.push(ModeProfile::new(mode, config, pol, rot));
            }
        }
        out
    }

    fn radial_norm_squared(&self) -> f64 {
        let (x, w) = gauss_legendre(40);
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            let r = xi * self.r_core;
            s += wi * self.r_core * r * self.radial(r).powi(2);
        }
        let pieces = 64;
        let span = (self.r_clad - self.r_core) / pieces as f64;
        for k in 0..pieces {
            let a = self.r_core + k as f64 * span;
            for (xi, wi) in x.iter().zip(&w) {
                let r = a + xi * span;
                s += wi * span * r * self.radial(r).powi(2);
            }
        }
        s
    }

    /// Unnormalized radial factor: `J_l(ζr)/J_l(u)` in the core, `K_l(χr)/K_l(w)` outside.
    pub fn radial(&self, r: f64) -> f64 {
        let m = &self.mode;
        if r <= self.r_core {
            bessel_j(m.l, m.zeta * r) / self.j_core
        } else {
            bessel_k(m.l, m.chi * r) / self.k_core
        }
    }

    /// Core-side and cladding-side radial factors evaluated at `r_core`.
    pub fn interface_values(&self) -> (f64, f64) {
        let m = &self.mode;
        (bessel_j(m.l, m.zeta * self.r_core) / self.j_core, bessel_k(m.l, m.chi * self.r_core) / self.k_core)
    }

    /// Scalar amplitude ψ(x, y) (µm⁻¹ so that ∫|ψ|² dA = 1 with dA in µm²).
    pub fn scalar(&self, x: f64, y: f64) -> f64 {
        let r = x.hypot(y);
        let phi = y.atan2(x);
        let l = self.mode.l as f64;
        let ang = match self.rotation {
            Rotation::Cos => (l * phi).cos(),
            Rotation::Sin => (l * phi).sin(),
        };
        self.scale * self.radial(r) * ang
    }

    /// Transverse vector profile.
    pub fn vector(&self, x: f64, y: f64) -> [f64; 3] {
        let s = self.scalar(x, y);
        match self.polarization {
            Polarization::X => [s, 0.0, 0.0],
            Polarization::Y => [0.0, s, 0.0],
        }
    }
}

/// Structured sampling grids over the fiber cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransverseGrid {
    Cartesian { nx: usize, ny: usize, half_width: f64 },
    Polar { nr: usize, nphi: usize, r_max: f64 },
}

impl TransverseGrid {
    pub fn points(&self) -> Vec<(f64, f64)> {
        match *self {
            TransverseGrid::Cartesian { nx, ny, half_width } => {
                let mut pts = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        let x = -half_width + 2.0 * half_width * (i as f64 + 0.5) / nx as f64;
                        let y = -half_width + 2.0 * half_width * (j as f64 + 0.5) / ny as f64;
                        pts.push((x, y));
                    }
                }
                pts
            }
            TransverseGrid::Polar { nr, nphi, r_max } => {
                let mut pts = Vec::with_capacity(nr * nphi);
                for j in 0..nphi {
                    for i in 0..nr {
                        let r = r_max * i as f64 / (nr - 1).max(1) as f64;
                        let phi = 2.0 * std::f64::consts::PI * j as f64 / nphi as f64;
                        pts.push((r * phi.cos(), r * phi.sin()));
                    }
                }
                pts
            }
        }
    }

    pub fn dims(&self) -> [usize; 2] {
        match *self {
            TransverseGrid::Cartesian { nx, ny, .. } => [nx, ny],
            TransverseGrid::Polar { nr, nphi, .. } => [nr, nphi],
        }
    }
}

/// Sampled transverse vector profile; index `i + n0 * j` for grid index `(i, j)`.
#[derive(Debug, Clone)]
pub struct ModeField {
    pub grid: TransverseGrid,
    pub profile: ModeProfile,
    pub values: Vec<[f64; 3]>,
}

/// Samples an LP mode (cosine rotation unless `rotation` says otherwise) on `grid`.
pub fn mode_field(mode: LPMode, config: &FiberConfig, polarization: Polarization, rotation: Rotation, grid: TransverseGrid) -> ModeField {
    let profile = ModeProfile::new(mode, config, polarization, rotation);
    let values = grid
        .points()
        .into_iter()
        .map(|(x, y)| if x.hypot(y) <= config.r_clad { profile.vector(x, y) } else { [0.0; 3] })
        .collect();
    ModeField { grid, profile, values }
}
