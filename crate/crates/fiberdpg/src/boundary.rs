//! Outlet treatments: modal impedance, stretched-coordinate PML with a uniform envelope
//! wavenumber, and the two-region formulation with exponential trace factors.
//!
//! Stretching: `z̃ = z − i f(z)`, `f(z) = (C/k0) ((z − l)/(L − l))^n` on `[l, L)`. `C` is
//! dimensionless; `k0` plays the role of `ω` in scaled units.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{project_modes, ModeBasis};
use crate::envelope::EnvelopeAnsatz;
use crate::error::{Error, Result};
use crate::fem::solver::{Solution, Stretch};
use crate::units::Z0;
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Neper per decibel of amplitude.
pub const NEPER_PER_DB: f64 = std::f64::consts::LN_10 / 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StretchProfile {
    /// PML start (µm)
    pub l: f64,
    /// domain end (µm)
    pub length: f64,
    pub c: f64,
    pub exponent: u32,
    /// free-space wavenumber (µm⁻¹)
    pub k0: f64,
}

impl StretchProfile {
    pub fn new(l: f64, length: f64, c: f64, exponent: u32, k0: f64) -> Result<Self> {
        let s = StretchProfile { l, length, c, exponent, k0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l >= 0.0 && self.length > self.l) {
            return Err(Error::Precondition(format!("PML needs 0 <= l < L, got l = {}, L = {}", self.l, self.length)));
        }
        if !(self.c > 0.0) || self.exponent < 2 || !(self.k0 > 0.0) {
            return Err(Error::Precondition("PML needs C > 0, exponent >= 2 and k0 > 0".into()));
        }
        Ok(())
    }

    /// Amplitude `C` giving `decay_db` of envelope attenuation over the PML for `k_tilde`.
    pub fn with_decay(l: f64, length: f64, exponent: u32, k0: f64, k_tilde: f64, decay_db: f64) -> Result<Self> {
        if !(k_tilde > 0.0 && decay_db > 0.0) {
            return Err(Error::Precondition("auto-scaled PML needs k_tilde > 0 and a positive decay".into()));
        }
        // e^{−k̃ f(L)} = 10^{−dB/20}, f(L) = C/k0
        Self::new(l, length, decay_db * NEPER_PER_DB * k0 / k_tilde, exponent, k0)
    }

    pub fn f(&self, z: f64) -> f64 {
        if z <= self.l {
            return 0.0;
        }
        let t = (z.min(self.length) - self.l) / (self.length - self.l);
        self.c / self.k0 * t.powi(self.exponent as i32)
    }

    pub fn df(&self, z: f64) -> f64 {
        if z <= self.l {
            return 0.0;
        }
        let d = self.length - self.l;
        let t = (z.min(self.length) - self.l) / d;
        self.c / self.k0 * self.exponent as f64 * t.powi(self.exponent as i32 - 1) / d
    }

    /// `z̃ = z − i f(z)`.
    pub fn stretched(&self, z: f64) -> C64 {
        C64::new(z, -self.f(z))
    }

    /// `∂z̃/∂z = 1 − i f'(z)`.
    pub fn jacobian(&self, z: f64) -> C64 {
        C64::new(1.0, -self.df(z))
    }

    pub fn as_stretch(&self) -> Stretch {
        let me = *self;
        Stretch { start: self.l, s: Arc::new(move |z| me.jacobian(z)) }
    }
}

/// `diag(1, 1, ∂z̃/∂z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PMLJacobian {
    pub diag: [C64; 3],
}

impl PMLJacobian {
    pub fn at(stretch: Option<&StretchProfile>, z: f64) -> Self {
        let s = stretch.map_or(C64::new(1.0, 0.0), |p| p.jacobian(z));
        PMLJacobian { diag: [C64::new(1.0, 0.0), C64::new(1.0, 0.0), s] }
    }

    pub fn det(&self) -> C64 {
        self.diag[0] * self.diag[1] * self.diag[2]
    }
}

/// Pulled-back coefficients in scaled units: `a = i k0 |J| J⁻¹ ε_r J⁻ᵀ`,
/// `b = i 𝗄 |J|`, `c = i k0 |J| J⁻¹ J⁻ᵀ` (diagonals).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PMLCoefficients {
    pub a: [C64; 3],
    pub b: C64,
    pub c: [C64; 3],
}

pub fn pml_coefficients(z: f64, stretch: Option<&StretchProfile>, eps_r: C64, k0: f64, ansatz: &EnvelopeAnsatz) -> PMLCoefficients {
    let j = PMLJacobian::at(stretch, z);
    let det = j.det();
    let w: [C64; 3] = std::array::from_fn(|i| det / (j.diag[i] * j.diag[i]));
    PMLCoefficients { a: w.map(|d| I * k0 * eps_r * d), b: I * ansatz.k_at(z) * det, c: w.map(|d| I * k0 * d) }
}

/// `e^{−(k_eff − 𝗄) f(z)}`.
pub fn predicted_envelope_decay(k_eff: f64, k_env: f64, stretch: &StretchProfile, z: f64) -> Result<f64> {
    if z < stretch.l || z >= stretch.length {
        return Err(Error::Precondition(format!("z = {z} outside the PML [{}, {})", stretch.l, stretch.length)));
    }
    Ok((-(k_eff - k_env) * stretch.f(z)).exp())
}

/// Multipliers `(e^{+i 𝗄₁ l}, e^{+i 𝗄₂ l})` relating the shared physical trace at `z = l` to the
/// envelope traces on either side.
pub fn interface_trace_factors(l: f64, k1: f64, k2: f64) -> (C64, C64) {
    (C64::from_polar(1.0, k1 * l), C64::from_polar(1.0, k2 * l))
}

/// Modal impedance in Ω, `Z0 k0 / k_eff`.
pub fn modal_impedance(k0: f64, k_eff: f64) -> f64 {
    Z0 * k0 / k_eff
}

/// Impedance relative to free space, as used by the outlet condition. Errors on `Z ≤ 0`.
pub fn normalized_impedance(z_imp: f64) -> Result<f64> {
    if !(z_imp > 0.0 && z_imp.is_finite()) {
        return Err(Error::Precondition(format!("impedance must be positive, got {z_imp}")));
    }
    Ok(z_imp / Z0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmlMode {
    Impedance,
    Formulation1,
    Formulation2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PMLConfig {
    pub mode: PmlMode,
    /// 𝗄₁ (µm⁻¹)
    pub k_env_main: f64,
    /// 𝗄₂ (µm⁻¹), formulation 2 only
    #[serde(default)]
    pub k_env_pml: Option<f64>,
    #[serde(default)]
    pub stretch: Option<StretchProfile>,
    /// Ω, impedance mode only
    #[serde(default)]
    pub z_imp: Option<f64>,
}

impl PMLConfig {
    /// Checks the envelope wavenumbers against the guided band `(k_clad, k_core)`.
    pub fn validate(&self, k_clad: f64, k_eff_min: f64) -> Result<()> {
        match self.mode {
            PmlMode::Impedance => {
                normalized_impedance(self.z_imp.ok_or_else(|| Error::Config("impedance mode needs z_imp".into()))?)?;
            }
            PmlMode::Formulation1 => {
                let s = self.stretch.ok_or_else(|| Error::Config("formulation 1 needs a stretch profile".into()))?;
                s.validate()?;
                if !(k_eff_min - self.k_env_main > 1e-4) {
                    return Err(Error::Precondition("formulation 1 needs k_eff − k_env bounded away from zero".into()));
                }
            }
            PmlMode::Formulation2 => {
                let s = self.stretch.ok_or_else(|| Error::Config("formulation 2 needs a stretch profile".into()))?;
                s.validate()?;
                let k2 = self.k_env_pml.ok_or_else(|| Error::Config("formulation 2 needs k_env_pml".into()))?;
                if !(k2 < k_clad) {
                    return Err(Error::Precondition(format!("formulation 2 needs k_env_pml < k_clad = {k_clad}, got {k2}")));
                }
            }
        }
        Ok(())
    }

    /// Envelope ansatz over `(0, L)` implied by the mode.
    pub fn ansatz(&self, length: f64) -> Result<EnvelopeAnsatz> {
        match (self.mode, self.stretch, self.k_env_pml) {
            (PmlMode::Formulation2, Some(s), Some(k2)) => EnvelopeAnsatz::piecewise(vec![0.0, s.l, length], vec![self.k_env_main, k2]),
            _ => EnvelopeAnsatz::uniform(self.k_env_main),
        }
    }
}

/// Decay fit and reflection estimate from a solved single-mode run.
#[derive(Debug, Clone, Serialize)]
pub struct PmlReport {
    pub fitted_slope: f64,
    pub predicted_slope: f64,
    pub relative_error: f64,
    /// max|𝖤| / min|𝖤| in `Ω_c` after removing the residual envelope phase
    pub swr: f64,
    pub samples: Vec<(f64, f64, f64)>,
}

/// Where `|𝖤_t|` is read.
#[derive(Clone, Copy)]
pub enum PmlProbe<'a> {
    /// transverse point `(x, y)`
    Point([f64; 2]),
    /// modulus of the amplitude on the first basis member
    Mode(&'a ModeBasis),
}

/// Samples `|𝖤_t|` at `n_samples` planes split evenly between `Ω_c` and the PML, fits `log|𝖤_t|` against `f(z)` inside the PML and measures the
/// standing-wave ratio in the computational region. `k_env` is the PML envelope wavenumber.
pub fn validate_pml(sol: &Solution, stretch: &StretchProfile, k_eff: f64, k_env: f64, probe: PmlProbe<'_>, n_samples: usize) -> Result<PmlReport> {
    let length = sol.mesh.length();
    let mut samples = Vec::new();
    // half the samples in Ω_c, half in the PML, cell-centered
    let half = (n_samples / 2).max(1);
    let zs = (0..half).map(|i| stretch.l * (i as f64 + 0.5) / half as f64).chain((0..half).map(|i| stretch.l + (length - stretch.l) * (i as f64 + 0.5) / half as f64));
    for z in zs {
        let amp = match probe {
            PmlProbe::Point(x) => {
                let (e, _) = sol.eval([x[0], x[1], z]).ok_or_else(|| Error::Domain("probe outside the mesh".into()))?;
                (e[0].norm_sqr() + e[1].norm_sqr()).sqrt()
            }
            PmlProbe::Mode(basis) => project_modes(sol, z, basis)?.amplitudes[0].norm(),
        };
        samples.push((z, amp, stretch.f(z)));
    }
    // fit over the part of the PML where the envelope is still well above the discretization floor
    let a0 = samples.iter().filter(|s| s.0 < stretch.l).map(|s| s.1).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.0 > stretch.l && s.2 > 0.0 && s.1 > 1e-3 * a0)
        .map(|s| (s.2, s.1.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Precondition(format!("only {} usable samples inside the PML", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let fitted = sxy / sxx;
    let predicted = -(k_eff - k_env);
    let inside: Vec<f64> = samples.iter().filter(|s| s.0 < stretch.l).map(|s| s.1).collect();
    let swr = swr_of(&inside);
    Ok(PmlReport {
        fitted_slope: fitted,
        predicted_slope: predicted,
        relative_error: if predicted != 0.0 { ((fitted - predicted) / predicted).abs() } else { fitted.abs() },
        swr,
        samples,
    })
}

/// `max/min` of an amplitude record.
pub fn swr_of(amplitudes: &[f64]) -> f64 {
    let max = amplitudes.iter().cloned().fold(0.0, f64::max);
    let min = amplitudes.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stretch_derivative_at_end() {
        let s = StretchProfile::new(10.0, 20.0, 1.0, 3, 2.0).unwrap();
        let expected = C64::new(1.0, -3.0 * 1.0 / (2.0 * 10.0));
        assert!((s.jacobian(20.0) - expected).norm() < 1e-15);
        assert_eq!(s.f(5.0), 0.0);
        assert_eq!(s.jacobian(5.0), C64::new(1.0, 0.0));
    }

    #[test]
    fn coefficients_reduce_outside_pml() {
        let s = StretchProfile::new(10.0, 20.0, 1.0, 3, 2.0).unwrap();
        let an = EnvelopeAnsatz::uniform(1.5).unwrap();
        let eps = C64::new(2.1, 0.0);
        let c = pml_coefficients(3.0, Some(&s), eps, 2.0, &an);
        for i in 0..3 {
            assert!((c.a[i] - I * 2.0 * eps).norm() < 1e-15);
            assert!((c.c[i] - I * 2.0).norm() < 1e-15);
        }
        assert!((c.b - I * 1.5).norm() < 1e-15);
        let inside = pml_coefficients(18.0, Some(&s), eps, 2.0, &an);
        let sz = s.jacobian(18.0);
        assert!((inside.b - I * 1.5 * sz).norm() < 1e-15);
        assert!((inside.a[0] - I * 2.0 * eps * sz).norm() < 1e-15);
        assert!((inside.a[2] - I * 2.0 * eps / sz).norm() < 1e-14);
    }

    #[test]
    fn decay_factors() {
        let s = StretchProfile::new(10.0, 20.0, 5.0, 3, 8.0).unwrap();
        assert_eq!(predicted_envelope_decay(8.5, 8.5, &s, 15.0).unwrap(), 1.0);
        assert_eq!(predicted_envelope_decay(8.56833, 8.5, &s, 10.0).unwrap(), 1.0);
        let v = predicted_envelope_decay(8.56833, 8.5, &s, 15.0).unwrap();
        assert!((v.ln() + 0.06833 * s.f(15.0)).abs() < 1e-12);
        assert!(predicted_envelope_decay(8.56833, 8.5, &s, 20.0).is_err());
    }

    #[test]
    fn auto_scaled_amplitude_reaches_target() {
        let s = StretchProfile::with_decay(0.0, 276.0, 3, 5.9, 0.06833, 60.0).unwrap();
        let total = 0.06833 * s.c / s.k0;
        assert!((total - 60.0 * NEPER_PER_DB).abs() < 1e-12);
    }

    #[test]
    fn interface_factors() {
        let (a, b) = interface_trace_factors(0.0, 3.0, 1.0);
        assert_eq!(a, C64::new(1.0, 0.0));
        assert_eq!(b, C64::new(1.0, 0.0));
        let (a, b) = interface_trace_factors(2.0, 3.0, 3.0);
        assert_eq!(a, b);
    }

    #[test]
    fn impedance_validation() {
        assert!(normalized_impedance(0.0).is_err());
        assert!((normalized_impedance(Z0).unwrap() - 1.0).abs() < 1e-15);
    }
}
