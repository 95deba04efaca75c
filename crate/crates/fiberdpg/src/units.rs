//! Physical constants and the scaled unit system used by the field solvers.
//!
//! Lengths are in µm and wavenumbers in µm⁻¹. The magnetic field is carried as
//! `H̃ = Z0·H` (units of V/m), which turns `iωμ0` into `i k0` and `iωε` into
//! `i k0 ε_r`.

pub const C0: f64 = 299_792_458.0;
pub const MU0: f64 = 1.256_637_062_12e-6;
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);
pub const Z0: f64 = MU0 * C0;
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Square micrometres to square metres.
pub const UM2_TO_M2: f64 = 1e-12;
/// Inverse micrometres to inverse millimetres.
pub const PER_UM_TO_PER_MM: f64 = 1e3;

/// Vacuum wavenumber in µm⁻¹ for a wavelength in nm.
pub fn k0_from_lambda_nm(lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI / (lambda_nm * 1e-3)
}

/// Angular frequency in rad/s for a wavelength in nm.
pub fn omega_from_lambda_nm(lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * C0 / (lambda_nm * 1e-9)
}

/// Vacuum wavenumber in µm⁻¹ for an angular frequency in rad/s.
pub fn k0_from_omega(omega: f64) -> f64 {
    omega / C0 * 1e-6
}
