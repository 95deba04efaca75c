//! TOML run configuration. Every block is optional and fully defaulted; unknown keys are
//! rejected.
//!
//! ```toml
//! [fiber]            # µm, nm
//! r_core = 12.7
//! [discretization]   # µm
//! length = 200.0
//! p = 2
//! [boundary]
//! mode = "formulation1"   # impedance | formulation1 | formulation2
//! k_env = 8.5             # µm⁻¹
//! pml_start = 100.0       # µm
//! [amplifier]        # W, s
//! pump_power = 5.0
//! [output]
//! grid = [32, 32, 64]
//! ```

use serde::{Deserialize, Serialize};

use crate::amplifier::{AmplifierConfig, PolarGridConfig, ThermalParams, YbTwoLevel};
use crate::boundary::{modal_impedance, PMLConfig, PmlMode, StretchProfile};
use crate::error::{Error, Result};
use crate::fibermodes::{solve_modes, FiberConfig};
use crate::propagate::PropagationSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discretization {
    /// µm, including the PML
    pub length: f64,
    pub n_layers: usize,
    pub n_pml_layers: usize,
    pub p: usize,
    pub dp: usize,
    pub refinement: usize,
    pub alpha: f64,
    /// computational cladding radius (µm); `None` → 3 core radii
    pub clad_radius: Option<f64>,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization { length: 100.0, n_layers: 8, n_pml_layers: 4, p: 2, dp: 1, refinement: 1, alpha: 1e-4, clad_radius: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryBlock {
    pub mode: PmlMode,
    /// 𝗄 in the main region (µm⁻¹); `None` → k_LP of the launched mode
    pub k_env: Option<f64>,
    /// 𝗄 inside the PML for formulation 2 (µm⁻¹)
    pub k_env_pml: Option<f64>,
    /// µm; required for the PML modes
    pub pml_start: Option<f64>,
    pub pml_exponent: u32,
    /// envelope attenuation across the PML for the launched mode (dB)
    pub decay_db: f64,
    /// Ω; `None` → modal impedance of the launched mode
    pub z_imp: Option<f64>,
    /// close the PML with the impedance condition instead of PEC
    pub pml_impedance_end: bool,
    pub launch_mode: String,
    /// W
    pub launch_power: f64,
}

impl Default for BoundaryBlock {
    fn default() -> Self {
        BoundaryBlock {
            mode: PmlMode::Impedance,
            k_env: None,
            k_env_pml: None,
            pml_start: None,
            pml_exponent: 3,
            decay_db: 30.0,
            z_imp: None,
            pml_impedance_end: true,
            launch_mode: "LP01".into(),
            launch_power: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmplifierBlock {
    pub seed_power: f64,
    pub hom_seed_fraction: f64,
    pub pump_power: f64,
    pub gain: YbTwoLevel,
    pub thermal: ThermalParams,
    pub grid: PolarGridConfig,
    pub tol: f64,
    pub max_iter: usize,
    pub relaxation: f64,
    pub heat_steps: usize,
    pub dt: f64,
    pub iterations_per_step: usize,
    pub min_layers_per_beat: f64,
    /// W, for `tmi-sweep`
    pub pump_sweep: Vec<f64>,
}

impl Default for AmplifierBlock {
    fn default() -> Self {
        let a = AmplifierConfig::default();
        AmplifierBlock {
            seed_power: a.seed_power,
            hom_seed_fraction: a.hom_seed_fraction,
            pump_power: a.pump_power,
            gain: a.gain,
            thermal: a.thermal,
            grid: a.grid,
            tol: a.tol,
            max_iter: a.max_iter,
            relaxation: a.relaxation,
            heat_steps: a.heat_steps,
            dt: a.dt,
            iterations_per_step: a.iterations_per_step,
            min_layers_per_beat: a.min_layers_per_beat,
            pump_sweep: vec![0.0, 20.0, 40.0, 80.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    /// write field dumps
    pub field_dumps: bool,
    /// sampling grid `[nx, ny, nz]`
    pub grid: [usize; 3],
    /// z-samples of the PML decay record
    pub pml_samples: usize,
    /// z-stations of the modal power CSV
    pub power_stations: usize,
    /// transverse samples per axis of mode field dumps (`modes`); 0 disables
    pub mode_grid: usize,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { field_dumps: true, grid: [24, 24, 48], pml_samples: 64, power_stations: 17, mode_grid: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub fiber: FiberBlock,
    pub discretization: Discretization,
    pub boundary: BoundaryBlock,
    pub amplifier: AmplifierBlock,
    pub output: OutputBlock,
}

/// Fiber keys with the reference fiber as default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberBlock {
    /// µm
    pub r_core: f64,
    /// µm
    pub r_clad: f64,
    pub n_core: f64,
    pub n_clad: f64,
    /// nm
    pub lambda_nm: f64,
}

impl Default for FiberBlock {
    fn default() -> Self {
        let f = FiberConfig::reference();
        FiberBlock { r_core: f.r_core, r_clad: f.r_clad, n_core: f.n_core, n_clad: f.n_clad, lambda_nm: f.lambda_nm }
    }
}

impl RunConfig {
    /// Parses and validates; all errors are `Error::Config` with the parser's line information.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.fiber().validate()?;
        self.computational_fiber()?;
        let d = &self.discretization;
        if !(d.length > 0.0 && d.length.is_finite()) || d.n_layers == 0 {
            return Err(Error::Config("discretization.length must be positive and n_layers >= 1".into()));
        }
        if !(1..=6).contains(&d.p) || d.dp == 0 {
            return Err(Error::Config(format!("discretization.p must be in 1..=6 and dp >= 1, got p = {}, dp = {}", d.p, d.dp)));
        }
        if !(d.alpha > 0.0 && d.alpha.is_finite()) {
            return Err(Error::Config("discretization.alpha must be positive".into()));
        }
        let b = &self.boundary;
        if !(b.launch_power >= 0.0 && b.launch_power.is_finite()) {
            return Err(Error::Config("boundary.launch_power must be a non-negative power in W".into()));
        }
        if b.mode != PmlMode::Impedance {
            let l = b.pml_start.ok_or_else(|| Error::Config("PML modes need boundary.pml_start (µm)".into()))?;
            if !(l > 0.0 && l < d.length) || d.n_pml_layers == 0 {
                return Err(Error::Config(format!("boundary.pml_start must lie in (0, {}) µm with n_pml_layers >= 1, got {l}", d.length)));
            }
            if !(b.decay_db > 0.0) || b.pml_exponent < 2 {
                return Err(Error::Config("boundary.decay_db must be positive and pml_exponent >= 2".into()));
            }
        }
        let o = &self.output;
        if o.grid.iter().any(|&n| n == 0) || o.pml_samples < 8 || o.power_stations < 2 {
            return Err(Error::Config("output.grid entries must be >= 1, pml_samples >= 8, power_stations >= 2".into()));
        }
        self.amplifier_config()?.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn fiber(&self) -> FiberConfig {
        let f = &self.fiber;
        FiberConfig { r_core: f.r_core, r_clad: f.r_clad, n_core: f.n_core, n_clad: f.n_clad, lambda_nm: f.lambda_nm }
    }

    /// Fiber with the cladding truncated for the field solvers.
    pub fn computational_fiber(&self) -> Result<FiberConfig> {
        let mut f = self.fiber();
        let r = self.discretization.clad_radius.unwrap_or(3.0 * f.r_core).min(f.r_clad);
        if !(r > f.r_core) {
            return Err(Error::Config(format!("discretization.clad_radius must exceed r_core = {} µm", f.r_core)));
        }
        f.r_clad = r;
        Ok(f)
    }

    pub fn amplifier_config(&self) -> Result<AmplifierConfig> {
        let (d, a) = (&self.discretization, &self.amplifier);
        Ok(AmplifierConfig {
            length: d.length,
            n_layers: d.n_layers,
            p: d.p,
            refinement: d.refinement,
            dp: d.dp,
            alpha: d.alpha,
            seed_power: a.seed_power,
            hom_seed_fraction: a.hom_seed_fraction,
            pump_power: a.pump_power,
            gain: a.gain,
            thermal: a.thermal,
            grid: a.grid,
            tol: a.tol,
            max_iter: a.max_iter,
            relaxation: a.relaxation,
            heat_steps: a.heat_steps,
            dt: a.dt,
            iterations_per_step: a.iterations_per_step,
            min_layers_per_beat: a.min_layers_per_beat,
        })
    }

    /// Resolves envelope wavenumbers, PML strength and impedance against the launched mode.
    pub fn propagation_spec(&self) -> Result<PropagationSpec> {
        let fiber = self.computational_fiber()?;
        let (d, b) = (&self.discretization, &self.boundary);
        let modes = solve_modes(&fiber)?;
        let launched = modes
            .iter()
            .find(|m| m.label() == b.launch_mode)
            .ok_or_else(|| Error::Config(format!("boundary.launch_mode {} is not guided", b.launch_mode)))?;
        let k_main = b.k_env.unwrap_or(launched.k_lp);
        let k0 = fiber.k0();
        let boundary = match b.mode {
            PmlMode::Impedance => PMLConfig {
                mode: b.mode,
                k_env_main: k_main,
                k_env_pml: None,
                stretch: None,
                z_imp: Some(b.z_imp.unwrap_or(modal_impedance(k0, launched.k_lp))),
            },
            PmlMode::Formulation1 | PmlMode::Formulation2 => {
                let k_pml = if b.mode == PmlMode::Formulation2 {
                    Some(b.k_env_pml.ok_or_else(|| Error::Config("formulation2 needs boundary.k_env_pml (µm⁻¹)".into()))?)
                } else {
                    None
                };
                let k_tilde = launched.k_lp - k_pml.unwrap_or(k_main);
                if !(k_tilde > 0.0) {
                    return Err(Error::Config(format!("PML envelope wavenumber must stay below k_LP = {}", launched.k_lp)));
                }
                let stretch = StretchProfile::with_decay(b.pml_start.unwrap(), d.length, b.pml_exponent, k0, k_tilde, b.decay_db)?;
                PMLConfig { mode: b.mode, k_env_main: k_main, k_env_pml: k_pml, stretch: Some(stretch), z_imp: None }
            }
        };
        Ok(PropagationSpec {
            fiber,
            length: d.length,
            n_layers: d.n_layers,
            n_pml_layers: d.n_pml_layers,
            p: d.p,
            dp: d.dp,
            refinement: d.refinement,
            alpha: d.alpha,
            boundary,
            pml_impedance_end: b.pml_impedance_end,
            launch_mode: b.launch_mode.clone(),
            launch_power: b.launch_power,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_fully_defaulted() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let e = RunConfig::from_toml("[fiber]\nr_core = 12.7\nradius = 3\n").unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        assert!(RunConfig::from_toml("[nonsense]\n").is_err());
    }

    #[test]
    fn pml_modes_need_a_start() {
        assert!(RunConfig::from_toml("[boundary]\nmode = \"formulation1\"\nk_env = 8.5\n").is_err());
    }
}
