//! Co-pumped, cladding-pumped amplifier: saturable gain, pump ODE, transverse heat
//! conduction and the fixed-point coupling with the signal envelope solve.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{project_modes, CrossSectionQuadrature, ModalPowers, ModeBasis};
use crate::envelope::{cross, EnvelopeAnsatz};
use crate::error::{Error, Result};
use crate::fem::element::CVec3;
use crate::fem::mesh::{build_mesh, Mesh};
use crate::fem::solver::{solve, BoundaryData, Problem, Solution};
use crate::fibermodes::{beat_lengths, solve_modes, Beat, FiberConfig, LPMode, ModeProfile, Polarization, Rotation};
use crate::units::{PLANCK, C0, UM2_TO_M2, Z0};
use crate::C64;

/// `|Re(E × H̃̄)| / Z0` in W/m² for `E` and `H̃ = Z0 H` in V/m.
pub fn irradiance(e: CVec3, h: CVec3) -> f64 {
    let s = cross(e, h.map(|v| v.conj()));
    (s[0].re * s[0].re + s[1].re * s[1].re + s[2].re * s[2].re).sqrt() / Z0
}

/// Irradiance of the physical fields `E = 𝖤 e^{−i𝗄z}` built from an envelope pair.
pub fn irradiance_physical(e: CVec3, h: CVec3, k_env: f64, z: f64) -> f64 {
    let ph = C64::from_polar(1.0, -k_env * z);
    irradiance(e.map(|v| v * ph), h.map(|v| v * ph))
}

/// Local gain of the signal and pump (1/m) inside the doped core.
pub trait GainModel: Send + Sync {
    fn gains(&self, i_s: f64, i_p: f64) -> (f64, f64);
    fn validate(&self) -> Result<()>;
    fn photon_energies(&self) -> (f64, f64);
}

/// Two-level ytterbium model with steady-state populations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct YbTwoLevel {
    /// signal absorption / emission cross sections (m²)
    pub sigma_as: f64,
    pub sigma_es: f64,
    /// pump absorption / emission cross sections (m²)
    pub sigma_ap: f64,
    pub sigma_ep: f64,
    /// ion density in the core (1/m³)
    pub n_dopant: f64,
    /// upper-state lifetime (s)
    pub tau: f64,
    pub lambda_s_nm: f64,
    pub lambda_p_nm: f64,
}

impl Default for YbTwoLevel {
    fn default() -> Self {
        YbTwoLevel {
            sigma_as: 1.4e-27,
            sigma_es: 3.0e-25,
            sigma_ap: 2.6e-24,
            sigma_ep: 2.6e-24,
            n_dopant: 6.0e25,
            tau: 0.85e-3,
            lambda_s_nm: 1064.0,
            lambda_p_nm: 976.0,
        }
    }
}

impl YbTwoLevel {
    /// Fraction of ions in the upper level.
    pub fn upper_fraction(&self, i_s: f64, i_p: f64) -> f64 {
        let (hs, hp) = self.photon_energies();
        let (was, wes) = (self.sigma_as * i_s / hs, self.sigma_es * i_s / hs);
        let (wap, wep) = (self.sigma_ap * i_p / hp, self.sigma_ep * i_p / hp);
        (wap + was) / (wap + wep + was + wes + 1.0 / self.tau)
    }
}

impl GainModel for YbTwoLevel {
    fn gains(&self, i_s: f64, i_p: f64) -> (f64, f64) {
        let f2 = self.upper_fraction(i_s.max(0.0), i_p.max(0.0));
        let (n2, n1) = (self.n_dopant * f2, self.n_dopant * (1.0 - f2));
        (self.sigma_es * n2 - self.sigma_as * n1, self.sigma_ep * n2 - self.sigma_ap * n1)
    }

    fn validate(&self) -> Result<()> {
        let vals = [self.sigma_as, self.sigma_es, self.sigma_ap, self.sigma_ep, self.n_dopant, self.tau, self.lambda_s_nm, self.lambda_p_nm];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("gain parameters must be finite and non-negative".into()));
        }
        if !(self.tau > 0.0 && self.lambda_s_nm > 0.0 && self.lambda_p_nm > 0.0) {
            return Err(Error::Config("lifetime and wavelengths must be positive".into()));
        }
        Ok(())
    }

    fn photon_energies(&self) -> (f64, f64) {
        (PLANCK * C0 / (self.lambda_s_nm * 1e-9), PLANCK * C0 / (self.lambda_p_nm * 1e-9))
    }
}

/// Gains at transverse radius `r` (µm); zero outside the doped core.
pub fn gain_eval(model: &dyn GainModel, i_s: f64, i_p: f64, r: f64, r_core: f64) -> Result<(f64, f64)> {
    if i_s < 0.0 || i_p < 0.0 || !i_s.is_finite() || !i_p.is_finite() {
        return Err(Error::Precondition("irradiances must be finite and non-negative".into()));
    }
    if r > r_core {
        return Ok((0.0, 0.0));
    }
    Ok(model.gains(i_s, i_p))
}

/// `Q = −(g_p I_p + g_s I_s)` in W/m³.
pub fn heat_source(model: &dyn GainModel, i_s: f64, i_p: f64) -> f64 {
    let (gs, gp) = model.gains(i_s, i_p);
    -(gp * i_p + gs * i_s)
}

/// Pump irradiance on the station grid.
#[derive(Debug, Clone, Serialize)]
pub struct PumpState {
    /// µm
    pub z: Vec<f64>,
    /// W/m²
    pub i_p: Vec<f64>,
    pub launched_power: f64,
    /// m²
    pub cladding_area: f64,
}

impl PumpState {
    pub fn power(&self) -> Vec<f64> {
        self.i_p.iter().map(|i| i * self.cladding_area).collect()
    }
}

/// One RK4 step of `dI/dz = ⟨g_p⟩(z, I) · I` with `z, dz` in µm and `⟨g_p⟩` in 1/m.
pub fn pump_step(i_p: f64, z: f64, dz: f64, rate: &dyn Fn(f64, f64) -> f64) -> Result<f64> {
    let h = dz * 1e-6;
    let f = |zz: f64, i: f64| -> Result<f64> {
        let g = rate(zz, i);
        if g > 0.0 {
            return Err(Error::Precondition(format!("pump gain must be non-positive, got {g}")));
        }
        if (g * h).abs() > 0.1 {
            return Err(Error::Numeric(format!("pump step unstable: |g_p dz| = {:.3} > 0.1", (g * h).abs())));
        }
        Ok(g * i)
    };
    let k1 = f(z, i_p)?;
    let k2 = f(z + 0.5 * dz, i_p + 0.5 * h * k1)?;
    let k3 = f(z + 0.5 * dz, i_p + 0.5 * h * k2)?;
    let k4 = f(z + dz, i_p + h * k3)?;
    Ok(i_p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Marches the pump over `stations` with substeps keeping `|g_p dz| ≤ 0.01`.
pub fn march_pump(i0: f64, stations: &[f64], rate: &dyn Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let mut out = vec![i0];
    let mut i = i0;
    for w in stations.windows(2) {
        let span = w[1] - w[0];
        let g = rate(w[0], i).abs().max(rate(w[1], i).abs());
        let n = ((g * span * 1e-6) / 0.01).ceil().max(1.0) as usize;
        let dz = span / n as f64;
        for s in 0..n {
            i = pump_step(i, w[0] + s as f64 * dz, dz, rate)?;
        }
        out.push(i);
    }
    Ok(out)
}

/// Polar finite-volume grid over the cladding disk. Ring edges include `r_core`.
#[derive(Debug, Clone, Serialize)]
pub struct PolarGrid {
    /// ring edges (µm)
    pub r_edges: Vec<f64>,
    pub n_sectors: usize,
    pub n_core_rings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolarGridConfig {
    pub core_rings: usize,
    pub clad_rings: usize,
    pub sectors: usize,
}

impl Default for PolarGridConfig {
    fn default() -> Self {
        PolarGridConfig { core_rings: 4, clad_rings: 6, sectors: 16 }
    }
}

impl PolarGrid {
    pub fn new(r_core: f64, r_clad: f64, cfg: PolarGridConfig) -> Result<Self> {
        if cfg.core_rings == 0 || cfg.clad_rings == 0 || cfg.sectors < 4 {
            return Err(Error::Config("polar grid needs core and cladding rings and at least 4 sectors".into()));
        }
        let mut r_edges: Vec<f64> = (0..=cfg.core_rings).map(|i| r_core * i as f64 / cfg.core_rings as f64).collect();
        r_edges.extend((1..=cfg.clad_rings).map(|i| r_core + (r_clad - r_core) * i as f64 / cfg.clad_rings as f64));
        Ok(PolarGrid { r_edges, n_sectors: cfg.sectors, n_core_rings: cfg.core_rings })
    }

    pub fn n_rings(&self) -> usize {
        self.r_edges.len() - 1
    }

    pub fn n_cells(&self) -> usize {
        self.n_rings() * self.n_sectors
    }

    pub fn cell(&self, ring: usize, sector: usize) -> usize {
        ring * self.n_sectors + sector
    }

    fn dphi(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_sectors as f64
    }

    /// Cell area in µm².
    pub fn area(&self, c: usize) -> f64 {
        let i = c / self.n_sectors;
        0.5 * (self.r_edges[i + 1].powi(2) - self.r_edges[i].powi(2)) * self.dphi()
    }

    pub fn center_radius(&self, ring: usize) -> f64 {
        0.5 * (self.r_edges[ring] + self.r_edges[ring + 1])
    }

    /// Cell centroid representative `(x, y)` in µm.
    pub fn center(&self, c: usize) -> [f64; 2] {
        let (i, j) = (c / self.n_sectors, c % self.n_sectors);
        let r = self.center_radius(i);
        let phi = (j as f64 + 0.5) * self.dphi();
        [r * phi.cos(), r * phi.sin()]
    }

    pub fn is_core(&self, c: usize) -> bool {
        c / self.n_sectors < self.n_core_rings
    }

    pub fn locate(&self, x: f64, y: f64) -> usize {
        let r = x.hypot(y);
        let i = match self.r_edges.binary_search_by(|e| e.partial_cmp(&r).unwrap()) {
            Ok(k) => k.min(self.n_rings() - 1),
            Err(k) => k.saturating_sub(1).min(self.n_rings() - 1),
        };
        let phi = y.atan2(x).rem_euclid(2.0 * std::f64::consts::PI);
        let j = ((phi / self.dphi()) as usize).min(self.n_sectors - 1);
        self.cell(i, j)
    }
}

/// Thermal constants (SI).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalParams {
    /// W/(m·K)
    pub kappa: f64,
    /// J/(m³·K)
    pub rho_c: f64,
    /// 1/K
    pub dn_dt: f64,
    /// convective coefficient at the outer radius, W/(m²·K)
    pub h_conv: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        ThermalParams { kappa: 1.38, rho_c: 1.67e6, dn_dt: 1.2e-5, h_conv: 1.0e4 }
    }
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.rho_c > 0.0 && self.h_conv > 0.0 && self.dn_dt.is_finite()) {
            return Err(Error::Config("thermal constants must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Temperature rise per z-station on the polar grid.
#[derive(Debug, Clone, Serialize)]
pub struct ThermalState {
    pub grid: PolarGrid,
    pub params: ThermalParams,
    /// K, `t[station][cell]`
    pub t: Vec<Vec<f64>>,
    pub time: f64,
}

impl ThermalState {
    pub fn new(grid: PolarGrid, params: ThermalParams, n_stations: usize) -> Self {
        let n = grid.n_cells();
        ThermalState { grid, params, t: vec![vec![0.0; n]; n_stations], time: 0.0 }
    }

    /// Conductance matrix with capacity `ρc/dt` on the diagonal (per unit length).
    fn system(&self, dt: f64) -> Mat<f64> {
        let g = &self.grid;
        let n = g.n_cells();
        let (ns, nr) = (g.n_sectors, g.n_rings());
        let dphi = g.dphi();
        let kappa = self.params.kappa;
        let um = 1e-6;
        let mut a = Mat::<f64>::zeros(n, n);
        let cap = if dt.is_finite() { self.params.rho_c / dt } else { 0.0 };
        let link = |a: &mut Mat<f64>, p: usize, q: usize, c: f64| {
            a[(p, p)] += c;
            a[(q, q)] += c;
            a[(p, q)] -= c;
            a[(q, p)] -= c;
        };
        for i in 0..nr {
            let rc = g.center_radius(i);
            let dr = g.r_edges[i + 1] - g.r_edges[i];
            for j in 0..ns {
                let c = g.cell(i, j);
                a[(c, c)] += cap * g.area(c) * um * um;
                // angular neighbour; lengths cancel between face and distance
                link(&mut a, c, g.cell(i, (j + 1) % ns), kappa * dr / (rc * dphi));
                if i + 1 < nr {
                    let dist = g.center_radius(i + 1) - rc;
                    link(&mut a, c, g.cell(i + 1, j), kappa * g.r_edges[i + 1] * dphi / dist);
                } else {
                    let rb = g.r_edges[nr];
                    let res = (rb - rc) * um / kappa + 1.0 / self.params.h_conv;
                    a[(c, c)] += rb * um * dphi / res;
                }
            }
        }
        a
    }

    /// One backward-Euler step with sources `q[station][cell]` (W/m³). `dt = ∞` gives
    /// the steady state.
    pub fn heat_step(&self, q: &[Vec<f64>], dt: f64) -> Result<ThermalState> {
        if !(dt > 0.0) {
            return Err(Error::Precondition("heat step needs dt > 0".into()));
        }
        if q.len() != self.t.len() || q.iter().any(|v| v.len() != self.grid.n_cells()) {
            return Err(Error::Shape("heat source does not match the thermal grid".into()));
        }
        let a = self.system(dt);
        let llt = a.llt(Side::Lower).map_err(|e| Error::Solver(format!("heat system factorization failed: {e:?}")))?;
        let cap = if dt.is_finite() { self.params.rho_c / dt } else { 0.0 };
        let g = &self.grid;
        let t: Vec<Vec<f64>> = q
            .par_iter()
            .zip(&self.t)
            .map(|(qs, ts)| {
                let rhs = Mat::<f64>::from_fn(g.n_cells(), 1, |c, _| g.area(c) * UM2_TO_M2 * (qs[c] + cap * ts[c]));
                let x = llt.solve(&rhs);
                (0..g.n_cells()).map(|c| x[(c, 0)]).collect()
            })
            .collect();
        Ok(ThermalState { grid: self.grid.clone(), params: self.params, t, time: self.time + if dt.is_finite() { dt } else { 0.0 } })
    }

    pub fn max_t(&self) -> f64 {
        self.t.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Area-weighted core and cladding averages over all stations.
    pub fn averages(&self) -> (f64, f64) {
        let g = &self.grid;
        let (mut tc, mut ac, mut tl, mut al) = (0.0, 0.0, 0.0, 0.0);
        for ts in &self.t {
            for (c, v) in ts.iter().enumerate() {
                let a = g.area(c);
                if g.is_core(c) {
                    tc += v * a;
                    ac += a;
                } else {
                    tl += v * a;
                    al += a;
                }
            }
        }
        (tc / ac, tl / al)
    }
}

/// Piecewise data interpolated linearly between stations.
#[derive(Debug, Clone)]
struct Medium {
    fiber: FiberConfig,
    grid: PolarGrid,
    stations: Vec<f64>,
    temp: Vec<Vec<f64>>,
    gain_s: Vec<Vec<f64>>,
    dn_dt: f64,
    k0: f64,
}

fn interval(stations: &[f64], z: f64) -> (usize, f64) {
    let n = stations.len();
    let k = match stations.binary_search_by(|s| s.partial_cmp(&z).unwrap()) {
        Ok(k) => k.min(n - 2),
        Err(k) => k.saturating_sub(1).min(n - 2),
    };
    let t = ((z - stations[k]) / (stations[k + 1] - stations[k])).clamp(0.0, 1.0);
    (k, t)
}

impl Medium {
    fn eps(&self, x: [f64; 3]) -> C64 {
        let c = self.grid.locate(x[0], x[1]);
        let (k, t) = interval(&self.stations, x[2]);
        let temp = (1.0 - t) * self.temp[k][c] + t * self.temp[k + 1][c];
        let g = (1.0 - t) * self.gain_s[k][c] + t * self.gain_s[k + 1][c];
        let n = self.fiber.index_at(x[0].hypot(x[1])) + self.dn_dt * temp;
        C64::new(n * n, n * g * 1e-6 / self.k0)
    }
}

/// Amplifier run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmplifierConfig {
    /// µm
    pub length: f64,
    pub n_layers: usize,
    pub p: usize,
    pub refinement: usize,
    /// test-space enrichment
    pub dp: usize,
    /// L2 weight of the test norm; small values avoid artificial decay on long fibers
    pub alpha: f64,
    /// W
    pub seed_power: f64,
    /// share of the seed launched in LP11 (cos, x)
    pub hom_seed_fraction: f64,
    /// W
    pub pump_power: f64,
    pub gain: YbTwoLevel,
    pub thermal: ThermalParams,
    pub grid: PolarGridConfig,
    pub tol: f64,
    pub max_iter: usize,
    pub relaxation: f64,
    /// heat steps after the initial solve
    pub heat_steps: usize,
    /// s
    pub dt: f64,
    /// fixed-point iterations per heat step
    pub iterations_per_step: usize,
    /// minimum z-layers per compressed beat length
    pub min_layers_per_beat: f64,
}

impl Default for AmplifierConfig {
    fn default() -> Self {
        AmplifierConfig {
            length: 2500.0,
            n_layers: 8,
            p: 2,
            refinement: 1,
            dp: 1,
            alpha: 1e-4,
            seed_power: 0.01,
            hom_seed_fraction: 0.0,
            pump_power: 1.0,
            gain: YbTwoLevel::default(),
            thermal: ThermalParams::default(),
            grid: PolarGridConfig::default(),
            tol: 1e-4,
            max_iter: 20,
            relaxation: 0.5,
            heat_steps: 0,
            dt: 1e-4,
            iterations_per_step: 1,
            min_layers_per_beat: 2.0,
        }
    }
}

impl AmplifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || self.n_layers == 0 {
            return Err(Error::Config("amplifier length and layer count must be positive".into()));
        }
        if !(1..=4).contains(&self.p) {
            return Err(Error::Config(format!("amplifier order p must be in 1..=4, got {}", self.p)));
        }
        if !(1..=3).contains(&self.dp) {
            return Err(Error::Config(format!("dp must be in 1..=3, got {}", self.dp)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if !(self.seed_power > 0.0) || !(self.pump_power >= 0.0) {
            return Err(Error::Config("seed power must be positive and pump power non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.hom_seed_fraction) {
            return Err(Error::Config("hom_seed_fraction must lie in [0, 1]".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::Config("need tol > 0, max_iter >= 1 and relaxation in (0, 1]".into()));
        }
        if !(self.dt > 0.0) || self.iterations_per_step == 0 {
            return Err(Error::Config("need dt > 0 and iterations_per_step >= 1".into()));
        }
        self.gain.validate()?;
        self.thermal.validate()
    }
}

/// Diagnostics of one fixed-point iteration or heat step.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub time: f64,
    pub residual: f64,
    pub p_s_in: f64,
    pub p_s_out: f64,
    pub p_p_out: f64,
    pub max_t: f64,
}

/// Everything carried between phases of the coupled loop.
#[derive(Clone)]
pub struct AmplifierState {
    pub fiber: FiberConfig,
    pub config: AmplifierConfig,
    pub modes: Vec<LPMode>,
    pub mesh: Arc<Mesh>,
    pub stations: Vec<f64>,
    pub solution: Option<Solution>,
    pub pump: PumpState,
    pub thermal: ThermalState,
    /// W/m², `[station][cell]`
    pub i_s: Vec<Vec<f64>>,
    /// 1/m as used by the last solve
    pub g_s: Vec<Vec<f64>>,
    /// 1/m from the latest irradiances
    pub g_s_latest: Vec<Vec<f64>>,
    pub g_p: Vec<Vec<f64>>,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub quadrature: CrossSectionQuadrature,
}

impl AmplifierState {
    pub fn new(fiber: FiberConfig, config: AmplifierConfig) -> Result<Self> {
        fiber.validate()?;
        config.validate()?;
        let modes = solve_modes(&fiber)?;
        let mesh = Arc::new(build_mesh(&fiber, config.length, config.n_layers, config.refinement)?);
        let stations = mesh.z.clone();
        let grid = PolarGrid::new(fiber.r_core, fiber.r_clad, config.grid)?;
        let n = grid.n_cells();
        let ns = stations.len();
        let a_clad = std::f64::consts::PI * fiber.r_clad * fiber.r_clad * UM2_TO_M2;
        let i0 = config.pump_power / a_clad;
        let pump = PumpState { z: stations.clone(), i_p: vec![i0; ns], launched_power: config.pump_power, cladding_area: a_clad };
        let thermal = ThermalState::new(grid, config.thermal, ns);
        let quadrature = CrossSectionQuadrature::new(&mesh, config.p + 2);
        Ok(AmplifierState {
            fiber,
            config,
            modes,
            mesh,
            stations,
            solution: None,
            pump,
            thermal,
            i_s: vec![vec![0.0; n]; ns],
            g_s: vec![vec![0.0; n]; ns],
            g_s_latest: vec![vec![0.0; n]; ns],
            g_p: vec![vec![0.0; n]; ns],
            history: Vec::new(),
            converged: false,
            quadrature,
        })
    }

    fn launch(&self) -> Result<Arc<dyn Fn([f64; 3]) -> CVec3 + Send + Sync>> {
        let k0 = self.fiber.k0();
        let lp01 = self.modes[0];
        let amp = |m: &LPMode, p: f64| (p * Z0 / (m.k_lp / k0) / UM2_TO_M2).sqrt();
        let f = self.config.hom_seed_fraction;
        let fm = ModeProfile::new(lp01, &self.fiber, Polarization::X, Rotation::Cos);
        let a0 = amp(&lp01, self.config.seed_power * (1.0 - f));
        let hom = if f > 0.0 {
            let lp11 = *self
                .modes
                .iter()
                .find(|m| m.l == 1 && m.p == 1)
                .ok_or_else(|| Error::Config("fiber does not guide LP11 for the HOM seed".into()))?;
            Some((ModeProfile::new(lp11, &self.fiber, Polarization::X, Rotation::Cos), amp(&lp11, self.config.seed_power * f)))
        } else {
            None
        };
        Ok(Arc::new(move |x: [f64; 3]| {
            let mut ex = a0 * fm.vector(x[0], x[1])[0];
            if let Some((m, a)) = &hom {
                ex += a * m.vector(x[0], x[1])[0];
            }
            [C64::new(ex, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]
        }))
    }

    fn solve_signal(&self) -> Result<Solution> {
        let medium = Arc::new(Medium {
            fiber: self.fiber,
            grid: self.thermal.grid.clone(),
            stations: self.stations.clone(),
            temp: self.thermal.t.clone(),
            gain_s: self.g_s.clone(),
            dn_dt: self.config.thermal.dn_dt,
            k0: self.fiber.k0(),
        });
        let k01 = self.modes[0].k_lp;
        let m2 = medium.clone();
        let mut pr = Problem::new(self.mesh.clone(), self.config.p, self.fiber.k0(), EnvelopeAnsatz::uniform(k01)?, Arc::new(move |x| m2.eps(x)));
        pr.eps_z_invariant = false;
        pr.alpha = self.config.alpha;
        pr.dp = self.config.dp;
        pr.inlet = BoundaryData::Electric(Some(self.launch()?));
        pr.outlet = BoundaryData::Impedance(self.fiber.k0() / k01);
        solve(&pr)
    }

    fn sample_irradiance(&self, sol: &Solution) -> Result<Vec<Vec<f64>>> {
        let g = &self.thermal.grid;
        self.stations
            .iter()
            .map(|&z| {
                (0..g.n_cells())
                    .map(|c| {
                        let x = g.center(c);
                        let (e, h) = sol.eval([x[0], x[1], z]).ok_or_else(|| Error::Domain("irradiance sample outside the mesh".into()))?;
                        Ok(irradiance(e, h))
                    })
                    .collect()
            })
            .collect()
    }

    fn core_average_gp(&self, i_s: &[f64], i_p: f64) -> f64 {
        let g = &self.thermal.grid;
        let mut acc = 0.0;
        for (c, v) in i_s.iter().enumerate() {
            if g.is_core(c) {
                acc += self.config.gain.gains(*v, i_p).1 * g.area(c);
            }
        }
        acc * UM2_TO_M2 / self.pump.cladding_area
    }

    /// One pass: signal solve, irradiance update, pump march, gain update.
    fn iterate(&mut self) -> Result<f64> {
        let sol = self.solve_signal()?;
        let i_s = self.sample_irradiance(&sol)?;
        let stations = self.stations.clone();
        let rate = |z: f64, ip: f64| {
            let (k, t) = interval(&stations, z);
            let mix: Vec<f64> = i_s[k].iter().zip(&i_s[k + 1]).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            self.core_average_gp(&mix, ip)
        };
        let i_p = march_pump(self.pump.i_p[0], &stations, &rate)?;
        let g = self.thermal.grid.clone();
        let mut gs_new = vec![vec![0.0; g.n_cells()]; stations.len()];
        let mut gp_new = gs_new.clone();
        for k in 0..stations.len() {
            for c in 0..g.n_cells() {
                if g.is_core(c) {
                    let (a, b) = self.config.gain.gains(i_s[k][c], i_p[k]);
                    gs_new[k][c] = a;
                    gp_new[k][c] = b;
                }
            }
        }
        let prev_has = self.solution.is_some();
        let norm = |v: &Vec<Vec<f64>>| v.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let diff = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let residual = if prev_has {
            diff(&i_s, &self.i_s) / norm(&i_s).max(f64::MIN_POSITIVE)
        } else if diff(&gs_new, &self.g_s) == 0.0 {
            // the medium is unchanged, so the next solve would reproduce this one exactly
            0.0
        } else {
            f64::INFINITY
        };
        let w = self.config.relaxation;
        let relaxed: Vec<Vec<f64>> = gs_new.iter().zip(&self.g_s).map(|(n, o)| n.iter().zip(o).map(|(a, b)| w * a + (1.0 - w) * b).collect()).collect();
        self.g_s_latest = gs_new;
        self.g_s = relaxed;
        self.g_p = gp_new;
        self.i_s = i_s;
        self.pump.i_p = i_p;
        let p_s_in = self.signal_power(&sol, 0.0)?;
        let p_s_out = self.signal_power(&sol, self.mesh.length())?;
        self.solution = Some(sol);
        self.history.push(IterationRecord {
            iteration: self.history.len() + 1,
            time: self.thermal.time,
            residual,
            p_s_in,
            p_s_out,
            p_p_out: *self.pump.power().last().unwrap(),
            max_t: self.thermal.max_t(),
        });
        Ok(residual)
    }

    /// Poynting power of the signal through the plane `z` (W).
    pub fn signal_power(&self, sol: &Solution, z: f64) -> Result<f64> {
        Ok(self.quadrature.poynting_power(&self.quadrature.sample(sol, z)?))
    }

    /// Heat source on the station grid (W/m³).
    pub fn heat(&self) -> Vec<Vec<f64>> {
        self.i_s
            .iter()
            .zip(&self.pump.i_p)
            .map(|(is, ip)| {
                is.iter().enumerate().map(|(c, v)| if self.thermal.grid.is_core(c) { heat_source(&self.config.gain, *v, *ip) } else { 0.0 }).collect()
            })
            .collect()
    }
}

/// Iterates until the relative change of `I_s` drops below `tol`. On failure the
/// state is flagged not converged and `NonConvergence` is returned with it.
pub fn fixed_point_solve(state: &mut AmplifierState) -> Result<()> {
    let (tol, max_iter) = (state.config.tol, state.config.max_iter);
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        last = state.iterate()?;
        if last < tol {
            state.converged = true;
            return Ok(());
        }
    }
    state.converged = false;
    Err(Error::NonConvergence { iterations: max_iter, last_change: last })
}

/// One record per heat step: modal powers at the fiber end.
#[derive(Debug, Clone, Serialize)]
pub struct TransientRecord {
    pub time: f64,
    pub max_t: f64,
    pub p_s_out: f64,
    pub modal: ModalPowers,
}

/// Quasi-static transient: an initial coupled solve, then per heat step one implicit heat
/// step with the current source followed by `iterations_per_step` coupled iterations.
pub fn run_transient(state: &mut AmplifierState, basis: &ModeBasis) -> Result<Vec<TransientRecord>> {
    let mut out = Vec::new();
    if state.solution.is_none() {
        state.iterate()?;
    }
    for _ in 0..state.config.heat_steps {
        let q = state.heat();
        state.thermal = state.thermal.heat_step(&q, state.config.dt)?;
        for _ in 0..state.config.iterations_per_step {
            state.iterate()?;
        }
        let sol = state.solution.as_ref().unwrap();
        out.push(TransientRecord {
            time: state.thermal.time,
            max_t: state.thermal.max_t(),
            p_s_out: state.signal_power(sol, state.mesh.length())?,
            modal: project_modes(sol, state.mesh.length(), basis)?,
        });
    }
    Ok(out)
}

/// One pump level of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub pump_power: f64,
    pub m_tmi: f64,
    pub threshold_flag: bool,
    pub regime: crate::diagnostics::Regime,
    pub max_t: f64,
    pub records: Vec<TransientRecord>,
}

/// Transient runs over pump powers; `M_TMI` from the modal content at the fiber end.
pub fn pump_sweep(fiber: &FiberConfig, config: &AmplifierConfig, pumps: &[f64]) -> Result<Vec<SweepPoint>> {
    if config.heat_steps < 2 {
        return Err(Error::Config("a pump sweep needs heat_steps >= 2".into()));
    }
    let mut points = Vec::new();
    for &pp in pumps {
        let mut cfg = config.clone();
        cfg.pump_power = pp;
        let mut state = AmplifierState::new(*fiber, cfg)?;
        let basis = ModeBasis::new(&state.modes, fiber, state.quadrature.clone())?;
        let records = run_transient(&mut state, &basis)?;
        let series: Vec<ModalPowers> = records.iter().map(|r| r.modal.clone()).collect();
        let tmi = crate::diagnostics::tmi_metric(&series)?;
        points.push(SweepPoint {
            pump_power: pp,
            m_tmi: tmi.m_tmi,
            threshold_flag: tmi.threshold_flag,
            regime: crate::diagnostics::Regime::Stable,
            max_t: state.thermal.max_t(),
            records,
        });
    }
    let labels = crate::diagnostics::regime_classify(&points.iter().map(|p| p.m_tmi).collect::<Vec<_>>());
    for (p, l) in points.iter_mut().zip(labels) {
        p.regime = l;
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyAudit {
    pub pump_lost: f64,
    pub signal_gained: f64,
    pub heat: f64,
    /// `|pump_lost − signal_gained − heat| / pump_lost`
    pub relative_defect: f64,
}

/// Global power balance of the latest iterate (W).
pub fn energy_audit(state: &AmplifierState) -> Result<EnergyAudit> {
    let sol = state.solution.as_ref().ok_or_else(|| Error::Precondition("energy audit needs a solved state".into()))?;
    let pp = state.pump.power();
    let pump_lost = pp[0] - pp[pp.len() - 1];
    let signal_gained = state.signal_power(sol, state.mesh.length())? - state.signal_power(sol, 0.0)?;
    let g = &state.thermal.grid;
    let q = state.heat();
    let per_len: Vec<f64> = q.iter().map(|qs| qs.iter().enumerate().map(|(c, v)| v * g.area(c) * UM2_TO_M2).sum()).collect();
    let heat: f64 = state.stations.windows(2).zip(per_len.windows(2)).map(|(z, h)| 0.5 * (h[0] + h[1]) * (z[1] - z[0]) * 1e-6).sum();
    if !(pump_lost > 0.0) {
        return Err(Error::Degenerate("no pump power absorbed".into()));
    }
    Ok(EnergyAudit { pump_lost, signal_gained, heat, relative_defect: (pump_lost - signal_gained - heat).abs() / pump_lost })
}

/// Modes of the fiber with transverse-averaged heating applied to core and cladding.
#[derive(Debug, Clone, Serialize)]
pub struct ThermalLensReport {
    pub delta_t_core: f64,
    pub delta_t_clad: f64,
    pub modes: Vec<LPMode>,
    pub beats: Vec<Beat>,
    /// layers per shortest compressed beat length
    pub layers_per_beat: f64,
    pub resolution_ok: bool,
}

pub fn thermal_lensing_report(fiber: &FiberConfig, delta_t_core: f64, delta_t_clad: f64, dn_dt: f64, layer_length: f64, min_layers: f64) -> Result<ThermalLensReport> {
    let mut hot = *fiber;
    hot.n_core += dn_dt * delta_t_core;
    hot.n_clad += dn_dt * delta_t_clad;
    let modes = solve_modes(&hot)?;
    let beats = if modes.len() > 1 { beat_lengths(&modes)? } else { Vec::new() };
    let shortest = beats.iter().map(|b| b.beat_length * 1e3).fold(f64::INFINITY, f64::min);
    let layers_per_beat = shortest / layer_length;
    Ok(ThermalLensReport { delta_t_core, delta_t_clad, modes, beats, layers_per_beat, resolution_ok: layers_per_beat >= min_layers })
}

/// Report for the state's current temperature field.
pub fn state_lensing_report(state: &AmplifierState) -> Result<ThermalLensReport> {
    let (tc, tl) = state.thermal.averages();
    let layer = state.mesh.length() / state.mesh.n_layers() as f64;
    thermal_lensing_report(&state.fiber, tc, tl, state.config.thermal.dn_dt, layer, state.config.min_layers_per_beat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_wave_irradiance() {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        assert!((irradiance([one, z, z], [z, one, z]) - 1.0 / Z0).abs() < 1e-18);
        // quadrature phase between E and H carries no net power
        assert_eq!(irradiance([one, z, z], [z, C64::new(0.0, 1.0), z]), 0.0);
    }

    #[test]
    fn gain_limits() {
        let m = YbTwoLevel::default();
        let (gs0, _) = gain_eval(&m, 0.0, 0.0, 0.0, 1.0).unwrap();
        assert!((gs0 + m.sigma_as * m.n_dopant).abs() < 1e-12);
        let (gs, _) = m.gains(1e30, 1e9);
        assert!(gs.abs() < 1e-2 * (m.sigma_es * m.n_dopant));
        assert_eq!(gain_eval(&m, 1e7, 1e9, 2.0, 1.0).unwrap(), (0.0, 0.0));
        assert!(gain_eval(&m, -1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn pump_exponential_and_constant() {
        let g = -12.0;
        let mut i = 3.0;
        let dz = 50.0;
        for s in 0..200 {
            i = pump_step(i, s as f64 * dz, dz, &|_, _| g).unwrap();
        }
        let exact = 3.0 * (g * 200.0 * dz * 1e-6).exp();
        assert!((i - exact).abs() / exact < 1e-8);
        assert_eq!(pump_step(2.0, 0.0, 10.0, &|_, _| 0.0).unwrap(), 2.0);
        assert!(pump_step(2.0, 0.0, 1e5, &|_, _| -2.0).is_err());
    }

    #[test]
    fn steady_disk_conduction() {
        let r_clad = 40.0;
        let grid = PolarGrid::new(10.0, r_clad, PolarGridConfig { core_rings: 8, clad_rings: 24, sectors: 8 }).unwrap();
        let params = ThermalParams::default();
        let st = ThermalState::new(grid.clone(), params, 1);
        let q = 1e9;
        let src = vec![vec![q; grid.n_cells()]];
        let ss = st.heat_step(&src, f64::INFINITY).unwrap();
        let r_m = r_clad * 1e-6;
        for c in 0..grid.n_cells() {
            let r = grid.center_radius(c / grid.n_sectors) * 1e-6;
            let exact = q * (r_m * r_m - r * r) / (4.0 * params.kappa) + q * r_m / (2.0 * params.h_conv);
            assert!((ss.t[0][c] - exact).abs() / exact < 0.02, "cell {c}: {} vs {exact}", ss.t[0][c]);
        }
        let zero = st.heat_step(&vec![vec![0.0; grid.n_cells()]], 1e-4).unwrap();
        assert_eq!(zero.max_t(), 0.0);
    }

    #[test]
    fn lensing_compresses_beats() {
        let f = FiberConfig::reference();
        let cold = thermal_lensing_report(&f, 0.0, 0.0, 1.2e-5, 300.0, 2.0).unwrap();
        let cold_modes = solve_modes(&f).unwrap();
        assert_eq!(cold.modes, cold_modes);
        let hot = thermal_lensing_report(&f, 10.0, 0.0, 1.2e-5, 300.0, 2.0).unwrap();
        assert!(hot.beats[0].beat_length < cold.beats[0].beat_length);
    }
}
