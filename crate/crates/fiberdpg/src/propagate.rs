//! Linear single-mode launch runs with a chosen outlet treatment.

use std::sync::Arc;

use serde::Serialize;

use crate::boundary::{validate_pml, PMLConfig, PmlMode, PmlProbe, PmlReport};
use crate::diagnostics::{project_modes, CrossSectionQuadrature, ModalPowers, ModeBasis};
use crate::dump::FieldDump;
use crate::error::{Error, Result};
use crate::fem::mesh::{build_mesh_with_levels, Mesh};
use crate::fem::solver::{solve, BoundaryData, Problem, Solution};
use crate::fibermodes::{solve_modes, FiberConfig, LPMode, ModeProfile, Polarization, Rotation};
use crate::units::{UM2_TO_M2, Z0};
use crate::C64;

/// Everything a linear run needs. `fiber` is the computational fiber (truncated cladding).
#[derive(Debug, Clone)]
pub struct PropagationSpec {
    pub fiber: FiberConfig,
    /// µm, including any PML
    pub length: f64,
    /// layers before the PML (or over the whole fiber without one)
    pub n_layers: usize,
    pub n_pml_layers: usize,
    pub p: usize,
    pub dp: usize,
    pub refinement: usize,
    pub alpha: f64,
    pub boundary: PMLConfig,
    /// PML closed by the modal impedance of the launched mode rather than PEC
    pub pml_impedance_end: bool,
    /// e.g. "LP01"; launched x-polarized, cosine rotation
    pub launch_mode: String,
    /// W
    pub launch_power: f64,
}

pub struct Propagation {
    pub spec: PropagationSpec,
    pub modes: Vec<LPMode>,
    pub launched: LPMode,
    pub problem: Problem,
    pub solution: Solution,
    pub quadrature: CrossSectionQuadrature,
}

/// Modal decomposition at one plane.
#[derive(Debug, Clone, Serialize)]
pub struct PowerSample {
    pub z: f64,
    pub total: f64,
    pub modal: ModalPowers,
}

fn levels(spec: &PropagationSpec) -> Result<Vec<f64>> {
    match spec.boundary.stretch {
        Some(s) if spec.boundary.mode != PmlMode::Impedance => {
            if (s.length - spec.length).abs() > 1e-9 * spec.length {
                return Err(Error::Config(format!("PML must end at the fiber end {} µm, got {}", spec.length, s.length)));
            }
            Mesh::two_region_levels(s.l, s.length, spec.n_layers, spec.n_pml_layers)
        }
        _ => Mesh::uniform_levels(spec.length, spec.n_layers),
    }
}

pub fn propagate(spec: &PropagationSpec) -> Result<Propagation> {
    let fiber = spec.fiber;
    fiber.validate()?;
    let modes = solve_modes(&fiber)?;
    let launched = *modes
        .iter()
        .find(|m| m.label() == spec.launch_mode)
        .ok_or_else(|| Error::Config(format!("fiber does not guide {}", spec.launch_mode)))?;
    spec.boundary.validate(fiber.k_clad(), modes.iter().map(|m| m.k_lp).fold(f64::INFINITY, f64::min))?;
    if !(spec.launch_power >= 0.0) {
        return Err(Error::Config("launch power must be non-negative".into()));
    }
    let mesh = Arc::new(build_mesh_with_levels(&fiber, levels(spec)?, spec.refinement)?);
    let ansatz = spec.boundary.ansatz(spec.length)?;
    let mut pr = Problem::new(
        mesh.clone(),
        spec.p,
        fiber.k0(),
        ansatz,
        Arc::new(move |x| {
            let n = fiber.index_at(x[0].hypot(x[1]));
            C64::new(n * n, 0.0)
        }),
    );
    pr.dp = spec.dp;
    pr.alpha = spec.alpha;
    let prof = ModeProfile::new(launched, &fiber, Polarization::X, Rotation::Cos);
    let amp = (spec.launch_power * Z0 / (launched.k_lp / fiber.k0()) / UM2_TO_M2).sqrt();
    pr.inlet = BoundaryData::Electric(Some(Arc::new(move |x| {
        let v = prof.vector(x[0], x[1]);
        [C64::new(amp * v[0], 0.0), C64::new(amp * v[1], 0.0), C64::new(0.0, 0.0)]
    })));
    match spec.boundary.mode {
        PmlMode::Impedance => {
            let z = spec.boundary.z_imp.ok_or_else(|| Error::Config("impedance outlet needs z_imp".into()))?;
            pr.outlet = BoundaryData::Impedance(crate::boundary::normalized_impedance(z)?);
        }
        PmlMode::Formulation1 | PmlMode::Formulation2 => {
            pr.stretch = Some(spec.boundary.stretch.unwrap().as_stretch());
            pr.eps_z_invariant = false;
            if spec.pml_impedance_end {
                pr.outlet = BoundaryData::Impedance(fiber.k0() / launched.k_lp);
            }
        }
    }
    let solution = solve(&pr)?;
    let quadrature = CrossSectionQuadrature::new(&mesh, spec.p + 3);
    Ok(Propagation { spec: spec.clone(), modes, launched, problem: pr, solution, quadrature })
}

impl Propagation {
    /// End of the unstretched region.
    pub fn main_length(&self) -> f64 {
        match (self.spec.boundary.mode, self.spec.boundary.stretch) {
            (PmlMode::Impedance, _) | (_, None) => self.spec.length,
            (_, Some(s)) => s.l,
        }
    }

    pub fn basis(&self, modes: &[LPMode]) -> Result<ModeBasis> {
        ModeBasis::new(modes, &self.spec.fiber, self.quadrature.clone())
    }

    /// Envelope decay and standing-wave ratio read from the launched mode's modal amplitude.
    pub fn pml_report(&self, n_samples: usize) -> Result<Option<PmlReport>> {
        let Some(stretch) = self.spec.boundary.stretch.filter(|_| self.spec.boundary.mode != PmlMode::Impedance) else {
            return Ok(None);
        };
        let basis = self.basis(&[self.launched])?;
        let k_pml = self.problem.ansatz.k_at(self.spec.length);
        validate_pml(&self.solution, &stretch, self.launched.k_lp, k_pml, PmlProbe::Mode(&basis), n_samples).map(Some)
    }

    /// Modal powers at `n` planes inside the unstretched region.
    pub fn power_profile(&self, n: usize) -> Result<Vec<PowerSample>> {
        let basis = self.basis(&self.modes)?;
        let l = self.main_length();
        (0..n)
            .map(|i| {
                let z = l * i as f64 / (n.max(2) - 1) as f64;
                let z = z.min(l * (1.0 - 1e-12));
                let total = self.quadrature.poynting_power(&self.quadrature.sample(&self.solution, z)?);
                Ok(PowerSample { z, total, modal: project_modes(&self.solution, z, &basis)? })
            })
            .collect()
    }

    /// `(E, H̃)` on a box grid over `[−R, R]² × [0, L]`; six complex components, zero outside the mesh.
    pub fn sample_grid(&self, dims: [usize; 3], physical: bool) -> Result<FieldDump> {
        let r = self.spec.fiber.r_clad;
        let bbox = [-r, r, -r, r, 0.0, self.spec.length];
        let mut dump = FieldDump::zeros(dims, bbox, 6, true)?;
        let sol = &self.solution;
        dump.fill(|x| {
            let v = if physical { sol.eval_physical(x) } else { sol.eval(x) };
            match v {
                Some((e, h)) => vec![e[0], e[1], e[2], h[0], h[1], h[2]],
                None => vec![C64::new(0.0, 0.0); 6],
            }
        });
        Ok(dump)
    }
}
