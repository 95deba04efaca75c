//! Modal decomposition, the TMI figure of merit and mode-beat spectra.

use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::mesh::Mesh;
use crate::fem::solver::Solution;
use crate::fibermodes::{FiberConfig, LPMode, ModeProfile};
use crate::quadrature::gauss_legendre;
use crate::units::{UM2_TO_M2, Z0};
use crate::C64;

/// Quadrature points of the mesh cross-section: `(quad, ξ, η, x, y, weight µm²)`.
#[derive(Debug, Clone)]
pub struct CrossSectionQuadrature {
    pub points: Vec<(usize, [f64; 2], [f64; 2], f64)>,
}

impl CrossSectionQuadrature {
    pub fn new(mesh: &Mesh, order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let mut points = Vec::new();
        for (qi, q) in mesh.cs.quads.iter().enumerate() {
            for (a, wa) in gx.iter().zip(&gw) {
                for (b, wb) in gx.iter().zip(&gw) {
                    let (x, j) = q.map.eval(*a, *b);
                    points.push((qi, [*a, *b], x, wa * wb * (j[0][0] * j[1][1] - j[0][1] * j[1][0])));
                }
            }
        }
        CrossSectionQuadrature { points }
    }

    /// Envelope fields at every point of the plane `z`.
    pub fn sample(&self, sol: &Solution, z: f64) -> Result<Vec<([C64; 3], [C64; 3])>> {
        let mesh = &sol.mesh;
        let k = mesh.layer_of(z).ok_or_else(|| Error::Domain(format!("z = {z} outside the fiber")))?;
        let z0 = mesh.z[k];
        let zeta = ((z - z0) / (mesh.z[k + 1] - z0)).clamp(0.0, 1.0);
        Ok(self.points.iter().map(|(qi, r, _, _)| sol.eval_in(mesh.element_id(*qi, k), [r[0], r[1], zeta])).collect())
    }

    /// `∫ Re(E × H̃̄)_z / Z0` in W for fields in V/m.
    pub fn poynting_power(&self, fields: &[([C64; 3], [C64; 3])]) -> f64 {
        self.points
            .iter()
            .zip(fields)
            .map(|((_, _, _, w), (e, h))| w * (e[0] * h[1].conj() - e[1] * h[0].conj()).re)
            .sum::<f64>()
            / Z0
            * UM2_TO_M2
    }
}

/// One orthonormalized transverse mode member.
#[derive(Debug, Clone)]
pub struct ModeMember {
    pub label: String,
    pub k_lp: f64,
    /// transverse values at the quadrature points
    pub values: Vec<[C64; 2]>,
}

/// Orthonormal set of guided-mode members over the discrete cross-section inner product.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub members: Vec<ModeMember>,
    pub quadrature: CrossSectionQuadrature,
    pub k0: f64,
}

fn inner(q: &CrossSectionQuadrature, a: &[[C64; 2]], b: &[[C64; 2]]) -> C64 {
    q.points.iter().zip(a.iter().zip(b)).map(|((_, _, _, w), (u, v))| (u[0] * v[0].conj() + u[1] * v[1].conj()) * *w).sum()
}

impl ModeBasis {
    /// Every polarization/rotation member of `modes`, Gram–Schmidt orthonormalized.
    pub fn new(modes: &[LPMode], config: &FiberConfig, quadrature: CrossSectionQuadrature) -> Result<Self> {
        let mut members: Vec<ModeMember> = Vec::new();
        for m in modes {
            for prof in ModeProfile::members(*m, config) {
                let mut values: Vec<[C64; 2]> = quadrature
                    .points
                    .iter()
                    .map(|(_, _, x, _)| {
                        let v = prof.vector(x[0], x[1]);
                        [C64::new(v[0], 0.0), C64::new(v[1], 0.0)]
                    })
                    .collect();
                for prev in &members {
                    let c = inner(&quadrature, &values, &prev.values);
                    for (v, p) in values.iter_mut().zip(&prev.values) {
                        v[0] -= c * p[0];
                        v[1] -= c * p[1];
                    }
                }
                let norm = inner(&quadrature, &values, &values).re.sqrt();
                if !(norm > 1e-8) {
                    return Err(Error::Degenerate(format!("mode member of {} is linearly dependent", m.label())));
                }
                for v in values.iter_mut() {
                    v[0] /= norm;
                    v[1] /= norm;
                }
                members.push(ModeMember { label: m.label(), k_lp: m.k_lp, values });
            }
        }
        Ok(ModeBasis { members, quadrature, k0: config.k0() })
    }

    /// Largest off-diagonal `|⟨ψ_i, ψ_j⟩|` and largest `|‖ψ_i‖² − 1|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.members.iter().enumerate() {
            for (j, b) in self.members.iter().enumerate() {
                let c = inner(&self.quadrature, &a.values, &b.values);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((c - target).norm());
            }
        }
        worst
    }

    /// Projects sampled transverse fields onto the basis.
    pub fn project(&self, et: &[[C64; 2]]) -> Result<ModalPowers> {
        if self.orthonormality_defect() > 1e-8 {
            return Err(Error::Degenerate("mode set is not orthonormal".into()));
        }
        let mut labels: Vec<String> = Vec::new();
        let mut powers: Vec<f64> = Vec::new();
        let mut amplitudes = Vec::new();
        for m in &self.members {
            let a = inner(&self.quadrature, et, &m.values);
            amplitudes.push(a);
            // H̃_t = (k_lp/k0) e_z × E_t for a guided mode
            let p = a.norm_sqr() * m.k_lp / self.k0 / Z0 * UM2_TO_M2;
            match labels.iter().position(|l| *l == m.label) {
                Some(i) => powers[i] += p,
                None => {
                    labels.push(m.label.clone());
                    powers.push(p);
                }
            }
        }
        Ok(ModalPowers { labels, powers, amplitudes })
    }
}

/// Per-mode powers (summed over members) and member amplitudes.
#[derive(Debug, Clone, Serialize)]
pub struct ModalPowers {
    pub labels: Vec<String>,
    /// W
    pub powers: Vec<f64>,
    #[serde(skip)]
    pub amplitudes: Vec<C64>,
}

impl ModalPowers {
    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// HOM share: all modes except LP01.
    pub fn hom_fraction(&self) -> Result<f64> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::Degenerate("zero total modal power".into()));
        }
        let fm: f64 = self.labels.iter().zip(&self.powers).filter(|(l, _)| l.as_str() == "LP01").map(|(_, p)| *p).sum();
        Ok(((total - fm) / total).clamp(0.0, 1.0))
    }
}

/// Projects the solution's transverse field at `z`.
pub fn project_modes(sol: &Solution, z: f64, basis: &ModeBasis) -> Result<ModalPowers> {
    let fields = basis.quadrature.sample(sol, z)?;
    let et: Vec<[C64; 2]> = fields.iter().map(|(e, _)| [e[0], e[1]]).collect();
    basis.project(&et)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TMIResult {
    pub m_tmi: f64,
    pub threshold_flag: bool,
}

pub const TMI_THRESHOLD: f64 = 0.05;

/// Time average of the HOM power fraction at the fiber end.
pub fn tmi_metric(series: &[ModalPowers]) -> Result<TMIResult> {
    if series.len() < 2 {
        return Err(Error::Precondition("TMI metric needs at least two time samples".into()));
    }
    let mut acc = 0.0;
    for s in series {
        acc += s.hom_fraction()?;
    }
    let m = acc / series.len() as f64;
    Ok(TMIResult { m_tmi: m, threshold_flag: m >= TMI_THRESHOLD })
}

/// Same metric from `(P_FM, P_HOM)` pairs.
pub fn tmi_metric_from_pairs(series: &[(f64, f64)]) -> Result<TMIResult> {
    let ps: Vec<ModalPowers> = series
        .iter()
        .map(|(fm, hom)| ModalPowers { labels: vec!["LP01".into(), "LP11".into()], powers: vec![*fm, *hom], amplitudes: vec![] })
        .collect();
    tmi_metric(&ps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Stable,
    Transition,
    TransitionPeak,
    Chaotic,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Stable => "stable",
            Regime::Transition => "transition",
            Regime::TransitionPeak => "transition-peak",
            Regime::Chaotic => "chaotic",
        };
        f.write_str(s)
    }
}

/// Labels a pump sweep of `M_TMI` values: stable below the threshold, transition from the
/// first crossing up to the first local maximum (labelled `TransitionPeak`), chaotic after.
pub fn regime_classify(m: &[f64]) -> Vec<Regime> {
    let mut out = vec![Regime::Stable; m.len()];
    let Some(c) = m.iter().position(|v| *v >= TMI_THRESHOLD) else { return out };
    let peak = (c..m.len().saturating_sub(1)).find(|&i| m[i + 1] < m[i]);
    for (i, r) in out.iter_mut().enumerate().skip(c) {
        *r = match peak {
            Some(pk) if i == pk => Regime::TransitionPeak,
            Some(pk) if i > pk => Regime::Chaotic,
            _ => Regime::Transition,
        };
    }
    out
}

/// Dominant spatial frequencies of a uniformly sampled irradiance record.
#[derive(Debug, Clone, Serialize)]
pub struct BeatSpectrum {
    /// peak wavenumbers (mm⁻¹), strongest first
    pub peaks: Vec<f64>,
    /// bin width (mm⁻¹)
    pub bin: f64,
}

/// DFT peak detection on `I(z)` (z in µm). Peaks are refined by parabolic interpolation
/// of the magnitude and reported only above `1e-6` of the mean level.
pub fn mode_beat_spectrum(z: &[f64], irradiance: &[f64]) -> Result<BeatSpectrum> {
    let n = z.len();
    if n < 16 || irradiance.len() != n {
        return Err(Error::Precondition("beat spectrum needs at least 16 paired samples".into()));
    }
    let dz = z[1] - z[0];
    if !(dz > 0.0) || z.windows(2).any(|w| ((w[1] - w[0]) - dz).abs() > 1e-9 * dz.abs().max(1.0)) {
        return Err(Error::Precondition("beat spectrum needs uniform increasing sampling".into()));
    }
    let mean = irradiance.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<C64> = irradiance.iter().map(|v| C64::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf.iter().take(n / 2 + 1).map(|c| c.norm() / n as f64).collect();
    let span = dz * n as f64;
    let bin = 2.0 * std::f64::consts::PI / span * 1e3;
    let floor = 1e-6 * mean.abs().max(f64::MIN_POSITIVE);
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..mag.len().saturating_sub(1) {
        if mag[i] > floor && mag[i] >= mag[i - 1] && mag[i] > mag[i + 1] {
            let (a, b, c) = (mag[i - 1], mag[i], mag[i + 1]);
            let den = a - 2.0 * b + c;
            let shift = if den.abs() > 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            peaks.push(((i as f64 + shift) * bin, b));
        }
    }
    peaks.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
    Ok(BeatSpectrum { peaks: peaks.into_iter().map(|p| p.0).collect(), bin })
}
