//! Global assembly of condensed trace systems, boundary data and solution recovery.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};
use rayon::prelude::*;

use super::dense::{cholesky, chol_solve};
use super::element::{element_system, eval_fields, trace_values_on_face, Condensed, CVec3, ElementInput, LoadFn, NormalSystem};
use super::geometry::SideTag;
use super::mesh::{Boundary, DofMap, Entity, LocalDof, Mesh};
use crate::envelope::EnvelopeAnsatz;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::C64;

pub type ScalarField = Arc<dyn Fn([f64; 3]) -> C64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn([f64; 3]) -> CVec3 + Send + Sync>;
pub type Source = Arc<dyn Fn([f64; 3]) -> (CVec3, CVec3) + Send + Sync>;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Condition on one boundary part. `None` data means homogeneous.
#[derive(Clone)]
pub enum BoundaryData {
    /// prescribed `n × Ê`
    Electric(Option<VectorField>),
    /// prescribed `n × Ĥ`
    Magnetic(Option<VectorField>),
    /// `n × Ĥ = −Ê_t / z_s` (outlet only)
    Impedance(f64),
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryData::Electric(d) => write!(f, "Electric({})", if d.is_some() { "data" } else { "zero" }),
            BoundaryData::Magnetic(d) => write!(f, "Magnetic({})", if d.is_some() { "data" } else { "zero" }),
            BoundaryData::Impedance(z) => write!(f, "Impedance({z})"),
        }
    }
}

/// Complex stretch `s(z) = ∂z̃/∂z`, equal to 1 below `start`.
#[derive(Clone)]
pub struct Stretch {
    pub start: f64,
    pub s: Arc<dyn Fn(f64) -> C64 + Send + Sync>,
}

/// A linear envelope problem on an extruded mesh.
#[derive(Clone)]
pub struct Problem {
    pub mesh: Arc<Mesh>,
    pub p: usize,
    pub dp: usize,
    pub alpha: f64,
    pub k0: f64,
    pub ansatz: EnvelopeAnsatz,
    /// relative permittivity
    pub eps: ScalarField,
    /// permits reuse of element matrices between layers
    pub eps_z_invariant: bool,
    pub stretch: Option<Stretch>,
    pub inlet: BoundaryData,
    pub outlet: BoundaryData,
    /// Γ_tr of a disk, or both wall pairs of a rectangle
    pub transverse: BoundaryData,
    pub x_wall: BoundaryData,
    pub y_wall: BoundaryData,
    pub source: Option<Source>,
}

impl Problem {
    /// Defaults: PEC everywhere except the given inlet/outlet, PMC on y-walls.
    pub fn new(mesh: Arc<Mesh>, p: usize, k0: f64, ansatz: EnvelopeAnsatz, eps: ScalarField) -> Self {
        Problem {
            mesh,
            p,
            dp: 1,
            alpha: 1.0,
            k0,
            ansatz,
            eps,
            eps_z_invariant: true,
            stretch: None,
            inlet: BoundaryData::Electric(None),
            outlet: BoundaryData::Electric(None),
            transverse: BoundaryData::Electric(None),
            x_wall: BoundaryData::Electric(None),
            y_wall: BoundaryData::Magnetic(None),
            source: None,
        }
    }

    fn data_for(&self, b: Boundary) -> &BoundaryData {
        match b {
            Boundary::In => &self.inlet,
            Boundary::Out => &self.outlet,
            Boundary::Side(SideTag::Transverse) => &self.transverse,
            Boundary::Side(SideTag::XWall) => &self.x_wall,
            Boundary::Side(SideTag::YWall) => &self.y_wall,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p < 1 || self.p > 6 {
            return Err(Error::Precondition(format!("order p must be in 1..=6, got {}", self.p)));
        }
        if self.dp < 1 {
            return Err(Error::Precondition("enrichment dp must be >= 1".into()));
        }
        if !(self.k0 > 0.0) {
            return Err(Error::Precondition("k0 must be positive".into()));
        }
        self.ansatz.validate()?;
        for l in self.ansatz.interfaces() {
            if !self.mesh.has_level(l) {
                return Err(Error::Geometry(format!("ansatz interface z = {l} is not a mesh level")));
            }
        }
        if let EnvelopeAnsatz::Piecewise { edges, .. } = &self.ansatz {
            if (edges.last().unwrap() - self.mesh.length()).abs() > 1e-9 * self.mesh.length() {
                return Err(Error::Geometry("ansatz regions must end at the fiber length".into()));
            }
        }
        if matches!(self.inlet, BoundaryData::Impedance(_)) {
            return Err(Error::Precondition("impedance condition is only supported at the outlet".into()));
        }
        for b in [&self.transverse, &self.x_wall, &self.y_wall] {
            if matches!(b, BoundaryData::Impedance(_)) {
                return Err(Error::Precondition("impedance condition is only supported at the outlet".into()));
            }
        }
        if let BoundaryData::Impedance(z) = self.outlet {
            if !(z > 0.0 && z.is_finite()) {
                return Err(Error::Precondition(format!("outlet impedance must be positive, got {z}")));
            }
        }
        Ok(())
    }

    /// Envelope wavenumber and region of element `e`.
    pub fn element_k(&self, e: usize) -> (usize, f64) {
        let (_, k) = self.mesh.element(e);
        let zm = 0.5 * (self.mesh.z[k] + self.mesh.z[k + 1]);
        let r = self.ansatz.region_of(zm);
        (r, self.ansatz.k_of_region(r))
    }

    fn in_pml(&self, e: usize) -> bool {
        let (_, k) = self.mesh.element(e);
        self.stretch.as_ref().is_some_and(|s| self.mesh.z[k + 1] > s.start)
    }

    fn top_impedance(&self, e: usize) -> Option<f64> {
        let (_, k) = self.mesh.element(e);
        match self.outlet {
            BoundaryData::Impedance(z) if k + 1 == self.mesh.n_layers() => Some(z),
            _ => None,
        }
    }

    /// Local system inputs of element `e`.
    pub fn with_element_input<T>(&self, e: usize, f: impl FnOnce(&ElementInput<'_>) -> T) -> T {
        let (qi, k) = self.mesh.element(e);
        let (_, kenv) = self.element_k(e);
        let eps = self.eps.clone();
        let eps_fn = move |x: [f64; 3]| eps(x);
        let stretch = self.stretch.clone();
        let st_fn = move |z: f64| match &stretch {
            Some(s) if z > s.start => (s.s)(z),
            _ => C64::new(1.0, 0.0),
        };
        let src = self.source.clone();
        let load_fn = move |x: [f64; 3]| (src.as_ref().unwrap())(x);
        let load: Option<&LoadFn<'_>> = if self.source.is_some() { Some(&load_fn) } else { None };
        let inp = ElementInput {
            map: &self.mesh.cs.quads[qi].map,
            z0: self.mesh.z[k],
            h: self.mesh.z[k + 1] - self.mesh.z[k],
            p: self.p,
            dp: self.dp,
            k0: self.k0,
            k_env: kenv,
            alpha: self.alpha,
            eps: &eps_fn,
            stretch: &st_fn,
            top_impedance: self.top_impedance(e),
            load,
        };
        f(&inp)
    }

    pub fn normal_system(&self, e: usize) -> Result<NormalSystem> {
        self.with_element_input(e, |inp| element_system(inp)?.normal())
    }

    /// Multiplier of each local trace dof (`e^{+i 𝗄 l}` on ansatz interfaces, else 1).
    fn multipliers(&self, e: usize, dofs: &[LocalDof]) -> Vec<C64> {
        let interfaces = self.ansatz.interfaces();
        let (_, kenv) = self.element_k(e);
        dofs.iter()
            .map(|d| {
                let level = match d.entity {
                    Entity::HEdge { level, .. } | Entity::HFace { level, .. } => Some(level),
                    _ => None,
                };
                match level {
                    Some(lv) => {
                        let z = self.mesh.z[lv];
                        if interfaces.iter().any(|l| (l - z).abs() <= 1e-12 * self.mesh.length()) {
                            C64::from_polar(1.0, kenv * z)
                        } else {
                            C64::new(1.0, 0.0)
                        }
                    }
                    None => C64::new(1.0, 0.0),
                }
            })
            .collect()
    }

    /// Global index and complex weight (`sign · multiplier`) of every local trace unknown,
    /// ordered `[Ê, Ĥ]`.
    pub fn local_to_global(&self, map: &DofMap, e: usize) -> Vec<(usize, C64)> {
        let dofs = map.element_dofs(&self.mesh, e);
        let m = self.multipliers(e, &dofs);
        let mut out: Vec<(usize, C64)> = dofs.iter().zip(&m).map(|(d, m)| (d.global, *m * d.sign)).collect();
        out.extend(dofs.iter().zip(&m).map(|(d, m)| (d.global + map.n_e, *m * d.sign)));
        out
    }
}

/// Assembly and factorization statistics.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct SolveStats {
    pub n_elements: usize,
    pub n_dofs: usize,
    pub n_free: usize,
    pub nnz: usize,
    pub distinct_element_matrices: usize,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

/// Solved trace unknowns and recovered field coefficients.
#[derive(Clone)]
pub struct Solution {
    pub mesh: Arc<Mesh>,
    pub p: usize,
    pub ansatz: EnvelopeAnsatz,
    pub dofs: DofMap,
    pub traces: Vec<C64>,
    /// `[E, H]` coefficients per element
    pub fields: Vec<Vec<C64>>,
    pub element_k: Vec<f64>,
    pub stats: SolveStats,
}

impl Solution {
    /// Envelope `(𝖤, 𝖧)` at a physical point.
    pub fn eval(&self, x: [f64; 3]) -> Option<(CVec3, CVec3)> {
        let (qi, rxy) = self.mesh.cs.locate([x[0], x[1]])?;
        let k = self.mesh.layer_of(x[2])?;
        let e = self.mesh.element_id(qi, k);
        let z0 = self.mesh.z[k];
        let h = self.mesh.z[k + 1] - z0;
        Some(eval_fields(self.p, &self.fields[e], [rxy[0], rxy[1], ((x[2] - z0) / h).clamp(0.0, 1.0)]))
    }

    /// Fields at reference point `r` of element `e`.
    pub fn eval_in(&self, e: usize, r: [f64; 3]) -> (CVec3, CVec3) {
        eval_fields(self.p, &self.fields[e], r)
    }

    /// Envelope mapped to the physical field, `E = 𝖤 e^{−i𝗄z}`.
    pub fn eval_physical(&self, x: [f64; 3]) -> Option<(CVec3, CVec3)> {
        let (e, h) = self.eval(x)?;
        let ph = C64::from_polar(1.0, -self.ansatz.k_at(x[2]) * x[2]);
        Some((e.map(|v| v * ph), h.map(|v| v * ph)))
    }
}

struct Pattern {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl Pattern {
    fn build(n: usize, elems: &[Vec<Option<usize>>]) -> Pattern {
        let mut owners: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (e, list) in elems.iter().enumerate() {
            for g in list.iter().flatten() {
                owners[*g].push(e as u32);
            }
        }
        let cols: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut rows: Vec<usize> = owners[j].iter().flat_map(|&e| elems[e as usize].iter().flatten().copied().filter(|&i| i >= j)).collect();
                rows.sort_unstable();
                rows.dedup();
                rows
            })
            .collect();
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::with_capacity(cols.iter().map(|c| c.len()).sum());
        for c in cols {
            row_idx.extend_from_slice(&c);
            col_ptr.push(row_idx.len());
        }
        Pattern { col_ptr, row_idx }
    }

    fn position(&self, i: usize, j: usize) -> usize {
        let rows = &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]];
        self.col_ptr[j] + rows.binary_search(&i).expect("entry outside sparsity pattern")
    }
}

/// Computes condensed element systems, reusing identical ones.
fn condensed_elements(problem: &Problem) -> Result<(Vec<Arc<Condensed>>, usize)> {
    let mesh = &problem.mesh;
    let ne = mesh.n_elements();
    let cacheable = |e: usize| problem.source.is_none() && problem.eps_z_invariant && !problem.in_pml(e);
    let key = |e: usize| {
        let (qi, k) = mesh.element(e);
        let h = mesh.z[k + 1] - mesh.z[k];
        (qi, h.to_bits(), problem.element_k(e).1.to_bits(), problem.top_impedance(e).map(f64::to_bits))
    };
    let mut slot_of_key: HashMap<(usize, u64, u64, Option<u64>), usize> = HashMap::new();
    let mut jobs: Vec<usize> = Vec::new();
    let mut slot = vec![0usize; ne];
    for e in 0..ne {
        if cacheable(e) {
            let k = key(e);
            let s = *slot_of_key.entry(k).or_insert_with(|| {
                jobs.push(e);
                jobs.len() - 1
            });
            slot[e] = s;
        } else {
            jobs.push(e);
            slot[e] = jobs.len() - 1;
        }
    }
    let computed: Vec<Arc<Condensed>> = jobs
        .par_iter()
        .map(|&e| problem.normal_system(e).and_then(|n| n.condense()).map(Arc::new))
        .collect::<Result<_>>()?;
    let distinct = computed.len();
    Ok((slot.into_iter().map(|s| computed[s].clone()).collect(), distinct))
}

/// Boundary faces of a part: (element, face normal, face position).
fn boundary_faces(mesh: &Mesh, part: Boundary) -> Vec<(usize, usize, usize)> {
    let nq = mesh.cs.quads.len();
    let nz = mesh.n_layers();
    let mut out = Vec::new();
    match part {
        Boundary::In => out.extend((0..nq).map(|q| (mesh.element_id(q, 0), 2, 0))),
        Boundary::Out => out.extend((0..nq).map(|q| (mesh.element_id(q, nz - 1), 2, 1))),
        Boundary::Side(tag) => {
            for (qi, quad) in mesh.cs.quads.iter().enumerate() {
                for (le, &ed) in quad.edges.iter().enumerate() {
                    if mesh.cs.edges[ed].boundary == Some(tag) {
                        let (m, pos) = match le {
                            0 => (1, 0),
                            1 => (0, 1),
                            2 => (1, 1),
                            _ => (0, 0),
                        };
                        out.extend((0..nz).map(|k| (mesh.element_id(qi, k), m, pos)));
                    }
                }
            }
        }
    }
    out
}

fn trace_on_face(entity: &super::basis::LocalEntity, m: usize, pos: usize) -> bool {
    use super::basis::LocalEntity;
    match *entity {
        LocalEntity::Face { normal, pos: fp } => normal == m && fp == pos,
        LocalEntity::Edge { axis, pos: ep } => {
            if axis == m {
                return false;
            }
            let (c1, _) = super::basis::other_axes(axis);
            let idx = if c1 == m { 0 } else { 1 };
            ep[idx] == pos
        }
    }
}

/// Prescribed boundary values: global dof → value.
fn dirichlet_values(problem: &Problem, map: &DofMap) -> Result<HashMap<usize, C64>> {
    let mesh = &problem.mesh;
    let mut fixed: HashMap<usize, C64> = HashMap::new();
    let mut parts = vec![Boundary::In, Boundary::Out];
    let disk = DofMap::disk_kind(mesh);
    if disk {
        parts.push(Boundary::Side(SideTag::Transverse));
    } else {
        parts.push(Boundary::Side(SideTag::XWall));
        parts.push(Boundary::Side(SideTag::YWall));
    }
    // entity → boundary parts, over all element dofs
    let mut entity_dofs: HashMap<Entity, Vec<usize>> = HashMap::new();
    for e in 0..mesh.n_elements() {
        for d in map.element_dofs(mesh, e) {
            let v = entity_dofs.entry(d.entity).or_default();
            if !v.contains(&d.global) {
                v.push(d.global);
            }
        }
    }
    let dofs_on = |part: Boundary| -> Vec<usize> {
        let mut out: Vec<usize> = entity_dofs
            .iter()
            .filter(|(ent, _)| map.entity_boundaries(mesh, **ent).contains(&part))
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        out.sort_unstable();
        out
    };
    // homogeneous parts first
    let mut ordered: Vec<(Boundary, bool)> = Vec::new();
    for &part in &parts {
        match problem.data_for(part) {
            BoundaryData::Electric(None) | BoundaryData::Magnetic(None) => ordered.insert(0, (part, true)),
            BoundaryData::Impedance(_) => ordered.insert(0, (part, true)),
            _ => ordered.push((part, false)),
        }
    }
    for (part, _) in ordered {
        match problem.data_for(part).clone() {
            BoundaryData::Electric(None) => {
                for g in dofs_on(part) {
                    fixed.insert(g, ZERO);
                }
            }
            BoundaryData::Magnetic(None) => {
                for g in dofs_on(part) {
                    fixed.insert(g + map.n_e, ZERO);
                }
            }
            BoundaryData::Impedance(_) => {
                // Ĥ face unknowns on the outlet face lose their test pairing
                for (ent, v) in &entity_dofs {
                    if let Entity::HFace { level, .. } = ent {
                        if *level == mesh.n_layers() {
                            for g in v {
                                fixed.insert(g + map.n_e, ZERO);
                            }
                        }
                    }
                }
            }
            BoundaryData::Electric(Some(f)) => project(problem, map, part, &f, 0, &mut fixed)?,
            BoundaryData::Magnetic(Some(f)) => project(problem, map, part, &f, map.n_e, &mut fixed)?,
        }
    }
    Ok(fixed)
}

/// L2 projection of tangential data onto the trace space of one boundary part.
fn project(problem: &Problem, map: &DofMap, part: Boundary, data: &VectorField, offset: usize, fixed: &mut HashMap<usize, C64>) -> Result<()> {
    let mesh = &problem.mesh;
    let faces = boundary_faces(mesh, part);
    let (gx, gw) = gauss_legendre(problem.p + 3);
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut unknown: Vec<usize> = Vec::new();
    for &(e, m, pos) in &faces {
        let dofs = map.element_dofs(mesh, e);
        for (t, d) in map.trace.iter().zip(&dofs) {
            let g = d.global + offset;
            if trace_on_face(&t.entity, m, pos) && !fixed.contains_key(&g) && !index.contains_key(&g) {
                index.insert(g, unknown.len());
                unknown.push(g);
            }
        }
    }
    let n = unknown.len();
    if n == 0 {
        return Ok(());
    }
    let mut mass = Mat::<C64>::zeros(n, n);
    let mut rhs = Mat::<C64>::zeros(n, 1);
    for &(e, m, pos) in &faces {
        let (qi, k) = mesh.element(e);
        let z0 = mesh.z[k];
        let h = mesh.z[k + 1] - z0;
        let dofs = map.element_dofs(mesh, e);
        let local: Vec<usize> = (0..dofs.len()).filter(|&i| trace_on_face(&map.trace[i].entity, m, pos)).collect();
        for (a, wa) in gx.iter().zip(&gw) {
            for (b, wb) in gx.iter().zip(&gw) {
                let (x, nvec, vals) = trace_values_on_face(&mesh.cs.quads[qi].map, z0, h, problem.p, m, pos, [*a, *b])?;
                let area = (nvec[0] * nvec[0] + nvec[1] * nvec[1] + nvec[2] * nvec[2]).sqrt();
                let nhat = nvec.map(|v| v / area);
                let w = wa * wb * area;
                let g = data(x);
                let ng = cross_c(nhat, g);
                let nv: Vec<[f64; 3]> = local.iter().map(|&i| cross_r(nhat, vals[i].map(|v| v * dofs[i].sign))).collect();
                for (ii, &i) in local.iter().enumerate() {
                    let gi = dofs[i].global + offset;
                    let ri = index.get(&gi).copied();
                    // data and already-fixed contributions go to the right-hand side
                    let mut acc = ng[0] * nv[ii][0] + ng[1] * nv[ii][1] + ng[2] * nv[ii][2];
                    for (jj, &j) in local.iter().enumerate() {
                        let gj = dofs[j].global + offset;
                        let mij = nv[ii][0] * nv[jj][0] + nv[ii][1] * nv[jj][1] + nv[ii][2] * nv[jj][2];
                        match (ri, index.get(&gj)) {
                            (Some(r), Some(&c)) => mass[(r, c)] += w * mij,
                            (Some(_), None) => acc -= fixed.get(&gj).copied().unwrap_or(ZERO) * mij,
                            _ => {}
                        }
                    }
                    if let Some(r) = ri {
                        rhs[(r, 0)] += acc * w;
                    }
                }
            }
        }
    }
    let l = cholesky(mass.as_ref())?;
    chol_solve(l.as_ref(), &mut rhs);
    for (r, g) in unknown.into_iter().enumerate() {
        fixed.insert(g, rhs[(r, 0)]);
    }
    Ok(())
}

fn cross_r(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn cross_c(a: [f64; 3], b: CVec3) -> CVec3 {
    [b[2] * a[1] - b[1] * a[2], b[0] * a[2] - b[2] * a[0], b[1] * a[0] - b[0] * a[1]]
}

/// Assembles, solves and recovers the full solution.
pub fn solve(problem: &Problem) -> Result<Solution> {
    problem.validate()?;
    let t0 = Instant::now();
    let mesh = &problem.mesh;
    let map = DofMap::new(mesh, problem.p);
    let n_total = map.n_total();
    let fixed = dirichlet_values(problem, &map)?;
    let mut free_of = vec![usize::MAX; n_total];
    let mut n_free = 0;
    for (g, f) in free_of.iter_mut().enumerate() {
        if !fixed.contains_key(&g) {
            *f = n_free;
            n_free += 1;
        }
    }
    let ne = mesh.n_elements();
    let l2g: Vec<Vec<(usize, C64)>> = (0..ne).into_par_iter().map(|e| problem.local_to_global(&map, e)).collect();
    let (locals, distinct) = condensed_elements(problem)?;
    let free_lists: Vec<Vec<Option<usize>>> = l2g.iter().map(|l| l.iter().map(|(g, _)| if free_of[*g] == usize::MAX { None } else { Some(free_of[*g]) }).collect()).collect();
    let pattern = Pattern::build(n_free, &free_lists);
    let mut values = vec![ZERO; pattern.row_idx.len()];
    let mut rhs = Mat::<C64>::zeros(n_free, 1);
    for e in 0..ne {
        let c = &locals[e];
        let lg = &l2g[e];
        let fl = &free_lists[e];
        let n = lg.len();
        for a in 0..n {
            let Some(fa) = fl[a] else { continue };
            let wa = lg[a].1.conj();
            rhs[(fa, 0)] += wa * c.g[(a, 0)];
            for b in 0..n {
                let v = wa * c.s[(a, b)] * lg[b].1;
                match fl[b] {
                    Some(fb) if fa >= fb => values[pattern.position(fa, fb)] += v,
                    Some(_) => {}
                    None => {
                        let xd = fixed[&lg[b].0];
                        if xd != ZERO {
                            rhs[(fa, 0)] -= v * xd;
                        }
                    }
                }
            }
        }
    }
    let assembly_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let nnz = values.len();
    let mut traces = vec![ZERO; n_total];
    for (g, v) in &fixed {
        traces[*g] = *v;
    }
    if n_free > 0 {
        let symbolic = SymbolicSparseColMat::<usize>::new_checked(n_free, n_free, pattern.col_ptr, None, pattern.row_idx);
        let a = SparseColMat::<usize, C64>::new(symbolic, values);
        let llt = a.sp_cholesky(Side::Lower).map_err(|e| Error::Solver(format!("sparse Cholesky failed: {e:?}")))?;
        let x = llt.solve(&rhs);
        for g in 0..n_total {
            if free_of[g] != usize::MAX {
                traces[g] = x[(free_of[g], 0)];
            }
        }
    }
    let solve_seconds = t1.elapsed().as_secs_f64();
    let fields: Vec<Vec<C64>> = (0..ne)
        .into_par_iter()
        .map(|e| {
            let xt: Vec<C64> = l2g[e].iter().map(|(g, w)| traces[*g] * *w).collect();
            locals[e].recover(&xt)
        })
        .collect();
    let element_k = (0..ne).map(|e| problem.element_k(e).1).collect();
    Ok(Solution {
        mesh: mesh.clone(),
        p: problem.p,
        ansatz: problem.ansatz.clone(),
        dofs: map,
        traces,
        fields,
        element_k,
        stats: SolveStats { n_elements: ne, n_dofs: n_total, n_free, nnz, distinct_element_matrices: distinct, assembly_seconds, solve_seconds },
    })
}

/// Local trace and field vector of element `e` as used by its normal system.
pub fn local_vector(problem: &Problem, sol: &Solution, e: usize) -> Vec<C64> {
    let mut x = sol.fields[e].clone();
    x.extend(problem.local_to_global(&sol.dofs, e).iter().map(|(g, w)| sol.traces[*g] * *w));
    x
}

/// Element-wise DPG residual `‖B u_h − l‖_{V'}`.
pub fn residuals(problem: &Problem, sol: &Solution) -> Result<Vec<f64>> {
    (0..problem.mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let ns = problem.normal_system(e)?;
            Ok(ns.residual2(&local_vector(problem, sol, e)).sqrt())
        })
        .collect()
}

/// Dense condensed global matrix including fixed dofs (small problems only).
pub fn dense_global_matrix(problem: &Problem) -> Result<Mat<C64>> {
    problem.validate()?;
    let map = DofMap::new(&problem.mesh, problem.p);
    let n = map.n_total();
    if n > 6000 {
        return Err(Error::Precondition(format!("dense global matrix too large ({n} dofs)")));
    }
    let (locals, _) = condensed_elements(problem)?;
    let mut a = Mat::<C64>::zeros(n, n);
    for (e, c) in locals.iter().enumerate() {
        let lg = problem.local_to_global(&map, e);
        for (i, (gi, wi)) in lg.iter().enumerate() {
            for (j, (gj, wj)) in lg.iter().enumerate() {
                a[(*gi, *gj)] += wi.conj() * c.s[(i, j)] * *wj;
            }
        }
    }
    Ok(a)
}

/// Relative L2 errors of `(E, H)` against exact fields, by element quadrature.
pub fn l2_errors(sol: &Solution, exact: &(dyn Fn([f64; 3]) -> (CVec3, CVec3) + Sync)) -> (f64, f64) {
    let mesh = &sol.mesh;
    let (gx, gw) = gauss_legendre(sol.p + 3);
    let sums: Vec<[f64; 4]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let (qi, k) = mesh.element(e);
            let z0 = mesh.z[k];
            let h = mesh.z[k + 1] - z0;
            let map = &mesh.cs.quads[qi].map;
            let mut acc = [0.0; 4];
            for (a, wa) in gx.iter().zip(&gw) {
                for (b, wb) in gx.iter().zip(&gw) {
                    let (xy, j) = map.eval(*a, *b);
                    let det = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) * h;
                    for (c, wc) in gx.iter().zip(&gw) {
                        let w = wa * wb * wc * det;
                        let (eh, hh) = sol.eval_in(e, [*a, *b, *c]);
                        let (ee, he) = exact([xy[0], xy[1], z0 + h * c]);
                        for i in 0..3 {
                            acc[0] += w * (eh[i] - ee[i]).norm_sqr();
                            acc[1] += w * ee[i].norm_sqr();
                            acc[2] += w * (hh[i] - he[i]).norm_sqr();
                            acc[3] += w * he[i].norm_sqr();
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let t = sums.iter().fold([0.0; 4], |mut s, a| {
        for i in 0..4 {
            s[i] += a[i];
        }
        s
    });
    ((t[0] / t[1].max(1e-300)).sqrt(), (t[2] / t[3].max(1e-300)).sqrt())
}
