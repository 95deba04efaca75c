//! Extruded hexahedral meshes and the trace degree-of-freedom map.

use std::collections::HashMap;

use super::basis::{trace_functions, LocalEntity, TraceFn};
use super::geometry::{CrossSection, CrossSectionKind, DiskOptions, SideTag};
use crate::error::{Error, Result};
use crate::fibermodes::FiberConfig;

/// Cross-section extruded through the z-levels `z[0] = 0 < … < z[nz] = L`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub cs: CrossSection,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    In,
    Out,
    Side(SideTag),
}

impl Mesh {
    pub fn new(cs: CrossSection, z: Vec<f64>) -> Result<Self> {
        if z.len() < 2 {
            return Err(Error::Precondition("need at least one layer".into()));
        }
        if z[0] != 0.0 || z.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("z-levels must start at 0 and increase strictly".into()));
        }
        Ok(Mesh { cs, z })
    }

    /// Uniform layers over `(0, L)`.
    pub fn uniform_levels(length: f64, n_layers: usize) -> Result<Vec<f64>> {
        if !(length > 0.0) || n_layers == 0 {
            return Err(Error::Precondition(format!("need L > 0 and n_layers >= 1, got {length} and {n_layers}")));
        }
        Ok((0..=n_layers).map(|i| length * i as f64 / n_layers as f64).collect())
    }

    /// Levels with `n_a` uniform layers on `(0, l)` and `n_b` on `(l, L)`.
    pub fn two_region_levels(l: f64, length: f64, n_a: usize, n_b: usize) -> Result<Vec<f64>> {
        if !(l > 0.0 && length > l) || n_a == 0 || n_b == 0 {
            return Err(Error::Precondition("two-region levels need 0 < l < L and layers in both".into()));
        }
        let mut z: Vec<f64> = (0..=n_a).map(|i| l * i as f64 / n_a as f64).collect();
        z.extend((1..=n_b).map(|i| l + (length - l) * i as f64 / n_b as f64));
        Ok(z)
    }

    pub fn n_layers(&self) -> usize {
        self.z.len() - 1
    }

    pub fn n_elements(&self) -> usize {
        self.cs.quads.len() * self.n_layers()
    }

    pub fn length(&self) -> f64 {
        *self.z.last().unwrap()
    }

    /// Element id → (quad, layer).
    pub fn element(&self, e: usize) -> (usize, usize) {
        (e % self.cs.quads.len(), e / self.cs.quads.len())
    }

    pub fn element_id(&self, quad: usize, layer: usize) -> usize {
        layer * self.cs.quads.len() + quad
    }

    /// Layer containing `z` (the upper layer at shared levels, the last at `L`).
    pub fn layer_of(&self, z: f64) -> Option<usize> {
        if z < 0.0 || z > self.length() {
            return None;
        }
        let n = self.n_layers();
        let mut k = match self.z.binary_search_by(|v| v.partial_cmp(&z).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        if k >= n {
            k = n - 1;
        }
        Some(k)
    }

    pub fn has_level(&self, z: f64) -> bool {
        self.z.iter().any(|v| (v - z).abs() <= 1e-12 * self.length())
    }

    /// Face-pairing audit: interior vertical faces and horizontal faces between layers
    /// each touch exactly two elements, boundary faces exactly one.
    pub fn audit_faces(&self) -> Result<()> {
        let mut count: HashMap<(bool, usize, usize), usize> = HashMap::new();
        let nz = self.n_layers();
        for e in 0..self.n_elements() {
            let (q, k) = self.element(e);
            for &ed in &self.cs.quads[q].edges {
                *count.entry((false, ed, k)).or_default() += 1;
            }
            *count.entry((true, q, k)).or_default() += 1;
            *count.entry((true, q, k + 1)).or_default() += 1;
        }
        for (&(horizontal, id, lev), &n) in &count {
            let boundary = if horizontal { lev == 0 || lev == nz } else { self.cs.edges[id].boundary.is_some() };
            let want = if boundary { 1 } else { 2 };
            if n != want {
                return Err(Error::Geometry(format!("face ({horizontal}, {id}, {lev}) has {n} elements, expected {want}")));
            }
        }
        Ok(())
    }
}

/// Builds the fiber mesh: disk cross-section extruded into `n_layers` uniform layers.
pub fn build_mesh(config: &FiberConfig, length: f64, n_layers: usize, refinement: usize) -> Result<Mesh> {
    build_mesh_with_levels(config, Mesh::uniform_levels(length, n_layers)?, refinement)
}

/// Fiber mesh on explicit z-levels.
pub fn build_mesh_with_levels(config: &FiberConfig, levels: Vec<f64>, refinement: usize) -> Result<Mesh> {
    config.validate()?;
    let cs = CrossSection::disk(config.r_core, config.r_clad, DiskOptions { refinement, clad_grading: 1.0, ..Default::default() })?;
    let mesh = Mesh::new(cs, levels)?;
    mesh.audit_faces()?;
    Ok(mesh)
}

/// Global trace entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entity {
    HEdge { edge: usize, level: usize },
    VEdge { vertex: usize, layer: usize },
    HFace { quad: usize, level: usize },
    VFace { edge: usize, layer: usize },
}

/// Local trace function → global dof (in the Ê numbering) with orientation sign.
#[derive(Debug, Clone, Copy)]
pub struct LocalDof {
    pub global: usize,
    pub sign: f64,
    pub entity: Entity,
}

/// Numbering of the order-`p` tangential trace space. Ê dofs come first; the Ĥ dof of
/// the same basis function is `global + n_e`.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub p: usize,
    pub n_e: usize,
    pub trace: Vec<TraceFn>,
    off: [usize; 4],
    nz: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, p: usize) -> Self {
        let cs = &mesh.cs;
        let nz = mesh.n_layers();
        let ne = p;
        let nf = 2 * p * (p - 1);
        let h_edges = cs.edges.len() * (nz + 1) * ne;
        let v_edges = cs.vertices.len() * nz * ne;
        let h_faces = cs.quads.len() * (nz + 1) * nf;
        let v_faces = cs.edges.len() * nz * nf;
        let off = [0, h_edges, h_edges + v_edges, h_edges + v_edges + h_faces];
        DofMap { p, n_e: off[3] + v_faces, trace: trace_functions(p), off, nz }
    }

    pub fn n_total(&self) -> usize {
        2 * self.n_e
    }

    pub fn n_local(&self) -> usize {
        self.trace.len()
    }

    fn entity_base(&self, mesh: &Mesh, ent: Entity) -> usize {
        let p = self.p;
        let nf = 2 * p * (p - 1);
        let cs = &mesh.cs;
        match ent {
            Entity::HEdge { edge, level } => self.off[0] + (level * cs.edges.len() + edge) * p,
            Entity::VEdge { vertex, layer } => self.off[1] + (layer * cs.vertices.len() + vertex) * p,
            Entity::HFace { quad, level } => self.off[2] + (level * cs.quads.len() + quad) * nf,
            Entity::VFace { edge, layer } => self.off[3] + (layer * cs.edges.len() + edge) * nf,
        }
    }

    /// Local-to-global map of the element's trace functions.
    pub fn element_dofs(&self, mesh: &Mesh, e: usize) -> Vec<LocalDof> {
        let (qi, k) = mesh.element(e);
        let quad = &mesh.cs.quads[qi];
        let v = quad.vertices;
        let p = self.p;
        // orientation of the local +direction of each 2D edge versus ascending ids
        let edge_sign = |local: usize| -> f64 {
            let (a, b) = match local {
                0 => (v[0], v[1]),
                1 => (v[1], v[2]),
                2 => (v[3], v[2]),
                _ => (v[0], v[3]),
            };
            if a < b {
                1.0
            } else {
                -1.0
            }
        };
        let pow = |s: f64, n: usize| if s > 0.0 || n % 2 == 0 { 1.0 } else { -1.0 };
        let u_index = |a: usize, n: usize| a * (p - 1) + (n - 2);
        let w_index = |n: usize, a: usize| p * (p - 1) + (n - 2) * p + a;
        let mut out = Vec::with_capacity(self.trace.len());
        for t in &self.trace {
            let f = t.f;
            let (ent, idx, sign) = match t.entity {
                LocalEntity::Edge { axis: 0, pos } => {
                    let local = if pos[0] == 0 { 0 } else { 2 };
                    let s = edge_sign(local);
                    (Entity::HEdge { edge: quad.edges[local], level: k + pos[1] }, f.a, pow(s, f.a + 1))
                }
                LocalEntity::Edge { axis: 1, pos } => {
                    let local = if pos[0] == 0 { 3 } else { 1 };
                    let s = edge_sign(local);
                    (Entity::HEdge { edge: quad.edges[local], level: k + pos[1] }, f.a, pow(s, f.a + 1))
                }
                LocalEntity::Edge { pos, .. } => {
                    let vert = match (pos[0], pos[1]) {
                        (0, 0) => v[0],
                        (1, 0) => v[1],
                        (1, 1) => v[2],
                        _ => v[3],
                    };
                    (Entity::VEdge { vertex: vert, layer: k }, f.a, 1.0)
                }
                LocalEntity::Face { normal: 2, pos } => {
                    let idx = if f.comp == 0 { u_index(f.a, t.bubble) } else { w_index(t.bubble, f.a) };
                    (Entity::HFace { quad: qi, level: k + pos }, idx, 1.0)
                }
                LocalEntity::Face { normal, pos } => {
                    // vertical face; along-edge axis is ξ (normal η) or η (normal ξ)
                    let (local, along) = match (normal, pos) {
                        (1, 0) => (0, 0),
                        (1, _) => (2, 0),
                        (0, 0) => (3, 1),
                        _ => (1, 1),
                    };
                    let s = edge_sign(local);
                    let ent = Entity::VFace { edge: quad.edges[local], layer: k };
                    if f.comp == along {
                        (ent, u_index(f.a, t.bubble), pow(s, f.a + 1))
                    } else {
                        (ent, w_index(t.bubble, f.a), pow(s, t.bubble))
                    }
                }
            };
            out.push(LocalDof { global: self.entity_base(mesh, ent) + idx, sign, entity: ent });
        }
        out
    }

    /// Boundary parts containing an entity.
    pub fn entity_boundaries(&self, mesh: &Mesh, ent: Entity) -> Vec<Boundary> {
        let cs = &mesh.cs;
        let mut out = Vec::new();
        let nz = self.nz;
        let vertex_side = |vert: usize| -> Vec<SideTag> {
            let mut tags: Vec<SideTag> = cs
                .edges
                .iter()
                .filter(|e| e.boundary.is_some() && (e.v[0] == vert || e.v[1] == vert))
                .map(|e| e.boundary.unwrap())
                .collect();
            tags.sort_by_key(|t| *t as u8);
            tags.dedup();
            tags
        };
        match ent {
            Entity::HEdge { edge, level } => {
                if level == 0 {
                    out.push(Boundary::In);
                }
                if level == nz {
                    out.push(Boundary::Out);
                }
                if let Some(t) = cs.edges[edge].boundary {
                    out.push(Boundary::Side(t));
                }
            }
            Entity::VEdge { vertex, .. } => out.extend(vertex_side(vertex).into_iter().map(Boundary::Side)),
            Entity::HFace { level, .. } => {
                if level == 0 {
                    out.push(Boundary::In);
                }
                if level == nz {
                    out.push(Boundary::Out);
                }
            }
            Entity::VFace { edge, .. } => {
                if let Some(t) = cs.edges[edge].boundary {
                    out.push(Boundary::Side(t));
                }
            }
        }
        out
    }

    pub fn disk_kind(mesh: &Mesh) -> bool {
        matches!(mesh.cs.kind, CrossSectionKind::Disk { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_mesh_counts() {
        let m = build_mesh(&FiberConfig::reference(), 10.0, 1, 0).unwrap();
        assert_eq!(m.n_elements(), 9);
        m.audit_faces().unwrap();
        assert!(build_mesh(&FiberConfig::reference(), 0.0, 1, 0).is_err());
    }

    #[test]
    fn every_dof_is_reached_with_consistent_entities() {
        let m = build_mesh(&FiberConfig::reference(), 10.0, 2, 1).unwrap();
        let map = DofMap::new(&m, 3);
        let mut hit = vec![0usize; map.n_e];
        for e in 0..m.n_elements() {
            let dofs = map.element_dofs(&m, e);
            let mut seen = std::collections::HashSet::new();
            for d in &dofs {
                assert!(seen.insert(d.global), "duplicate global dof within an element");
                hit[d.global] += 1;
            }
        }
        assert!(hit.iter().all(|&h| h > 0));
    }
}
