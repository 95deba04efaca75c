//! Curved quadrilateral cross-section meshes with exact geometry maps.
//!
//! The disk template is a center square, four core blocks blending the square sides
//! into the core circle, and four cladding annulus sectors. Each block is split into
//! `(r+1) × (r+1)` sub-quads in its parameter space, so neighbouring quads always
//! share affinely related edge parametrizations.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};

/// Map from the unit square `(ξ, η)` to the cross-section plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadMap {
    /// Bilinear map from four vertices listed counter-clockwise from `(0,0)`.
    Bilinear { v: [[f64; 2]; 4] },
    /// Linear blend from a straight segment (ξ = 0) to a circular arc (ξ = 1),
    /// restricted to the parameter window `[s0,s1]×[t0,t1]` of the block.
    Blend { a: [f64; 2], b: [f64; 2], radius: f64, th_a: f64, th_b: f64, win: [f64; 4] },
    /// Exact annular sector: ξ radial, η angular.
    Annular { r0: f64, r1: f64, th0: f64, th1: f64 },
}

impl QuadMap {
    /// Point and Jacobian `[[x_ξ, x_η], [y_ξ, y_η]]`.
    pub fn eval(&self, xi: f64, eta: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        match *self {
            QuadMap::Bilinear { v } => {
                let n = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta];
                let dxi = [-(1.0 - eta), 1.0 - eta, eta, -eta];
                let deta = [-(1.0 - xi), -xi, xi, 1.0 - xi];
                let mut p = [0.0; 2];
                let mut j = [[0.0; 2]; 2];
                for k in 0..4 {
                    for c in 0..2 {
                        p[c] += n[k] * v[k][c];
                        j[c][0] += dxi[k] * v[k][c];
                        j[c][1] += deta[k] * v[k][c];
                    }
                }
                (p, j)
            }
            QuadMap::Blend { a, b, radius, th_a, th_b, win } => {
                // block coordinates: t radial (segment → arc), s along the side
                let t = win[0] + xi * (win[1] - win[0]);
                let s = win[2] + eta * (win[3] - win[2]);
                let (dt, ds) = (win[1] - win[0], win[3] - win[2]);
                let seg = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let dseg = [b[0] - a[0], b[1] - a[1]];
                let th = th_a + s * (th_b - th_a);
                let arc = [radius * th.cos(), radius * th.sin()];
                let darc = [-radius * th.sin() * (th_b - th_a), radius * th.cos() * (th_b - th_a)];
                let mut p = [0.0; 2];
                let mut j = [[0.0; 2]; 2];
                for c in 0..2 {
                    p[c] = (1.0 - t) * seg[c] + t * arc[c];
                    j[c][0] = (arc[c] - seg[c]) * dt;
                    j[c][1] = ((1.0 - t) * dseg[c] + t * darc[c]) * ds;
                }
                (p, j)
            }
            QuadMap::Annular { r0, r1, th0, th1 } => {
                let r = r0 + xi * (r1 - r0);
                let th = th0 + eta * (th1 - th0);
                let (s, c) = th.sin_cos();
                (
                    [r * c, r * s],
                    [[(r1 - r0) * c, -r * s * (th1 - th0)], [(r1 - r0) * s, r * c * (th1 - th0)]],
                )
            }
        }
    }

    pub fn point(&self, xi: f64, eta: f64) -> [f64; 2] {
        self.eval(xi, eta).0
    }

    /// Inverse map by Newton iteration; `None` if the point is outside the quad.
    pub fn inverse(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        let mut q = [0.5, 0.5];
        for _ in 0..50 {
            let (p, j) = self.eval(q[0], q[1]);
            let r = [x[0] - p[0], x[1] - p[1]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let d = [(j[1][1] * r[0] - j[0][1] * r[1]) / det, (-j[1][0] * r[0] + j[0][0] * r[1]) / det];
            q[0] += d[0];
            q[1] += d[1];
            q[0] = q[0].clamp(-0.5, 1.5);
            q[1] = q[1].clamp(-0.5, 1.5);
            if d[0].abs() + d[1].abs() < 1e-14 {
                break;
            }
        }
        let tol = 1e-10;
        if q[0] >= -tol && q[0] <= 1.0 + tol && q[1] >= -tol && q[1] <= 1.0 + tol {
            let p = self.point(q[0], q[1]);
            let scale = x[0].abs().max(x[1].abs()).max(1.0);
            if (p[0] - x[0]).abs() + (p[1] - x[1]).abs() < 1e-9 * scale {
                return Some([q[0].clamp(0.0, 1.0), q[1].clamp(0.0, 1.0)]);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Material {
    Core,
    Cladding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SideTag {
    /// outer fiber boundary Γ_tr
    Transverse,
    /// rectangle walls normal to x
    XWall,
    /// rectangle walls normal to y
    YWall,
}

#[derive(Debug, Clone)]
pub struct Quad {
    pub map: QuadMap,
    /// vertex ids at (0,0), (1,0), (1,1), (0,1)
    pub vertices: [usize; 4],
    /// edge ids for η=0, ξ=1, η=1, ξ=0 (local directions +ξ, +η, +ξ, +η)
    pub edges: [usize; 4],
    pub material: Material,
}

#[derive(Debug, Clone)]
pub struct Edge2 {
    /// vertices ordered by ascending id (global orientation)
    pub v: [usize; 2],
    pub quads: Vec<usize>,
    pub boundary: Option<SideTag>,
}

#[derive(Debug, Clone)]
pub struct CrossSection {
    pub vertices: Vec<[f64; 2]>,
    pub quads: Vec<Quad>,
    pub edges: Vec<Edge2>,
    pub kind: CrossSectionKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossSectionKind {
    Disk { r_core: f64, r_clad: f64 },
    Rectangle { half_x: f64, half_y: f64 },
}

/// Disk mesh options. `refinement` splits every template block `(r+1)×(r+1)`;
/// `clad_grading > 1` concentrates cladding rings toward the core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskOptions {
    pub refinement: usize,
    pub clad_grading: f64,
    /// extra radial splits in the cladding on top of the refinement
    pub extra_clad_rings: usize,
    /// square corner radius as a fraction of r_core
    pub square_fraction: f64,
}

impl Default for DiskOptions {
    fn default() -> Self {
        DiskOptions { refinement: 0, clad_grading: 1.0, extra_clad_rings: 0, square_fraction: 0.6 }
    }
}

struct Builder {
    vertices: Vec<[f64; 2]>,
    quads: Vec<(QuadMap, [usize; 4], Material)>,
    tol: f64,
}

impl Builder {
    fn vertex(&mut self, p: [f64; 2]) -> usize {
        for (i, q) in self.vertices.iter().enumerate() {
            if (q[0] - p[0]).abs() < self.tol && (q[1] - p[1]).abs() < self.tol {
                return i;
            }
        }
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    fn push(&mut self, map: QuadMap, material: Material) {
        let ids = [
            self.vertex(map.point(0.0, 0.0)),
            self.vertex(map.point(1.0, 0.0)),
            self.vertex(map.point(1.0, 1.0)),
            self.vertex(map.point(0.0, 1.0)),
        ];
        self.quads.push((map, ids, material));
    }
}

fn breakpoints(n: usize, grading: f64) -> Vec<f64> {
    if (grading - 1.0).abs() < 1e-12 {
        return (0..=n).map(|i| i as f64 / n as f64).collect();
    }
    let total: f64 = (0..n).map(|i| grading.powi(i as i32)).sum();
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for i in 0..n {
        acc += grading.powi(i as i32) / total;
        out.push(acc);
    }
    *out.last_mut().unwrap() = 1.0;
    out
}

impl CrossSection {
    pub fn disk(r_core: f64, r_clad: f64, opts: DiskOptions) -> Result<Self> {
        if !(r_core > 0.0 && r_clad > r_core) {
            return Err(Error::Precondition("disk mesh needs 0 < r_core < r_clad".into()));
        }
        let n = opts.refinement + 1;
        let mut b = Builder { vertices: vec![], quads: vec![], tol: 1e-9 * r_clad };
        let c = opts.square_fraction * r_core / std::f64::consts::SQRT_2;
        let split = breakpoints(n, 1.0);
        // center square
        for i in 0..n {
            for j in 0..n {
                let x0 = -c + 2.0 * c * split[i];
                let x1 = -c + 2.0 * c * split[i + 1];
                let y0 = -c + 2.0 * c * split[j];
                let y1 = -c + 2.0 * c * split[j + 1];
                b.push(QuadMap::Bilinear { v: [[x0, y0], [x1, y0], [x1, y1], [x0, y1]] }, Material::Core);
            }
        }
        let rot = |p: [f64; 2], q: usize| -> [f64; 2] {
            let (s, co) = (q as f64 * FRAC_PI_2).sin_cos();
            [co * p[0] - s * p[1], s * p[0] + co * p[1]]
        };
        let clad_n = n + opts.extra_clad_rings;
        let rings = breakpoints(clad_n, opts.clad_grading);
        for q in 0..4 {
            let a = rot([c, -c], q);
            let bb = rot([c, c], q);
            let th_a = -FRAC_PI_4 + q as f64 * FRAC_PI_2;
            let th_b = th_a + FRAC_PI_2;
            for i in 0..n {
                for j in 0..n {
                    let win = [split[i], split[i + 1], split[j], split[j + 1]];
                    b.push(QuadMap::Blend { a, b: bb, radius: r_core, th_a, th_b, win }, Material::Core);
                }
            }
            for i in 0..clad_n {
                for j in 0..n {
                    let r0 = r_core + (r_clad - r_core) * rings[i];
                    let r1 = r_core + (r_clad - r_core) * rings[i + 1];
                    let t0 = th_a + (th_b - th_a) * split[j];
                    let t1 = th_a + (th_b - th_a) * split[j + 1];
                    b.push(QuadMap::Annular { r0, r1, th0: t0, th1: t1 }, Material::Cladding);
                }
            }
        }
        Self::finish(b, CrossSectionKind::Disk { r_core, r_clad })
    }

    pub fn rectangle(half_x: f64, half_y: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(half_x > 0.0 && half_y > 0.0 && nx > 0 && ny > 0) {
            return Err(Error::Precondition("rectangle mesh needs positive sizes".into()));
        }
        let mut b = Builder { vertices: vec![], quads: vec![], tol: 1e-9 * half_x.max(half_y) };
        for j in 0..ny {
            for i in 0..nx {
                let x0 = -half_x + 2.0 * half_x * i as f64 / nx as f64;
                let x1 = -half_x + 2.0 * half_x * (i + 1) as f64 / nx as f64;
                let y0 = -half_y + 2.0 * half_y * j as f64 / ny as f64;
                let y1 = -half_y + 2.0 * half_y * (j + 1) as f64 / ny as f64;
                b.push(QuadMap::Bilinear { v: [[x0, y0], [x1, y0], [x1, y1], [x0, y1]] }, Material::Core);
            }
        }
        Self::finish(b, CrossSectionKind::Rectangle { half_x, half_y })
    }

    fn finish(b: Builder, kind: CrossSectionKind) -> Result<Self> {
        let mut edges: Vec<Edge2> = Vec::new();
        let mut lookup = std::collections::HashMap::new();
        let mut quads = Vec::new();
        for (qi, (map, v, material)) in b.quads.into_iter().enumerate() {
            // local edges: η=0 (v0→v1), ξ=1 (v1→v2), η=1 (v3→v2), ξ=0 (v0→v3)
            let pairs = [(v[0], v[1]), (v[1], v[2]), (v[3], v[2]), (v[0], v[3])];
            let mut eids = [0; 4];
            for (k, &(a, bb)) in pairs.iter().enumerate() {
                let key = (a.min(bb), a.max(bb));
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge2 { v: [key.0, key.1], quads: vec![], boundary: None });
                    edges.len() - 1
                });
                edges[id].quads.push(qi);
                eids[k] = id;
            }
            for &(xi, eta) in &[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5)] {
                let (_, j) = map.eval(xi, eta);
                if j[0][0] * j[1][1] - j[0][1] * j[1][0] <= 0.0 {
                    return Err(Error::Geometry(format!("quad {qi} has a non-positive Jacobian")));
                }
            }
            quads.push(Quad { map, vertices: v, edges: eids, material });
        }
        let vertices = b.vertices;
        for e in edges.iter_mut() {
            match e.quads.len() {
                1 => {
                    e.boundary = Some(match kind {
                        CrossSectionKind::Disk { .. } => SideTag::Transverse,
                        CrossSectionKind::Rectangle { half_x, .. } => {
                            let (p, q) = (vertices[e.v[0]], vertices[e.v[1]]);
                            if (p[0] - q[0]).abs() < 1e-12 * half_x && (p[0].abs() - half_x).abs() < 1e-9 * half_x {
                                SideTag::XWall
                            } else {
                                SideTag::YWall
                            }
                        }
                    })
                }
                2 => {}
                n => return Err(Error::Geometry(format!("edge shared by {n} quads"))),
            }
        }
        Ok(CrossSection { vertices, quads, edges, kind })
    }

    /// Quad containing `(x, y)` and its reference coordinates.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        self.quads.iter().enumerate().find_map(|(i, q)| q.map.inverse(x).map(|r| (i, r)))
    }

    pub fn area(&self) -> f64 {
        let (gx, gw) = crate::quadrature::gauss_legendre(8);
        let mut a = 0.0;
        for q in &self.quads {
            for (xi, wi) in gx.iter().zip(&gw) {
                for (eta, wj) in gx.iter().zip(&gw) {
                    let (_, j) = q.map.eval(*xi, *eta);
                    a += wi * wj * (j[0][0] * j[1][1] - j[0][1] * j[1][0]);
                }
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_counts() {
        let cs = CrossSection::disk(1.0, 3.0, DiskOptions::default()).unwrap();
        assert_eq!(cs.quads.len(), 9);
        assert_eq!(cs.vertices.len(), 12);
        assert_eq!(cs.edges.len(), 20);
        let refined = CrossSection::disk(1.0, 3.0, DiskOptions { refinement: 1, ..Default::default() }).unwrap();
        assert_eq!(refined.quads.len(), 36);
    }

    #[test]
    fn disk_area_is_exact() {
        for r in 0..3 {
            let cs = CrossSection::disk(1.0, 2.5, DiskOptions { refinement: r, clad_grading: 1.3, ..Default::default() }).unwrap();
            let exact = std::f64::consts::PI * 2.5 * 2.5;
            assert!((cs.area() - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn every_interior_edge_has_two_quads() {
        let cs = CrossSection::disk(1.0, 2.0, DiskOptions { refinement: 2, ..Default::default() }).unwrap();
        let boundary = cs.edges.iter().filter(|e| e.boundary.is_some()).count();
        assert_eq!(boundary, 4 * 3);
        for e in &cs.edges {
            assert_eq!(e.quads.len(), if e.boundary.is_some() { 1 } else { 2 });
        }
    }

    #[test]
    fn shared_edges_agree_pointwise() {
        let cs = CrossSection::disk(1.0, 2.0, DiskOptions { refinement: 1, ..Default::default() }).unwrap();
        let param = |k: usize, s: f64| match k {
            0 => (s, 0.0),
            1 => (1.0, s),
            2 => (s, 1.0),
            _ => (0.0, s),
        };
        for e in cs.edges.iter().filter(|e| e.quads.len() == 2) {
            let mut curves = vec![];
            for &qi in &e.quads {
                let q = &cs.quads[qi];
                let k = q.edges.iter().position(|&x| x == cs.edges.iter().position(|y| std::ptr::eq(y, e)).unwrap()).unwrap();
                let start = match k {
                    0 | 3 => q.vertices[0],
                    1 => q.vertices[1],
                    _ => q.vertices[3],
                };
                let flip = start != e.v[0];
                curves.push((q.map, k, flip));
            }
            for s in [0.1, 0.37, 0.5, 0.81] {
                let pts: Vec<[f64; 2]> = curves
                    .iter()
                    .map(|(m, k, flip)| {
                        let ss = if *flip { 1.0 - s } else { s };
                        let (a, b) = param(*k, ss);
                        m.point(a, b)
                    })
                    .collect();
                assert!((pts[0][0] - pts[1][0]).abs() + (pts[0][1] - pts[1][1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn locate_and_inverse() {
        let cs = CrossSection::disk(1.0, 2.0, DiskOptions { refinement: 1, ..Default::default() }).unwrap();
        for p in [[0.0, 0.0], [0.3, -0.2], [1.2, 0.9], [-1.5, 0.1]] {
            let (qi, r) = cs.locate(p).unwrap();
            let back = cs.quads[qi].map.point(r[0], r[1]);
            assert!((back[0] - p[0]).abs() + (back[1] - p[1]).abs() < 1e-10);
        }
        assert!(cs.locate([2.5, 0.0]).is_none());
    }
}
