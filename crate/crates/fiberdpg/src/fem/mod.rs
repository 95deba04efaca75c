//! Hexahedral DPG discretization on extruded fiber meshes.

pub mod basis;
pub mod dense;
pub mod element;
pub mod geometry;
pub mod mesh;
pub mod solver;
pub mod infsup;
