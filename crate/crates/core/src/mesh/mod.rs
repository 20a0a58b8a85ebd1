//! Mesh data model for 20-node hexahedral discretizations.
//!
//! A [`Mesh`] is immutable once built. Node ids are dense (`0..n_nodes`) and
//! equal to the index into [`Mesh::nodes`]; the same holds for elements.

mod builders;
mod io;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

pub use builders::{
    build_actuator, build_box_self_contact, build_pneumatic_box, build_punch, ActuatorSpec,
    BoxSelfContactSpec, PneumaticBoxSpec, PunchSpec, StructuredGrid,
};
pub use io::{load_mesh, parse_mesh, write_mesh, MeshFormat};
pub use validate::{validate_mesh, ElementQuality, ValidationReport};

use crate::error::MeshError;
use crate::shape::{FACE_NODES, NODES_PER_ELEMENT};

/// Which constitutive region an element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DomainTag {
    SolidBody(u32),
    /// Fictitious contact medium; the id distinguishes separately loaded
    /// regions (e.g. individual pneumatic chambers).
    ThirdMedium(u32),
}

impl DomainTag {
    pub fn is_third_medium(&self) -> bool {
        matches!(self, DomainTag::ThirdMedium(_))
    }
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainTag::SolidBody(id) => write!(f, "S{id}"),
            DomainTag::ThirdMedium(id) => write!(f, "M{id}"),
        }
    }
}

impl std::str::FromStr for DomainTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, id) = s.split_at(s.char_indices().nth(1).map(|(i, _)| i).unwrap_or(s.len()));
        let id: u32 = id.parse().map_err(|_| format!("bad domain tag `{s}`"))?;
        match kind {
            "S" => Ok(DomainTag::SolidBody(id)),
            "M" => Ok(DomainTag::ThirdMedium(id)),
            _ => Err(format!("bad domain tag `{s}` (expected S<id> or M<id>)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hex20Element {
    pub id: usize,
    pub nodes: [usize; NODES_PER_ELEMENT],
    pub tag: DomainTag,
}

/// An element face, numbered as in [`crate::shape::FACE_NODES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Side {
    pub element: usize,
    pub face: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Node>,
    pub elements: Vec<Hex20Element>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    pub side_sets: BTreeMap<String, Vec<Side>>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, element: usize) -> [[f64; 3]; NODES_PER_ELEMENT] {
        let e = &self.elements[element];
        let mut c = [[0.0; 3]; NODES_PER_ELEMENT];
        for (slot, &n) in c.iter_mut().zip(e.nodes.iter()) {
            *slot = self.nodes[n].x;
        }
        c
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize], MeshError> {
        self.node_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| MeshError::UnknownNodeSet(name.to_string()))
    }

    pub fn side_set(&self, name: &str) -> Result<&[Side], MeshError> {
        self.side_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| MeshError::UnknownSideSet(name.to_string()))
    }

    /// Global node ids of one element face (4 corners, then 4 mid-edge nodes).
    pub fn face_nodes(&self, side: Side) -> [usize; 8] {
        let e = &self.elements[side.element];
        FACE_NODES[side.face as usize].map(|local| e.nodes[local])
    }

    /// Node closest to `x` (lowest id on ties).
    pub fn nearest_node(&self, x: [f64; 3]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for n in &self.nodes {
            let d = dist2(n.x, x);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((n.id, d));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Axis-aligned bounding box of all nodes.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for n in &self.nodes {
            for k in 0..3 {
                lo[k] = lo[k].min(n.x[k]);
                hi[k] = hi[k].max(n.x[k]);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}
