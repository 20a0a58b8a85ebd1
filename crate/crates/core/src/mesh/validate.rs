use std::collections::BTreeMap;

use super::Mesh;
use crate::shape::{gauss_rule, jacobian, EDGE_CORNERS, FACE_NODES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementQuality {
    pub element: usize,
    /// Smallest det(G) over the 27-point rule.
    pub min_det_g: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub elements: Vec<ElementQuality>,
    pub conforming: bool,
    pub sets_valid: bool,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn min_det_g(&self) -> f64 {
        self.elements.iter().map(|e| e.min_det_g).fold(f64::INFINITY, f64::min)
    }
}

/// Checks ids, connectivity, reference Jacobians, conformity and set
/// integrity. Never fails itself; problems are listed in the report.
pub fn validate_mesh(mesh: &Mesh) -> ValidationReport {
    let mut report = ValidationReport {
        conforming: true,
        sets_valid: true,
        ..Default::default()
    };
    let n_nodes = mesh.nodes.len();

    for (i, n) in mesh.nodes.iter().enumerate() {
        if n.id != i {
            report.failures.push(format!("node at index {i} has id {}", n.id));
        }
        if !n.x.iter().all(|c| c.is_finite()) {
            report.failures.push(format!("node {i} has non-finite coordinates"));
        }
    }

    let rule = gauss_rule(3).expect("3-point rule");
    let mut topology_ok = vec![true; mesh.elements.len()];
    for (i, e) in mesh.elements.iter().enumerate() {
        if e.id != i {
            report.failures.push(format!("element at index {i} has id {}", e.id));
        }
        if let Some(bad) = e.nodes.iter().find(|&&n| n >= n_nodes) {
            report.failures.push(format!("element {i} references missing node {bad}"));
            topology_ok[i] = false;
            continue;
        }
        let mut sorted = e.nodes;
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            report.failures.push(format!("element {i} lists node {} more than once", w[0]));
            topology_ok[i] = false;
        }
        let coords = mesh.element_coords(i);
        let mut min_det = f64::INFINITY;
        for p in &rule.points {
            let det = match jacobian(&coords, *p) {
                Ok(j) => j.det_g,
                Err(crate::error::ElementError::InvertedReference { det_g, .. }) => det_g,
                Err(_) => f64::NAN,
            };
            min_det = if det.is_nan() { f64::NAN } else { min_det.min(det) };
        }
        if !(min_det > 0.0) {
            report
                .failures
                .push(format!("element {i} is inverted or degenerate (min det(G) = {min_det:e})"));
        }
        report.elements.push(ElementQuality {
            element: i,
            min_det_g: min_det,
        });
    }

    // Every edge must carry the same mid-node in all elements sharing it, and
    // a face may be shared by at most two elements.
    let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut faces: BTreeMap<[usize; 4], (usize, [usize; 4])> = BTreeMap::new();
    for (i, e) in mesh.elements.iter().enumerate() {
        if !topology_ok[i] {
            continue;
        }
        for (k, [a, b]) in EDGE_CORNERS.iter().enumerate() {
            let (na, nb) = (e.nodes[*a], e.nodes[*b]);
            let key = (na.min(nb), na.max(nb));
            let mid = e.nodes[8 + k];
            if let Some(&prev) = edges.get(&key) {
                if prev != mid {
                    report.conforming = false;
                    report.failures.push(format!(
                        "element {i}: edge {:?} has mid-node {mid}, another element uses {prev}",
                        key
                    ));
                }
            } else {
                edges.insert(key, mid);
            }
        }
        for face in FACE_NODES.iter() {
            let mut key = [0; 4];
            for (slot, &l) in key.iter_mut().zip(face.iter()) {
                *slot = e.nodes[l];
            }
            key.sort_unstable();
            let entry = faces.entry(key).or_insert((0, [0; 4]));
            entry.0 += 1;
            if entry.0 > 2 {
                report.conforming = false;
                report.failures.push(format!("element {i}: face {:?} shared by more than two elements", key));
            }
        }
    }

    // Coincident but distinct nodes indicate an unstitched interface.
    let scale = {
        let (lo, hi) = mesh.bounds();
        (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max).max(1.0)
    };
    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.sort_by(|&a, &b| mesh.nodes[a].x[0].total_cmp(&mesh.nodes[b].x[0]));
    let tol = 1e-10 * scale;
    for (pos, &a) in order.iter().enumerate() {
        for &b in order[pos + 1..].iter() {
            if mesh.nodes[b].x[0] - mesh.nodes[a].x[0] > tol {
                break;
            }
            if super::dist2(mesh.nodes[a].x, mesh.nodes[b].x) <= tol * tol {
                report.conforming = false;
                report.failures.push(format!("nodes {a} and {b} coincide"));
            }
        }
    }

    for (name, ids) in &mesh.node_sets {
        if let Some(bad) = ids.iter().find(|&&n| n >= n_nodes) {
            report.sets_valid = false;
            report.failures.push(format!("node set `{name}` references missing node {bad}"));
        }
    }
    for (name, sides) in &mesh.side_sets {
        if let Some(bad) = sides.iter().find(|s| s.element >= mesh.elements.len() || s.face >= 6) {
            report.sets_valid = false;
            report
                .failures
                .push(format!("side set `{name}` references missing side ({}, {})", bad.element, bad.face));
        }
    }
    report
}
