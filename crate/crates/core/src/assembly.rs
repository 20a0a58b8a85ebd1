//! Global assembly over free DOFs with Dirichlet elimination.
//!
//! Global DOF `3·node + component`. Free DOFs are numbered in increasing
//! global order; the sparsity pattern of `K_ff` is fixed at setup and every
//! element carries a precomputed scatter map into it.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Rotation3, Unit, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::element::{
    element_contribution, qp_jacobians, with_pressure_factor, ElementGeometry, ElementMaterial, ElementVector,
    ELEMENT_DOFS,
};
use crate::error::{ElementError, SolverError};
use crate::linsolve::{nested_dissection, CsrMatrix};
use crate::material::DerivativeProvider;
use crate::mesh::{DomainTag, Mesh};
use crate::shape::{gauss_legendre_1d, gauss_rule, q2s_eval, NODES_PER_ELEMENT};

/// Ramp window of a named load group: the group factor rises linearly from 0
/// at `start` to 1 at `end` of the global load parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadGroup {
    pub start: f64,
    pub end: f64,
}

impl Default for LoadGroup {
    fn default() -> Self {
        LoadGroup { start: 0.0, end: 1.0 }
    }
}

impl LoadGroup {
    pub fn factor(&self, lambda: f64) -> f64 {
        if self.end <= self.start {
            return if lambda >= self.end { 1.0 } else { 0.0 };
        }
        ((lambda - self.start) / (self.end - self.start)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prescribed {
    /// One displacement component of every node in the set.
    Component { node_set: String, component: usize, value: f64 },
    /// Rigid rotation of the set by `angle` radians about the axis through
    /// `center`; prescribes all three components.
    Rotation {
        node_set: String,
        center: [f64; 3],
        axis: [f64; 3],
        angle: f64,
    },
}

impl Prescribed {
    pub fn node_set(&self) -> &str {
        match self {
            Prescribed::Component { node_set, .. } | Prescribed::Rotation { node_set, .. } => node_set,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletBc {
    #[serde(flatten)]
    pub prescribed: Prescribed,
    #[serde(default)]
    pub group: Option<String>,
}

/// Dead-load traction per unit reference area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractionBc {
    pub side_set: String,
    pub traction: [f64; 3],
    #[serde(default)]
    pub group: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    #[serde(default)]
    pub dirichlet: Vec<DirichletBc>,
    #[serde(default)]
    pub tractions: Vec<TractionBc>,
    #[serde(default)]
    pub body_force: Option<[f64; 3]>,
    #[serde(default)]
    pub groups: BTreeMap<String, LoadGroup>,
}

/// Material per domain tag, plus the load group that ramps each pneumatic
/// region (the default ramp when absent).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialTable {
    pub by_tag: BTreeMap<DomainTag, ElementMaterial>,
    pub pressure_groups: BTreeMap<DomainTag, String>,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub materials: MaterialTable,
    pub bcs: BoundaryConditions,
    pub provider: DerivativeProvider,
    /// Gauss points per axis.
    pub quadrature: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub n_dofs: usize,
    /// Free index of each global DOF, `None` when constrained.
    pub free_index: Vec<Option<usize>>,
    pub free: Vec<usize>,
    pub constrained: Vec<usize>,
}

impl DofMap {
    pub fn new(n_nodes: usize, constrained: &BTreeSet<usize>) -> Self {
        let n_dofs = 3 * n_nodes;
        let mut free_index = vec![None; n_dofs];
        let mut free = Vec::with_capacity(n_dofs - constrained.len());
        for dof in 0..n_dofs {
            if !constrained.contains(&dof) {
                free_index[dof] = Some(free.len());
                free.push(dof);
            }
        }
        DofMap {
            n_dofs,
            free_index,
            free,
            constrained: constrained.iter().copied().collect(),
        }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn node_dofs(node: usize) -> [usize; 3] {
        [3 * node, 3 * node + 1, 3 * node + 2]
    }
}

/// Reduced system at one state.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    /// `K_ff`, present when the tangent was requested.
    pub k: Option<CsrMatrix>,
    /// Out-of-balance force `f_int − f_ext` on free DOFs.
    pub residual: Vec<f64>,
    /// `f_int − f_ext` on constrained DOFs, in [`DofMap::constrained`] order.
    pub reactions: Vec<f64>,
    /// `K_fc · Δū_c` for the prescribed increment passed to [`Assembler::assemble`].
    pub coupling: Vec<f64>,
    /// Total potential energy.
    pub energy: f64,
}

const NO_SLOT: u32 = u32::MAX;

/// Element evaluation and scatter into the fixed global pattern.
pub struct Assembler {
    pub problem: Problem,
    pub dofs: DofMap,
    geometry: Vec<ElementGeometry>,
    materials: Vec<ElementMaterial>,
    /// Index into `groups` of the pressure ramp of each element.
    pressure_group: Vec<usize>,
    groups: Vec<LoadGroup>,
    /// Per element, `ELEMENT_DOFS²` positions into the CSR values.
    scatter: Vec<Vec<u32>>,
    pattern: CsrMatrix,
    /// Per Dirichlet BC: group index and constrained DOFs.
    dirichlet: Vec<(usize, Vec<usize>)>,
    /// Per traction/body load: group index and consistent nodal force at full load.
    loads: Vec<(usize, Vec<(usize, f64)>)>,
}

const DEFAULT_GROUP: usize = 0;

impl Assembler {
    pub fn new(problem: Problem) -> Result<Self, SolverError> {
        let setup = |m: String| SolverError::Setup(m);
        let mesh = &problem.mesh;
        let rule = gauss_rule(problem.quadrature)?;

        let mut group_names: Vec<String> = vec![String::new()];
        let mut groups = vec![LoadGroup::default()];
        for (name, g) in &problem.bcs.groups {
            if !(g.start.is_finite() && g.end.is_finite() && g.start >= 0.0 && g.end <= 1.0 && g.start <= g.end) {
                return Err(setup(format!("load group `{name}` needs 0 <= start <= end <= 1")));
            }
            group_names.push(name.clone());
            groups.push(*g);
        }
        let group_index = |name: &Option<String>| -> Result<usize, SolverError> {
            match name {
                None => Ok(DEFAULT_GROUP),
                Some(n) => group_names
                    .iter()
                    .position(|g| g == n)
                    .ok_or_else(|| SolverError::Setup(format!("unknown load group `{n}`"))),
            }
        };

        let mut materials = Vec::with_capacity(mesh.n_elements());
        let mut pressure_group = Vec::with_capacity(mesh.n_elements());
        let mut geometry = Vec::with_capacity(mesh.n_elements());
        for (i, e) in mesh.elements.iter().enumerate() {
            let m = *problem
                .materials
                .by_tag
                .get(&e.tag)
                .ok_or_else(|| setup(format!("no material for domain {} (element {i})", e.tag)))?;
            match (&m, e.tag) {
                (ElementMaterial::Solid(_), DomainTag::ThirdMedium(_)) | (ElementMaterial::ThirdMedium(_), DomainTag::SolidBody(_)) => {
                    return Err(setup(format!("material kind does not match domain {}", e.tag)))
                }
                _ => {}
            }
            materials.push(m);
            pressure_group.push(group_index(&problem.materials.pressure_groups.get(&e.tag).cloned())?);
            let geo = ElementGeometry::new(&mesh.element_coords(i), &rule, m.needs_second_derivatives()).map_err(|e| match e {
                ElementError::InvertedReference { det_g, .. } => ElementError::InvertedReference { element: Some(i), det_g },
                other => other,
            })?;
            geometry.push(geo);
        }

        let mut used = vec![false; mesh.n_nodes()];
        for e in &mesh.elements {
            for &n in &e.nodes {
                used[n] = true;
            }
        }
        if let Some(n) = used.iter().position(|u| !u) {
            return Err(setup(format!("node {n} is not connected to any element (singular system)")));
        }

        let mut constrained = BTreeSet::new();
        let mut dirichlet = Vec::new();
        for bc in &problem.bcs.dirichlet {
            let nodes = mesh.node_set(bc.prescribed.node_set()).map_err(|e| setup(e.to_string()))?;
            let comps: Vec<usize> = match &bc.prescribed {
                Prescribed::Component { component, .. } => {
                    if *component > 2 {
                        return Err(setup(format!("component {component} out of range")));
                    }
                    vec![*component]
                }
                Prescribed::Rotation { axis, .. } => {
                    if Vector3::from(*axis).norm() == 0.0 {
                        return Err(setup("rotation axis must be non-zero".into()));
                    }
                    vec![0, 1, 2]
                }
            };
            let dofs: Vec<usize> = nodes.iter().flat_map(|&n| comps.iter().map(move |&c| 3 * n + c)).collect();
            constrained.extend(dofs.iter().copied());
            dirichlet.push((group_index(&bc.group)?, dofs));
        }
        let dofs = DofMap::new(mesh.n_nodes(), &constrained);

        let mut loads = Vec::new();
        for t in &problem.bcs.tractions {
            let sides = mesh.side_set(&t.side_set).map_err(|e| setup(e.to_string()))?;
            let mut f = BTreeMap::<usize, f64>::new();
            for side in sides {
                let nodes = mesh.face_nodes(*side);
                let xs = nodes.map(|n| mesh.nodes[n].x);
                for (a, area) in face_shape_integrals(&xs).iter().enumerate() {
                    for c in 0..3 {
                        *f.entry(3 * nodes[a] + c).or_default() += area * t.traction[c];
                    }
                }
            }
            loads.push((group_index(&t.group)?, f.into_iter().collect()));
        }
        if let Some(b) = problem.bcs.body_force {
            let shapes: Vec<[f64; NODES_PER_ELEMENT]> = rule.points.iter().map(|p| q2s_eval(*p).n).collect();
            let mut f = vec![0.0; dofs.n_dofs];
            for (e, geo) in mesh.elements.iter().zip(&geometry) {
                for (q, n) in geo.qps.iter().zip(&shapes) {
                    for (a, &node) in e.nodes.iter().enumerate() {
                        for c in 0..3 {
                            f[3 * node + c] += q.weight * n[a] * b[c];
                        }
                    }
                }
            }
            loads.push((DEFAULT_GROUP, f.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect()));
        }

        let (pattern, scatter) = build_pattern(mesh, &dofs);
        let assembler = Assembler {
            problem,
            dofs,
            geometry,
            materials,
            pressure_group,
            groups,
            scatter,
            pattern,
            dirichlet,
            loads,
        };
        assembler.check_conflicts()?;
        Ok(assembler)
    }

    fn check_conflicts(&self) -> Result<(), SolverError> {
        for lambda in [0.25, 0.5, 1.0] {
            let mut seen: BTreeMap<usize, f64> = BTreeMap::new();
            for (i, (_, dofs)) in self.dirichlet.iter().enumerate() {
                let values = self.bc_values(i, lambda);
                for (d, v) in dofs.iter().zip(values) {
                    if let Some(prev) = seen.insert(*d, v) {
                        if (prev - v).abs() > 1e-12 * (1.0 + prev.abs()) {
                            return Err(SolverError::Setup(format!(
                                "dof {d} (node {}, component {}) is prescribed twice with conflicting values",
                                d / 3,
                                d % 3
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn bc_values(&self, i: usize, lambda: f64) -> Vec<f64> {
        let bc = &self.problem.bcs.dirichlet[i];
        let factor = self.groups[self.dirichlet[i].0].factor(lambda);
        let nodes = self.problem.mesh.node_set(bc.prescribed.node_set()).expect("checked at setup");
        match &bc.prescribed {
            Prescribed::Component { value, .. } => vec![value * factor; nodes.len()],
            Prescribed::Rotation {
                center, axis, angle, ..
            } => {
                let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(*axis)), angle * factor);
                let c = Vector3::from(*center);
                nodes
                    .iter()
                    .flat_map(|&n| {
                        let x = Vector3::from(self.problem.mesh.nodes[n].x);
                        let u = r * (x - c) + c - x;
                        [u.x, u.y, u.z]
                    })
                    .collect()
            }
        }
    }

    pub fn groups(&self) -> &[LoadGroup] {
        &self.groups
    }

    /// Full-length displacement vector holding the prescribed values at
    /// `lambda` on constrained DOFs and zero elsewhere.
    pub fn prescribed_displacements(&self, lambda: f64) -> Vec<f64> {
        let mut u = vec![0.0; self.dofs.n_dofs];
        for (i, (_, dofs)) in self.dirichlet.iter().enumerate() {
            for (d, v) in dofs.iter().zip(self.bc_values(i, lambda)) {
                u[*d] = v;
            }
        }
        u
    }

    pub fn external_forces(&self, lambda: f64) -> Vec<f64> {
        let mut f = vec![0.0; self.dofs.n_dofs];
        for (g, entries) in &self.loads {
            let factor = self.groups[*g].factor(lambda);
            for (d, v) in entries {
                f[*d] += factor * v;
            }
        }
        f
    }

    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    /// Fill-reducing elimination order of the free DOFs.
    pub fn fill_reducing_order(&self) -> Vec<usize> {
        let mesh = &self.problem.mesh;
        let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); mesh.n_nodes()];
        for e in &mesh.elements {
            for &a in &e.nodes {
                adjacency[a].extend(e.nodes.iter().copied().filter(|&b| b != a));
            }
        }
        let adjacency: Vec<Vec<usize>> = adjacency.into_iter().map(|s| s.into_iter().collect()).collect();
        let coords: Vec<[f64; 3]> = mesh.nodes.iter().map(|n| n.x).collect();
        nested_dissection(&adjacency, &coords)
            .into_iter()
            .flat_map(|n| DofMap::node_dofs(n).into_iter().filter_map(|d| self.dofs.free_index[d]))
            .collect()
    }

    pub fn element_material(&self, element: usize, lambda: f64) -> ElementMaterial {
        let factor = self.groups[self.pressure_group[element]].factor(lambda);
        with_pressure_factor(&self.materials[element], factor)
    }

    pub fn geometry(&self, element: usize) -> &ElementGeometry {
        &self.geometry[element]
    }

    pub fn element_displacements(&self, element: usize, u: &[f64]) -> ElementVector {
        let nodes = &self.problem.mesh.elements[element].nodes;
        ElementVector::from_fn(|a, _| u[3 * nodes[a / 3] + a % 3])
    }

    /// Quadrature-point values of J per element.
    pub fn jacobians(&self, u: &[f64]) -> Vec<Vec<f64>> {
        (0..self.geometry.len())
            .map(|e| qp_jacobians(&self.geometry[e], &self.element_displacements(e, u)))
            .collect()
    }

    /// Assembles residual and, if requested, tangent at displacement `u`
    /// (full length, constrained entries included) and load parameter
    /// `lambda`. When `increment` is given, `K_fc · increment_c` is returned
    /// in [`GlobalSystem::coupling`].
    pub fn assemble(
        &self,
        u: &[f64],
        lambda: f64,
        with_tangent: bool,
        increment: Option<&[f64]>,
    ) -> Result<GlobalSystem, ElementError> {
        assert_eq!(u.len(), self.dofs.n_dofs);
        let provider = self.problem.provider;
        let need_k = with_tangent || increment.is_some();
        let mut k = with_tangent.then(|| {
            let mut m = self.pattern.clone();
            m.values.iter_mut().for_each(|v| *v = 0.0);
            m
        });
        let mut f_int = vec![0.0; self.dofs.n_dofs];
        let mut coupling = vec![0.0; self.dofs.n_free()];
        let mut energy = 0.0;

        const CHUNK: usize = 128;
        let n_el = self.geometry.len();
        for start in (0..n_el).step_by(CHUNK) {
            let end = (start + CHUNK).min(n_el);
            let results: Vec<_> = (start..end)
                .into_par_iter()
                .map(|e| {
                    let ue = self.element_displacements(e, u);
                    element_contribution(e, &self.geometry[e], &ue, &self.element_material(e, lambda), provider, need_k)
                })
                .collect();
            for (offset, result) in results.into_iter().enumerate() {
                let e = start + offset;
                let c = result?;
                let nodes = &self.problem.mesh.elements[e].nodes;
                energy += c.energy;
                for a in 0..ELEMENT_DOFS {
                    f_int[3 * nodes[a / 3] + a % 3] += c.residual[a];
                }
                let Some(ke) = c.tangent else { continue };
                if let Some(km) = k.as_mut() {
                    let map = &self.scatter[e];
                    for b in 0..ELEMENT_DOFS {
                        for a in 0..ELEMENT_DOFS {
                            let slot = map[b * ELEMENT_DOFS + a];
                            if slot != NO_SLOT {
                                km.values[slot as usize] += ke[(a, b)];
                            }
                        }
                    }
                }
                if let Some(du) = increment {
                    for b in 0..ELEMENT_DOFS {
                        let gb = 3 * nodes[b / 3] + b % 3;
                        if self.dofs.free_index[gb].is_some() || du[gb] == 0.0 {
                            continue;
                        }
                        for a in 0..ELEMENT_DOFS {
                            if let Some(fa) = self.dofs.free_index[3 * nodes[a / 3] + a % 3] {
                                coupling[fa] += ke[(a, b)] * du[gb];
                            }
                        }
                    }
                }
            }
        }

        let f_ext = self.external_forces(lambda);
        energy -= f_ext.iter().zip(u).map(|(f, x)| f * x).sum::<f64>();
        let residual: Vec<f64> = self.dofs.free.iter().map(|&d| f_int[d] - f_ext[d]).collect();
        let reactions: Vec<f64> = self.dofs.constrained.iter().map(|&d| f_int[d] - f_ext[d]).collect();
        if !residual.iter().all(|v| v.is_finite()) {
            return Err(ElementError::NonFinite { element: 0, qp: 0 });
        }
        Ok(GlobalSystem {
            k,
            residual,
            reactions,
            coupling,
            energy,
        })
    }
}

fn build_pattern(mesh: &Mesh, dofs: &DofMap) -> (CsrMatrix, Vec<Vec<u32>>) {
    let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); dofs.n_free()];
    let element_free = |nodes: &[usize; NODES_PER_ELEMENT]| -> Vec<Option<usize>> {
        (0..ELEMENT_DOFS).map(|a| dofs.free_index[3 * nodes[a / 3] + a % 3]).collect()
    };
    for e in &mesh.elements {
        let free = element_free(&e.nodes);
        for fa in free.iter().flatten() {
            rows[*fa].extend(free.iter().flatten().copied());
        }
    }
    let rows: Vec<Vec<usize>> = rows.into_iter().map(|r| r.into_iter().collect()).collect();
    let pattern = CsrMatrix::from_pattern(dofs.n_free(), &rows);
    let scatter = mesh
        .elements
        .iter()
        .map(|e| {
            let free = element_free(&e.nodes);
            let mut map = vec![NO_SLOT; ELEMENT_DOFS * ELEMENT_DOFS];
            for b in 0..ELEMENT_DOFS {
                let Some(fb) = free[b] else { continue };
                for a in 0..ELEMENT_DOFS {
                    if let Some(fa) = free[a] {
                        map[b * ELEMENT_DOFS + a] = pattern.position(fa, fb).expect("in pattern") as u32;
                    }
                }
            }
            map
        })
        .collect();
    (pattern, scatter)
}

/// `∫ N_a dA` over an 8-node serendipity face with the 3×3 Gauss rule. Nodes
/// are four corners in cyclic order, then the mid-nodes between them.
pub fn face_shape_integrals(x: &[[f64; 3]; 8]) -> [f64; 8] {
    const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    const MIDS: [[f64; 2]; 4] = [[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];
    let (pts, wts) = gauss_legendre_1d(3).expect("3-point rule");
    let mut out = [0.0; 8];
    for (s, ws) in pts.iter().zip(&wts) {
        for (t, wt) in pts.iter().zip(&wts) {
            let mut n = [0.0; 8];
            let mut dn = [[0.0; 2]; 8];
            for (a, c) in CORNERS.iter().enumerate() {
                let (ps, pt) = (1.0 + c[0] * s, 1.0 + c[1] * t);
                let q = c[0] * s + c[1] * t - 1.0;
                n[a] = 0.25 * ps * pt * q;
                dn[a] = [0.25 * c[0] * pt * (q + ps), 0.25 * c[1] * ps * (q + pt)];
            }
            for (m, c) in MIDS.iter().enumerate() {
                let a = 4 + m;
                if c[0] == 0.0 {
                    n[a] = 0.5 * (1.0 - s * s) * (1.0 + c[1] * t);
                    dn[a] = [-s * (1.0 + c[1] * t), 0.5 * (1.0 - s * s) * c[1]];
                } else {
                    n[a] = 0.5 * (1.0 + c[0] * s) * (1.0 - t * t);
                    dn[a] = [0.5 * c[0] * (1.0 - t * t), -t * (1.0 + c[0] * s)];
                }
            }
            let mut ds = Vector3::zeros();
            let mut dt = Vector3::zeros();
            for a in 0..8 {
                let xa = Vector3::from(x[a]);
                ds += xa * dn[a][0];
                dt += xa * dn[a][1];
            }
            let da = ds.cross(&dt).norm() * ws * wt;
            for a in 0..8 {
                out[a] += n[a] * da;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{Regularization, SolidParams, ThirdMediumParams};
    use crate::mesh::{build_box_self_contact, BoxSelfContactSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_box() -> Mesh {
        build_box_self_contact(&BoxSelfContactSpec {
            nx: 4,
            ny: 1,
            ..Default::default()
        })
        .unwrap()
    }

    fn materials(pbar: f64) -> MaterialTable {
        let mut by_tag = BTreeMap::new();
        by_tag.insert(DomainTag::SolidBody(0), ElementMaterial::Solid(SolidParams { bulk: 20.0, shear: 10.0 }));
        by_tag.insert(
            DomainTag::ThirdMedium(0),
            ElementMaterial::ThirdMedium(ThirdMediumParams {
                bulk: 20.0,
                shear: 10.0,
                gamma: 1e-3,
                alpha_r: 10.0,
                pbar,
                reg_kind: Regularization::SkewGradient,
            }),
        );
        MaterialTable {
            by_tag,
            pressure_groups: BTreeMap::new(),
        }
    }

    fn bcs() -> BoundaryConditions {
        BoundaryConditions {
            dirichlet: vec![
                DirichletBc {
                    prescribed: Prescribed::Component {
                        node_set: "bottom_fixed".into(),
                        component: 1,
                        value: 0.0,
                    },
                    group: None,
                },
                DirichletBc {
                    prescribed: Prescribed::Component {
                        node_set: "front_back_z".into(),
                        component: 2,
                        value: 0.0,
                    },
                    group: None,
                },
            ],
            tractions: vec![TractionBc {
                side_set: "top_face".into(),
                traction: [0.0, -0.1, 0.0],
                group: None,
            }],
            body_force: Some([0.0, -0.01, 0.02]),
            groups: BTreeMap::new(),
        }
    }

    fn problem(pbar: f64) -> Problem {
        Problem {
            mesh: small_box(),
            materials: materials(pbar),
            bcs: bcs(),
            provider: DerivativeProvider::Analytic,
            quadrature: 3,
        }
    }

    #[test]
    fn load_group_ramp() {
        let g = LoadGroup { start: 0.2, end: 0.6 };
        assert_eq!(g.factor(0.1), 0.0);
        assert!((g.factor(0.4) - 0.5).abs() < 1e-15);
        assert_eq!(g.factor(0.9), 1.0);
        assert_eq!(LoadGroup::default().factor(0.3), 0.3);
    }

    #[test]
    fn face_integrals_sum_to_area() {
        let x = [
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [2.0, 3.0, 0.0],
            [0.0, 3.0, 0.0],
            [1.0, 0.0, 0.0],
            [2.0, 1.5, 0.0],
            [1.0, 3.0, 0.0],
            [0.0, 1.5, 0.0],
        ];
        let f = face_shape_integrals(&x);
        assert!((f.iter().sum::<f64>() - 6.0).abs() < 1e-13);
        // serendipity corner loads are negative (−1/12 of the area each)
        assert!((f[0] + 0.5).abs() < 1e-13 && (f[4] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn residual_is_energy_gradient() {
        let asm = Assembler::new(problem(0.05)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut u = asm.prescribed_displacements(0.7);
        for d in &asm.dofs.free {
            u[*d] = rng.gen_range(-0.01..0.01);
        }
        let sys = asm.assemble(&u, 0.7, false, None).unwrap();
        let step = 1e-7;
        let mut fd = Vec::new();
        for &d in asm.dofs.free.iter().step_by(7) {
            let mut up = u.clone();
            let mut um = u.clone();
            up[d] += step;
            um[d] -= step;
            let ep = asm.assemble(&up, 0.7, false, None).unwrap().energy;
            let em = asm.assemble(&um, 0.7, false, None).unwrap().energy;
            fd.push(((ep - em) / (2.0 * step), sys.residual[asm.dofs.free_index[d].unwrap()]));
        }
        let num: f64 = fd.iter().map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = fd.iter().map(|(a, _)| a * a).sum::<f64>().sqrt();
        assert!(num / den < 1e-5, "{}", num / den);
    }

    #[test]
    fn tangent_is_symmetric_and_deterministic() {
        let asm = Assembler::new(problem(0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u: Vec<f64> = (0..asm.dofs.n_dofs).map(|_| rng.gen_range(-0.01..0.01)).collect();
        let a = asm.assemble(&u, 1.0, true, None).unwrap();
        let b = asm.assemble(&u, 1.0, true, None).unwrap();
        let (ka, kb) = (a.k.unwrap(), b.k.unwrap());
        assert!(ka.asymmetry() < 1e-9);
        assert_eq!(ka.values, kb.values);
        assert_eq!(a.residual, b.residual);
    }

    #[test]
    fn coupling_matches_full_tangent() {
        // K_fc·Δū via the coupling vector equals the change of the free
        // residual under a small prescribed increment, to first order.
        let mut p = problem(0.0);
        p.bcs.dirichlet.push(DirichletBc {
            prescribed: Prescribed::Component {
                node_set: "top_load".into(),
                component: 1,
                value: -1e-6,
            },
            group: None,
        });
        let asm = Assembler::new(p).unwrap();
        let u0 = vec![0.0; asm.dofs.n_dofs];
        let du = asm.prescribed_displacements(1.0);
        let sys = asm.assemble(&u0, 0.0, false, Some(&du)).unwrap();
        let r1 = asm.assemble(&du, 0.0, false, None).unwrap().residual;
        let diff: Vec<f64> = r1.iter().zip(&sys.residual).map(|(a, b)| a - b).collect();
        let num: f64 = diff.iter().zip(&sys.coupling).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = diff.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(den > 0.0 && num / den < 1e-4, "{}", num / den);
    }

    #[test]
    fn setup_errors() {
        let mut p = problem(0.0);
        p.bcs.dirichlet[0].prescribed = Prescribed::Component {
            node_set: "no_such_set".into(),
            component: 0,
            value: 0.0,
        };
        assert!(matches!(Assembler::new(p), Err(SolverError::Setup(m)) if m.contains("no_such_set")));

        let mut p = problem(0.0);
        p.bcs.dirichlet.push(DirichletBc {
            prescribed: Prescribed::Component {
                node_set: "bottom_fixed".into(),
                component: 1,
                value: 0.5,
            },
            group: None,
        });
        assert!(matches!(Assembler::new(p), Err(SolverError::Setup(m)) if m.contains("conflicting")));

        let mut p = problem(0.0);
        p.materials.by_tag.remove(&DomainTag::ThirdMedium(0));
        assert!(matches!(Assembler::new(p), Err(SolverError::Setup(m)) if m.contains("M0")));

        let mut p = problem(0.0);
        p.bcs.dirichlet[0].group = Some("late".into());
        assert!(matches!(Assembler::new(p), Err(SolverError::Setup(m)) if m.contains("late")));
    }

    #[test]
    fn rotation_bc_is_rigid() {
        let mut p = problem(0.0);
        p.bcs.dirichlet = vec![DirichletBc {
            prescribed: Prescribed::Rotation {
                node_set: "left_end".into(),
                center: [0.0, 0.25, 0.0],
                axis: [1.0, 0.0, 0.0],
                angle: std::f64::consts::FRAC_PI_2,
            },
            group: None,
        }];
        let asm = Assembler::new(p).unwrap();
        let u = asm.prescribed_displacements(1.0);
        let mesh = &asm.problem.mesh;
        for &n in mesh.node_set("left_end").unwrap() {
            let x = mesh.nodes[n].x;
            let y = [x[0] + u[3 * n], x[1] + u[3 * n + 1], x[2] + u[3 * n + 2]];
            // quarter turn about x through (y, z) = (0.25, 0): (y, z) → (0.25 − z, y − 0.25)
            assert!((y[1] - (0.25 - x[2])).abs() < 1e-14 && (y[2] - (x[1] - 0.25)).abs() < 1e-14);
        }
    }
}
