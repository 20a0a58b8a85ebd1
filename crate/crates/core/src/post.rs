//! Derived fields, gap probes and legacy-VTK output.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::assembly::Assembler;
use crate::element::ElementMaterial;
use crate::error::PostError;
use crate::material::{cauchy_from_pk1, solid_response, third_medium_response, KinematicState};
use crate::mesh::{DomainTag, Mesh};
use crate::shape::{interpolate_position, jacobian, RefCoord, NODES_PER_ELEMENT};

/// Relative asymmetry tolerated (and removed) by [`von_mises`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Von Mises equivalent stress `sqrt(3/2 s:s)` of a Cauchy stress.
pub fn von_mises(sigma: &Matrix3<f64>) -> Result<f64, PostError> {
    let scale = sigma.amax();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let asym = (sigma - sigma.transpose()).amax() / scale;
    if !(asym <= SYMMETRY_TOLERANCE) {
        return Err(PostError::Asymmetric(asym));
    }
    let sym = 0.5 * (sigma + sigma.transpose());
    let dev = sym - Matrix3::identity() * (sym.trace() / 3.0);
    Ok((1.5 * dev.component_mul(&dev).sum()).sqrt())
}

/// A material point used by probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbePoint {
    Node(usize),
    Material { element: usize, xi: RefCoord },
}

impl ProbePoint {
    /// The material point closest to `x`: a node if one coincides with `x`,
    /// otherwise the first element (by id) whose reference map contains it.
    pub fn locate(mesh: &Mesh, x: [f64; 3]) -> Result<ProbePoint, PostError> {
        let (lo, hi) = mesh.bounds();
        let size = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        if let Some(n) = mesh.nearest_node(x) {
            let d: f64 = (0..3).map(|k| (mesh.nodes[n].x[k] - x[k]).powi(2)).sum::<f64>().sqrt();
            if d <= 1e-10 * size {
                return Ok(ProbePoint::Node(n));
            }
        }
        for e in 0..mesh.n_elements() {
            let coords = mesh.element_coords(e);
            let inside_box = (0..3).all(|k| {
                let (a, b) = coords.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c[k]), b.max(c[k])));
                let pad = 1e-9 * size;
                x[k] >= a - pad && x[k] <= b + pad
            });
            if !inside_box {
                continue;
            }
            if let Some(xi) = invert_map(&coords, x, size) {
                return Ok(ProbePoint::Material { element: e, xi });
            }
        }
        Err(PostError::ProbeOutsideMesh(x))
    }

    /// Current position of the point for the nodal displacements `u`.
    pub fn position(&self, mesh: &Mesh, u: &[f64]) -> [f64; 3] {
        match *self {
            ProbePoint::Node(n) => {
                let x = mesh.nodes[n].x;
                [x[0] + u[3 * n], x[1] + u[3 * n + 1], x[2] + u[3 * n + 2]]
            }
            ProbePoint::Material { element, xi } => {
                let nodes = &mesh.elements[element].nodes;
                let mut current = mesh.element_coords(element);
                for (c, &n) in current.iter_mut().zip(nodes.iter()) {
                    for k in 0..3 {
                        c[k] += u[3 * n + k];
                    }
                }
                interpolate_position(&current, xi)
            }
        }
    }
}

/// Newton inversion of the isoparametric map; `None` if it does not
/// converge to a point inside the reference cube.
fn invert_map(coords: &[[f64; 3]; NODES_PER_ELEMENT], x: [f64; 3], size: f64) -> Option<RefCoord> {
    let mut xi = RefCoord([0.0; 3]);
    for _ in 0..30 {
        let p = interpolate_position(coords, xi);
        let r = nalgebra::Vector3::new(x[0] - p[0], x[1] - p[1], x[2] - p[2]);
        if r.norm() <= 1e-13 * size {
            return xi.0.iter().all(|c| c.abs() <= 1.0 + 1e-9).then_some(xi);
        }
        let jac = jacobian(coords, xi).ok()?;
        // dX = gᵀ dξ
        let d = jac.g.transpose().lu().solve(&r)?;
        for k in 0..3 {
            // keep iterates near the cube so the map stays well defined
            xi.0[k] = (xi.0[k] + d[k]).clamp(-2.0, 2.0);
        }
    }
    None
}

/// Distance between two material points in the current configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapProbe {
    pub a: ProbePoint,
    pub b: ProbePoint,
}

impl GapProbe {
    pub fn locate(mesh: &Mesh, a: [f64; 3], b: [f64; 3]) -> Result<Self, PostError> {
        Ok(GapProbe {
            a: ProbePoint::locate(mesh, a)?,
            b: ProbePoint::locate(mesh, b)?,
        })
    }
}

pub fn gap_measure(mesh: &Mesh, u: &[f64], probe: &GapProbe) -> f64 {
    let a = probe.a.position(mesh, u);
    let b = probe.b.position(mesh, u);
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

/// Per-element results at one accepted state.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOutput {
    pub displacement: Vec<[f64; 3]>,
    /// Quadrature-weighted element average of the Cauchy von Mises stress.
    pub von_mises: Vec<f64>,
    pub j_min: Vec<f64>,
    pub tags: Vec<DomainTag>,
}

impl FieldOutput {
    pub fn compute(asm: &Assembler, u: &[f64], lambda: f64) -> Result<Self, PostError> {
        let provider = asm.problem.provider;
        let per_element: Vec<Result<(f64, f64), PostError>> = (0..asm.problem.mesh.n_elements())
            .into_par_iter()
            .map(|e| {
                let geo = asm.geometry(e);
                let ue = asm.element_displacements(e, u);
                let material = asm.element_material(e, lambda);
                let (mut vm, mut vol, mut j_min) = (0.0, 0.0, f64::INFINITY);
                for q in &geo.qps {
                    let f = q.deformation_gradient(&ue);
                    let p_hat = match &material {
                        ElementMaterial::Solid(p) => solid_response(&f, p, provider)?.0.p_hat,
                        ElementMaterial::ThirdMedium(p) => {
                            third_medium_response(&KinematicState::new(f, q.grad_f(&ue)), p, provider)?.0.p_hat
                        }
                    };
                    vm += q.weight * von_mises(&cauchy_from_pk1(&f, &p_hat)?)?;
                    vol += q.weight;
                    j_min = j_min.min(f.determinant());
                }
                Ok((vm / vol, j_min))
            })
            .collect();
        let mut von_mises = Vec::with_capacity(per_element.len());
        let mut j_min = Vec::with_capacity(per_element.len());
        for r in per_element {
            let (v, j) = r?;
            von_mises.push(v);
            j_min.push(j);
        }
        Ok(FieldOutput {
            displacement: u.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            von_mises,
            j_min,
            tags: asm.problem.mesh.elements.iter().map(|e| e.tag).collect(),
        })
    }
}

/// Current volume of the third-medium region, `Σ ∫ J dV` over its elements.
pub fn cavity_volume(asm: &Assembler, u: &[f64]) -> f64 {
    let mesh = &asm.problem.mesh;
    (0..mesh.n_elements())
        .filter(|&e| mesh.elements[e].tag.is_third_medium())
        .map(|e| {
            let ue = asm.element_displacements(e, u);
            asm.geometry(e)
                .qps
                .iter()
                .map(|q| q.weight * q.deformation_gradient(&ue).determinant())
                .sum::<f64>()
        })
        .sum()
}

const VTK_QUADRATIC_HEXAHEDRON: u8 = 25;

fn push_float(out: &mut String, v: f64) {
    // 17 significant digits round-trip every f64
    let v = if v == 0.0 { 0.0 } else { v };
    write!(out, "{v:.16e}").unwrap();
}

/// Legacy ASCII VTK unstructured grid with reference coordinates, nodal
/// displacements and per-element fields. Third-medium cells carry
/// `solid_mask = 0` and a zero `von_mises_solid`, so solid stress colour
/// ranges are not polluted by the medium.
pub fn vtk_string(mesh: &Mesh, fields: &FieldOutput, title: &str) -> String {
    let n = mesh.n_nodes();
    let m = mesh.n_elements();
    let mut s = String::with_capacity(200 * n + 200 * m);
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(title.lines().next().unwrap_or(""));
    s.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {n} double").unwrap();
    let triple = |s: &mut String, x: &[f64; 3]| {
        push_float(s, x[0]);
        s.push(' ');
        push_float(s, x[1]);
        s.push(' ');
        push_float(s, x[2]);
        s.push('\n');
    };
    for node in &mesh.nodes {
        triple(&mut s, &node.x);
    }
    writeln!(s, "CELLS {m} {}", m * (NODES_PER_ELEMENT + 1)).unwrap();
    for e in &mesh.elements {
        write!(s, "{NODES_PER_ELEMENT}").unwrap();
        for v in e.nodes {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    writeln!(s, "CELL_TYPES {m}").unwrap();
    for _ in 0..m {
        writeln!(s, "{VTK_QUADRATIC_HEXAHEDRON}").unwrap();
    }
    writeln!(s, "POINT_DATA {n}\nVECTORS displacement double").unwrap();
    for d in &fields.displacement {
        triple(&mut s, d);
    }
    writeln!(s, "CELL_DATA {m}").unwrap();
    let scalar = |s: &mut String, name: &str, values: &mut dyn Iterator<Item = f64>| {
        writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for v in values {
            push_float(s, v);
            s.push('\n');
        }
    };
    scalar(&mut s, "von_mises", &mut fields.von_mises.iter().copied());
    let solid = |t: &DomainTag| !t.is_third_medium();
    scalar(
        &mut s,
        "von_mises_solid",
        &mut fields.von_mises.iter().zip(&fields.tags).map(|(v, t)| if solid(t) { *v } else { 0.0 }),
    );
    scalar(&mut s, "j_min", &mut fields.j_min.iter().copied());
    let int_field = |s: &mut String, name: &str, values: &mut dyn Iterator<Item = i64>| {
        writeln!(s, "SCALARS {name} int 1\nLOOKUP_TABLE default").unwrap();
        for v in values {
            writeln!(s, "{v}").unwrap();
        }
    };
    int_field(&mut s, "solid_mask", &mut fields.tags.iter().map(|t| solid(t) as i64));
    int_field(
        &mut s,
        "domain_id",
        &mut fields.tags.iter().map(|t| match t {
            DomainTag::SolidBody(id) | DomainTag::ThirdMedium(id) => *id as i64,
        }),
    );
    s
}

pub fn export_vtk(mesh: &Mesh, fields: &FieldOutput, title: &str, path: &Path) -> Result<(), PostError> {
    std::fs::write(path, vtk_string(mesh, fields, title)).map_err(|source| PostError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Points and 20-node cells read back from [`vtk_string`] output.
pub fn read_vtk_grid(text: &str) -> Option<(Vec<[f64; 3]>, Vec<[usize; NODES_PER_ELEMENT]>)> {
    let mut tokens = text.split_whitespace();
    tokens.find(|t| *t == "POINTS")?;
    let n: usize = tokens.next()?.parse().ok()?;
    tokens.next()?;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p = [0.0; 3];
        for c in &mut p {
            *c = tokens.next()?.parse().ok()?;
        }
        points.push(p);
    }
    if tokens.next()? != "CELLS" {
        return None;
    }
    let m: usize = tokens.next()?.parse().ok()?;
    tokens.next()?;
    let mut cells = Vec::with_capacity(m);
    for _ in 0..m {
        if tokens.next()?.parse::<usize>().ok()? != NODES_PER_ELEMENT {
            return None;
        }
        let mut c = [0; NODES_PER_ELEMENT];
        for v in &mut c {
            *v = tokens.next()?.parse().ok()?;
        }
        cells.push(c);
    }
    Some((points, cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_self_contact, BoxSelfContactSpec};
    use nalgebra::Rotation3;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn von_mises_examples() {
        assert!(von_mises(&(Matrix3::identity() * 7.5)).unwrap().abs() < 1e-14);
        let s = 3.2;
        assert!(close(von_mises(&Matrix3::from_diagonal(&nalgebra::Vector3::new(s, 0.0, 0.0))).unwrap(), s, 1e-14));
        let tau = 1.7;
        let mut shear = Matrix3::zeros();
        shear[(0, 1)] = tau;
        shear[(1, 0)] = tau;
        assert!(close(von_mises(&shear).unwrap(), 3f64.sqrt() * tau, 1e-14));
    }

    #[test]
    fn von_mises_symmetry_check() {
        let mut m = Matrix3::new(1.0, 2.0, 0.0, 2.0, -1.0, 0.5, 0.0, 0.5, 3.0);
        m[(0, 1)] += 1e-10;
        assert!(von_mises(&m).is_ok());
        m[(0, 1)] += 1e-3;
        assert!(matches!(von_mises(&m), Err(PostError::Asymmetric(_))));
    }

    #[test]
    fn von_mises_rotation_invariant() {
        let s = Matrix3::new(1.0, 2.0, -0.3, 2.0, -1.0, 0.5, -0.3, 0.5, 3.0);
        let q = Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let a = von_mises(&s).unwrap();
        let b = von_mises(&(q * s * q.transpose())).unwrap();
        assert!(close(a, b, 1e-12));
    }

    fn box_mesh() -> Mesh {
        build_box_self_contact(&BoxSelfContactSpec {
            nx: 4,
            ny: 1,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn reference_gap_equals_plate_spacing() {
        let mesh = box_mesh();
        let probe = GapProbe::locate(&mesh, [1.0, 0.4, 0.0], [1.0, 0.1, 0.0]).unwrap();
        assert!(matches!(probe.a, ProbePoint::Node(_)));
        let u = vec![0.0; 3 * mesh.n_nodes()];
        assert!(close(gap_measure(&mesh, &u, &probe), 0.3, 1e-14));
    }

    #[test]
    fn interior_probe_interpolates() {
        let mesh = box_mesh();
        let probe = GapProbe::locate(&mesh, [0.77, 0.33, 0.05], [0.41, 0.12, -0.07]).unwrap();
        assert!(matches!(probe.a, ProbePoint::Material { .. }));
        let u = vec![0.0; 3 * mesh.n_nodes()];
        let d = ((0.77f64 - 0.41).powi(2) + 0.21f64.powi(2) + 0.12f64.powi(2)).sqrt();
        assert!(close(gap_measure(&mesh, &u, &probe), d, 1e-12));
        // a rigid translation leaves distances unchanged
        let t: Vec<f64> = (0..u.len()).map(|i| [0.3, -1.2, 0.7][i % 3]).collect();
        assert!(close(gap_measure(&mesh, &t, &probe), d, 1e-12));
    }

    #[test]
    fn probe_outside_mesh_is_an_error() {
        let mesh = box_mesh();
        assert!(matches!(ProbePoint::locate(&mesh, [5.0, 0.0, 0.0]), Err(PostError::ProbeOutsideMesh(_))));
    }

    #[test]
    fn vtk_round_trip() {
        let mesh = box_mesh();
        let m = mesh.n_elements();
        let fields = FieldOutput {
            displacement: vec![[0.0; 3]; mesh.n_nodes()],
            von_mises: vec![0.0; m],
            j_min: vec![1.0; m],
            tags: mesh.elements.iter().map(|e| e.tag).collect(),
        };
        let text = vtk_string(&mesh, &fields, "box");
        assert!(text.starts_with("# vtk DataFile Version 3.0\nbox\nASCII\nDATASET UNSTRUCTURED_GRID\n"));
        let (points, cells) = read_vtk_grid(&text).unwrap();
        assert_eq!(points.len(), mesh.n_nodes());
        for (p, n) in points.iter().zip(&mesh.nodes) {
            for k in 0..3 {
                assert!((p[k] - n.x[k]).abs() <= 1e-12);
            }
        }
        assert!(cells.iter().zip(&mesh.elements).all(|(c, e)| *c == e.nodes));
        assert_eq!(text, vtk_string(&mesh, &fields, "box"));
    }
}
