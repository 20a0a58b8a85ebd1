//! Structured-lattice mesh generation and the benchmark scenario builders.
//!
//! All builders are deterministic: nodes are numbered by lattice position
//! (x fastest, then y, then z) and elements by cell position in the same order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DomainTag, Hex20Element, Mesh, Node, Side};
use crate::error::MeshError;
use crate::shape::{FACE_NODES, NODE_REF_COORDS};

/// Tensor-product grid of element boundaries. Each cell may become one
/// 20-node element (or be left empty); node positions may be remapped to
/// produce curved geometry.
#[derive(Debug, Clone)]
pub struct StructuredGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
}

/// Builds element boundary coordinates from consecutive `(length, divisions)`
/// segments starting at `start`.
pub(crate) fn segments(start: f64, parts: &[(f64, usize)]) -> Vec<f64> {
    let mut out = vec![start];
    let mut x0 = start;
    for &(len, n) in parts {
        for i in 1..=n {
            out.push(x0 + len * i as f64 / n as f64);
        }
        x0 += len;
        // pin the segment end exactly, independent of rounding inside the loop
        *out.last_mut().unwrap() = x0;
    }
    out
}

fn lattice(bounds: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * bounds.len() - 1);
    for w in bounds.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*bounds.last().unwrap());
    out
}

impl StructuredGrid {
    pub fn cells(&self) -> [usize; 3] {
        [self.xs.len() - 1, self.ys.len() - 1, self.zs.len() - 1]
    }

    /// `tag(cell, centre)` selects the domain of each cell (`None` leaves it
    /// empty); `map(lattice_index, position)` may move node positions.
    pub fn build<T, M>(&self, tag: T, map: M) -> Mesh
    where
        T: Fn([usize; 3], [f64; 3]) -> Option<DomainTag>,
        M: Fn([usize; 3], [f64; 3]) -> [f64; 3],
    {
        let [cx, cy, cz] = self.cells();
        let (lx, ly, lz) = (lattice(&self.xs), lattice(&self.ys), lattice(&self.zs));
        let (nlx, nly) = (lx.len(), ly.len());
        let lattice_id = |i: usize, j: usize, k: usize| i + nlx * (j + nly * k);

        let mut cells = Vec::new();
        for ez in 0..cz {
            for ey in 0..cy {
                for ex in 0..cx {
                    let centre = [
                        0.5 * (self.xs[ex] + self.xs[ex + 1]),
                        0.5 * (self.ys[ey] + self.ys[ey + 1]),
                        0.5 * (self.zs[ez] + self.zs[ez + 1]),
                    ];
                    if let Some(t) = tag([ex, ey, ez], centre) {
                        let mut conn = [0usize; 20];
                        for (slot, r) in conn.iter_mut().zip(NODE_REF_COORDS.iter()) {
                            let i = (2 * ex as i64 + 1 + r[0] as i64) as usize;
                            let j = (2 * ey as i64 + 1 + r[1] as i64) as usize;
                            let k = (2 * ez as i64 + 1 + r[2] as i64) as usize;
                            *slot = lattice_id(i, j, k);
                        }
                        cells.push((conn, t));
                    }
                }
            }
        }

        let mut numbering = vec![usize::MAX; nlx * nly * lz.len()];
        for (conn, _) in &cells {
            for &l in conn {
                numbering[l] = 0;
            }
        }
        let mut nodes = Vec::new();
        for k in 0..lz.len() {
            for j in 0..nly {
                for i in 0..nlx {
                    let l = lattice_id(i, j, k);
                    if numbering[l] == 0 {
                        numbering[l] = nodes.len();
                        let x = map([i, j, k], [lx[i], ly[j], lz[k]]);
                        nodes.push(Node { id: nodes.len(), x });
                    }
                }
            }
        }
        let elements = cells
            .into_iter()
            .enumerate()
            .map(|(id, (conn, tag))| Hex20Element {
                id,
                nodes: conn.map(|l| numbering[l]),
                tag,
            })
            .collect();
        Mesh {
            nodes,
            elements,
            node_sets: BTreeMap::new(),
            side_sets: BTreeMap::new(),
        }
    }
}

fn identity_map(_: [usize; 3], x: [f64; 3]) -> [f64; 3] {
    x
}

impl Mesh {
    /// Adds (or replaces) a node set selected by a coordinate predicate.
    pub fn add_node_set(&mut self, name: &str, pred: impl Fn([f64; 3]) -> bool) {
        let ids = self.nodes.iter().filter(|n| pred(n.x)).map(|n| n.id).collect();
        self.node_sets.insert(name.to_string(), ids);
    }

    /// Adds a side set of boundary faces (faces not shared with another
    /// element) whose eight nodes all satisfy `pred`.
    pub fn add_boundary_side_set(&mut self, name: &str, pred: impl Fn([f64; 3]) -> bool) {
        let mut count: BTreeMap<[usize; 4], usize> = BTreeMap::new();
        for e in &self.elements {
            for face in FACE_NODES.iter() {
                let mut key = [0; 4];
                for (slot, &l) in key.iter_mut().zip(face.iter()) {
                    *slot = e.nodes[l];
                }
                key.sort_unstable();
                *count.entry(key).or_default() += 1;
            }
        }
        let mut sides = Vec::new();
        for e in &self.elements {
            for (f, face) in FACE_NODES.iter().enumerate() {
                let mut key = [0; 4];
                for (slot, &l) in key.iter_mut().zip(face.iter()) {
                    *slot = e.nodes[l];
                }
                key.sort_unstable();
                if count[&key] == 1 && face.iter().all(|&l| pred(self.nodes[e.nodes[l]].x)) {
                    sides.push(Side { element: e.id, face: f as u8 });
                }
            }
        }
        self.side_sets.insert(name.to_string(), sides);
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), MeshError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(MeshError::InconsistentDimensions(format!("{name} must be positive (got {v})")))
    }
}

fn check_divisions(pairs: &[(&'static str, usize)]) -> Result<(), MeshError> {
    for &(name, n) in pairs {
        if n == 0 {
            return Err(MeshError::ZeroSubdivisions(name));
        }
    }
    Ok(())
}

/// Hollow rectangular frame (length × height in the x–y plane, extruded over
/// the width in z) whose cavity is filled with third medium.
///
/// Coordinates: x ∈ [0, L], y ∈ [0, H], z ∈ [−W/2, W/2]. Node sets:
/// `top_load` (line x = L/2 on the top face), `bottom_fixed` (bottom face
/// under the two end walls), `front_back_z` (z = ±W/2), `left_end`,
/// `right_end`, `top_face`, `bottom_face`, and the gap probe nodes
/// `probe_upper` / `probe_lower` at the centres of the inner plate surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxSelfContactSpec {
    pub length: f64,
    pub height: f64,
    pub width: f64,
    pub thickness: f64,
    /// Plate gap; must equal `height − 2·thickness` when given.
    pub gap: Option<f64>,
    /// Elements along the cavity length.
    pub nx: usize,
    /// Elements across the gap.
    pub ny: usize,
    /// Elements through the width.
    pub nz: usize,
    /// Elements through each wall.
    pub wall_divisions: usize,
    /// Optional third-medium padding `(thickness, divisions)` on the front and
    /// back faces, used when free surfaces there may touch.
    pub padding: Option<(f64, usize)>,
}

impl Default for BoxSelfContactSpec {
    fn default() -> Self {
        BoxSelfContactSpec {
            length: 2.0,
            height: 0.5,
            width: 0.3,
            thickness: 0.1,
            gap: Some(0.3),
            nx: 16,
            ny: 2,
            nz: 1,
            wall_divisions: 1,
            padding: None,
        }
    }
}

pub fn build_box_self_contact(spec: &BoxSelfContactSpec) -> Result<Mesh, MeshError> {
    let &BoxSelfContactSpec {
        length: l,
        height: h,
        width: w,
        thickness: t,
        ..
    } = spec;
    for (name, v) in [("length", l), ("height", h), ("width", w), ("thickness", t)] {
        check_positive(name, v)?;
    }
    check_divisions(&[("nx", spec.nx), ("ny", spec.ny), ("nz", spec.nz), ("wall_divisions", spec.wall_divisions)])?;
    if t >= 0.5 * h || t >= 0.5 * l {
        return Err(MeshError::InconsistentDimensions(format!(
            "wall thickness {t} must be below half the height {h} and half the length {l}"
        )));
    }
    let gap = h - 2.0 * t;
    if let Some(g0) = spec.gap {
        if (g0 - gap).abs() > 1e-12 * h {
            return Err(MeshError::InconsistentDimensions(format!(
                "gap {g0} does not match height − 2·thickness = {gap}"
            )));
        }
    }
    let wd = spec.wall_divisions;
    let mut z_parts = vec![(w, spec.nz)];
    let mut z0 = -0.5 * w;
    if let Some((pt, pn)) = spec.padding {
        check_positive("padding", pt)?;
        check_divisions(&[("padding divisions", pn)])?;
        z_parts = vec![(pt, pn), (w, spec.nz), (pt, pn)];
        z0 -= pt;
    }
    let grid = StructuredGrid {
        xs: segments(0.0, &[(t, wd), (l - 2.0 * t, spec.nx), (t, wd)]),
        ys: segments(0.0, &[(t, wd), (gap, spec.ny), (t, wd)]),
        zs: segments(z0, &z_parts),
    };
    let half_w = 0.5 * w;
    let mut mesh = grid.build(
        |_, c| {
            let in_cavity = c[0] > t && c[0] < l - t && c[1] > t && c[1] < h - t;
            if c[2].abs() > half_w || in_cavity {
                Some(DomainTag::ThirdMedium(0))
            } else {
                Some(DomainTag::SolidBody(0))
            }
        },
        identity_map,
    );

    let tol = 1e-9 * l.max(h);
    let near = move |a: f64, b: f64| (a - b).abs() <= tol;
    let in_solid_z = move |z: f64| z.abs() <= half_w + tol;
    mesh.add_node_set("top_load", |x| near(x[1], h) && near(x[0], 0.5 * l));
    mesh.add_node_set("bottom_fixed", |x| near(x[1], 0.0) && (x[0] <= t + tol || x[0] >= l - t - tol) && in_solid_z(x[2]));
    mesh.add_node_set("front_back_z", |x| near(x[2].abs(), half_w));
    mesh.add_node_set("left_end", |x| near(x[0], 0.0) && in_solid_z(x[2]));
    mesh.add_node_set("right_end", |x| near(x[0], l) && in_solid_z(x[2]));
    mesh.add_node_set("top_face", |x| near(x[1], h) && in_solid_z(x[2]));
    mesh.add_node_set("bottom_face", |x| near(x[1], 0.0) && in_solid_z(x[2]));
    mesh.add_node_set("probe_upper", |x| near(x[0], 0.5 * l) && near(x[1], h - t) && near(x[2], 0.0));
    mesh.add_node_set("probe_lower", |x| near(x[0], 0.5 * l) && near(x[1], t) && near(x[2], 0.0));
    mesh.add_boundary_side_set("top_face", |x| near(x[1], h));
    Ok(mesh)
}

/// Cube-shaped box with a cavity filled by third medium. Half-extents
/// `L, H, W` (outer size 2L × 2H × 2W) and wall thickness `t`.
///
/// The one-eighth model occupies [0, L] × [0, H] × [0, W]; the full model is
/// its mirror image about the three coordinate planes. `nx, ny, nz` count
/// cavity elements per half-extent. Node sets: `sym_x`, `sym_y`, `sym_z`
/// (coordinate planes), `outer_x`, `outer_y`, `outer_z`, and probe nodes at
/// the inner wall centres `probe_x`, `probe_y`, `probe_z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PneumaticBoxSpec {
    pub half_length: f64,
    pub half_height: f64,
    pub half_width: f64,
    pub thickness: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub wall_divisions: usize,
    pub one_eighth: bool,
}

impl Default for PneumaticBoxSpec {
    fn default() -> Self {
        PneumaticBoxSpec {
            half_length: 1.0,
            half_height: 1.0,
            half_width: 1.0,
            thickness: 0.5,
            nx: 2,
            ny: 2,
            nz: 2,
            wall_divisions: 2,
            one_eighth: true,
        }
    }
}

pub fn build_pneumatic_box(spec: &PneumaticBoxSpec) -> Result<Mesh, MeshError> {
    let half = [spec.half_length, spec.half_height, spec.half_width];
    let t = spec.thickness;
    for (name, v) in [("half_length", half[0]), ("half_height", half[1]), ("half_width", half[2]), ("thickness", t)] {
        check_positive(name, v)?;
    }
    check_divisions(&[("nx", spec.nx), ("ny", spec.ny), ("nz", spec.nz), ("wall_divisions", spec.wall_divisions)])?;
    let min_half = half.iter().cloned().fold(f64::INFINITY, f64::min);
    if t >= min_half {
        return Err(MeshError::InconsistentDimensions(format!(
            "wall thickness {t} must be below the smallest half-extent {min_half}"
        )));
    }
    let divs = [spec.nx, spec.ny, spec.nz];
    let wd = spec.wall_divisions;
    let axis = |k: usize| {
        let inner = half[k] - t;
        if spec.one_eighth {
            segments(0.0, &[(inner, divs[k]), (t, wd)])
        } else {
            segments(-half[k], &[(t, wd), (2.0 * inner, 2 * divs[k]), (t, wd)])
        }
    };
    let grid = StructuredGrid {
        xs: axis(0),
        ys: axis(1),
        zs: axis(2),
    };
    let mut mesh = grid.build(
        |_, c| {
            if (0..3).all(|k| c[k].abs() < half[k] - t) {
                Some(DomainTag::ThirdMedium(0))
            } else {
                Some(DomainTag::SolidBody(0))
            }
        },
        identity_map,
    );
    let tol = 1e-9 * min_half;
    let near = move |a: f64, b: f64| (a - b).abs() <= tol;
    for (k, name) in ["x", "y", "z"].iter().enumerate() {
        mesh.add_node_set(&format!("sym_{name}"), |x| near(x[k], 0.0));
        mesh.add_node_set(&format!("outer_{name}"), |x| near(x[k].abs(), half[k]));
        mesh.add_node_set(&format!("probe_{name}"), |x| {
            (0..3).all(|m| if m == k { near(x[m], half[k] - t) } else { near(x[m], 0.0) })
        });
    }
    Ok(mesh)
}

/// Quarter model of a hemispherical punch above an elastic block, with the
/// third medium filling the space between them.
///
/// The block occupies [0, B]² × [0, H]. The punch is a hemisphere of radius R
/// (lowest point at height H + gap) topped by a cylindrical shaft so that its
/// rim has finite thickness. An O-grid maps the inner lattice square onto the
/// quarter disk. Node sets: `punch_top`, `block_bottom`, `sym_x`, `sym_y`,
/// `probe_punch` (lowest punch point) and `probe_block` (block top centre).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PunchSpec {
    pub block_half: f64,
    pub block_height: f64,
    pub radius: f64,
    pub gap: f64,
    pub shaft: f64,
    pub n_inner: usize,
    pub n_outer: usize,
    pub n_block: usize,
    pub n_medium: usize,
    pub n_punch: usize,
}

impl Default for PunchSpec {
    fn default() -> Self {
        PunchSpec {
            block_half: 2.0,
            block_height: 1.0,
            radius: 1.0,
            gap: 0.5,
            shaft: 0.5,
            n_inner: 2,
            n_outer: 2,
            n_block: 2,
            n_medium: 2,
            n_punch: 2,
        }
    }
}

pub fn build_punch(spec: &PunchSpec) -> Result<Mesh, MeshError> {
    let &PunchSpec {
        block_half: b,
        block_height: h,
        radius: r,
        gap,
        shaft,
        ..
    } = spec;
    for (name, v) in [("block_half", b), ("block_height", h), ("radius", r), ("gap", gap), ("shaft", shaft)] {
        check_positive(name, v)?;
    }
    check_divisions(&[
        ("n_inner", spec.n_inner),
        ("n_outer", spec.n_outer),
        ("n_block", spec.n_block),
        ("n_medium", spec.n_medium),
        ("n_punch", spec.n_punch),
    ])?;
    if r >= b {
        return Err(MeshError::InconsistentDimensions(format!("punch radius {r} must be below block half-size {b}")));
    }
    let centre_z = h + gap + r;
    let top_z = centre_z + shaft;
    let grid = StructuredGrid {
        xs: segments(0.0, &[(r, spec.n_inner), (b - r, spec.n_outer)]),
        ys: segments(0.0, &[(r, spec.n_inner), (b - r, spec.n_outer)]),
        zs: segments(0.0, &[(h, spec.n_block), (1.0, spec.n_medium), (1.0, spec.n_punch)]),
    };
    let (kb, km, kp) = (2 * spec.n_block, 2 * spec.n_medium, 2 * spec.n_punch);
    let tol = 1e-9 * b;
    let mut mesh = grid.build(
        |cell, c| {
            if cell[2] < spec.n_block {
                Some(DomainTag::SolidBody(0))
            } else if cell[2] < spec.n_block + spec.n_medium {
                Some(DomainTag::ThirdMedium(0))
            } else if c[0].max(c[1]) < r {
                Some(DomainTag::SolidBody(1))
            } else {
                None
            }
        },
        |l, p| {
            let s = p[0].max(p[1]);
            let rad = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let scale = if rad == 0.0 {
                1.0
            } else if s <= r {
                s / rad
            } else {
                let w = (s - r) / (b - r);
                (1.0 - w) * s / rad + w
            };
            let (x, y) = (p[0] * scale, p[1] * scale);
            let rr = (x * x + y * y).sqrt();
            let bottom = if rr < r { centre_z - (r * r - rr * rr).sqrt() } else { centre_z };
            let z = if l[2] <= kb {
                p[2]
            } else if l[2] <= kb + km {
                h + (bottom - h) * (l[2] - kb) as f64 / km as f64
            } else {
                bottom + (top_z - bottom) * (l[2] - kb - km) as f64 / kp as f64
            };
            [x, y, z]
        },
    );
    let near = move |a: f64, c: f64| (a - c).abs() <= tol;
    mesh.add_node_set("punch_top", |x| near(x[2], top_z));
    mesh.add_node_set("block_bottom", |x| near(x[2], 0.0));
    mesh.add_node_set("sym_x", |x| near(x[0], 0.0));
    mesh.add_node_set("sym_y", |x| near(x[1], 0.0));
    mesh.add_node_set("probe_punch", |x| near(x[0], 0.0) && near(x[1], 0.0) && near(x[2], h + gap));
    mesh.add_node_set("probe_block", |x| near(x[0], 0.0) && near(x[1], 0.0) && near(x[2], h));
    Ok(mesh)
}

/// Half model (z ≥ 0) of a multi-chamber pneumatic bending actuator: a row
/// of hollow cells on a solid base layer. Each chamber is third-medium region
/// `c + 1` (c = 0-based cell index) so it can carry its own pressure; the
/// slots between cells are region 0.
///
/// Node sets: `fixed_end` (x = 0), `sym_z` (z = 0), `tip` (free-end node on
/// the base bottom edge at z = 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorSpec {
    pub n_cells: usize,
    /// Chamber size along x, y and the half-size along z.
    pub chamber: [f64; 3],
    pub wall: f64,
    pub slot: f64,
    pub base: f64,
    pub chamber_divisions: [usize; 3],
    pub wall_divisions: usize,
    pub slot_divisions: usize,
    pub base_divisions: usize,
}

impl Default for ActuatorSpec {
    fn default() -> Self {
        ActuatorSpec {
            n_cells: 3,
            chamber: [0.6, 1.0, 0.4],
            wall: 0.15,
            slot: 0.2,
            base: 0.3,
            chamber_divisions: [2, 2, 1],
            wall_divisions: 1,
            slot_divisions: 1,
            base_divisions: 1,
        }
    }
}

pub fn build_actuator(spec: &ActuatorSpec) -> Result<Mesh, MeshError> {
    for (name, v) in [
        ("chamber x", spec.chamber[0]),
        ("chamber y", spec.chamber[1]),
        ("chamber z", spec.chamber[2]),
        ("wall", spec.wall),
        ("slot", spec.slot),
        ("base", spec.base),
    ] {
        check_positive(name, v)?;
    }
    check_divisions(&[
        ("n_cells", spec.n_cells),
        ("chamber x", spec.chamber_divisions[0]),
        ("chamber y", spec.chamber_divisions[1]),
        ("chamber z", spec.chamber_divisions[2]),
        ("wall", spec.wall_divisions),
        ("slot", spec.slot_divisions),
        ("base", spec.base_divisions),
    ])?;
    let w = spec.wall;
    let cd = spec.chamber_divisions;
    let cell_len = spec.chamber[0] + 2.0 * w;
    let pitch = cell_len + spec.slot;
    let mut x_parts = Vec::new();
    for c in 0..spec.n_cells {
        if c > 0 {
            x_parts.push((spec.slot, spec.slot_divisions));
        }
        x_parts.extend([(w, spec.wall_divisions), (spec.chamber[0], cd[0]), (w, spec.wall_divisions)]);
    }
    let grid = StructuredGrid {
        xs: segments(0.0, &x_parts),
        ys: segments(
            0.0,
            &[(spec.base, spec.base_divisions), (w, spec.wall_divisions), (spec.chamber[1], cd[1]), (w, spec.wall_divisions)],
        ),
        zs: segments(0.0, &[(spec.chamber[2], cd[2]), (w, spec.wall_divisions)]),
    };
    let base = spec.base;
    let mut mesh = grid.build(
        |_, c| {
            if c[1] < base {
                return Some(DomainTag::SolidBody(0));
            }
            let cell = (c[0] / pitch).floor() as usize;
            let local = c[0] - cell as f64 * pitch;
            if local > cell_len {
                return Some(DomainTag::ThirdMedium(0));
            }
            let inside = local > w && local < cell_len - w && c[1] > base + w && c[1] < base + w + spec.chamber[1] && c[2] < spec.chamber[2];
            if inside {
                Some(DomainTag::ThirdMedium(cell as u32 + 1))
            } else {
                Some(DomainTag::SolidBody(0))
            }
        },
        identity_map,
    );
    let x_end = *grid.xs.last().unwrap();
    let tol = 1e-9 * x_end;
    let near = move |a: f64, b: f64| (a - b).abs() <= tol;
    mesh.add_node_set("fixed_end", |x| near(x[0], 0.0));
    mesh.add_node_set("sym_z", |x| near(x[2], 0.0));
    mesh.add_node_set("tip", |x| near(x[0], x_end) && near(x[1], 0.0) && near(x[2], 0.0));
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_mesh;

    #[test]
    fn segments_hit_endpoints() {
        let s = segments(0.0, &[(0.1, 1), (1.8, 3), (0.1, 1)]);
        assert_eq!(s.len(), 6);
        assert_eq!(s[1], 0.1);
        assert_eq!(*s.last().unwrap(), 2.0);
    }

    #[test]
    fn box_rejects_thick_walls() {
        let spec = BoxSelfContactSpec {
            thickness: 0.25,
            gap: None,
            ..Default::default()
        };
        assert!(matches!(build_box_self_contact(&spec), Err(MeshError::InconsistentDimensions(_))));
        let spec = BoxSelfContactSpec {
            nx: 0,
            ..Default::default()
        };
        assert!(matches!(build_box_self_contact(&spec), Err(MeshError::ZeroSubdivisions(_))));
        let spec = BoxSelfContactSpec {
            gap: Some(0.2),
            ..Default::default()
        };
        assert!(build_box_self_contact(&spec).is_err());
    }

    #[test]
    fn box_sets_and_probes() {
        let mesh = build_box_self_contact(&BoxSelfContactSpec::default()).unwrap();
        for name in ["top_load", "bottom_fixed", "front_back_z", "probe_upper", "probe_lower"] {
            assert!(!mesh.node_set(name).unwrap().is_empty(), "{name}");
        }
        let up = mesh.node_set("probe_upper").unwrap()[0];
        let lo = mesh.node_set("probe_lower").unwrap()[0];
        assert!((mesh.nodes[up].x[1] - mesh.nodes[lo].x[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn builders_are_deterministic() {
        let a = build_box_self_contact(&BoxSelfContactSpec::default()).unwrap();
        let b = build_box_self_contact(&BoxSelfContactSpec::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn punch_and_actuator_are_valid() {
        let punch = build_punch(&PunchSpec::default()).unwrap();
        let report = validate_mesh(&punch);
        assert!(report.is_valid(), "{:?}", report.failures);
        assert_eq!(punch.node_set("probe_punch").unwrap().len(), 1);

        let act = build_actuator(&ActuatorSpec::default()).unwrap();
        let report = validate_mesh(&act);
        assert!(report.is_valid(), "{:?}", report.failures);
        let chambers: std::collections::BTreeSet<_> = act
            .elements
            .iter()
            .filter_map(|e| match e.tag {
                DomainTag::ThirdMedium(id) if id > 0 => Some(id),
                _ => None,
            })
            .collect();
        assert_eq!(chambers.len(), 3);
    }

    #[test]
    fn padded_box_is_valid() {
        let spec = BoxSelfContactSpec {
            padding: Some((0.1, 1)),
            nx: 6,
            ..Default::default()
        };
        let mesh = build_box_self_contact(&spec).unwrap();
        assert!(validate_mesh(&mesh).is_valid());
        let (lo, hi) = mesh.bounds();
        assert!((lo[2] + 0.25).abs() < 1e-12 && (hi[2] - 0.25).abs() < 1e-12);
    }
}
