//! 20-node serendipity hexahedron (Q2S): shape functions with first and second
//! derivatives, the reference-to-physical Jacobian with the derivative of its
//! inverse, and tensor-product Gauss rules.
//!
//! Node ordering follows the legacy VTK quadratic hexahedron (cell type 25):
//!
//! ```text
//!        7-----14------6
//!       /|            /|
//!     15 |          13 |
//!     /  19         /  18
//!    4-----12------5   |
//!    |   |         |   |
//!    |   3----10---|---2
//!   16  /         17  /
//!    | 11          | 9
//!    |/            |/
//!    0------8------1
//! ```
//!
//! Corners 0..8 run counter-clockwise on ζ = −1 then ζ = +1; mid-edge nodes are
//! bottom edges (8..12), top edges (12..16), then vertical edges (16..20).

use nalgebra::Matrix3;

use crate::error::ElementError;

pub const NODES_PER_ELEMENT: usize = 20;

/// Reference coordinates of the 20 nodes in canonical order.
pub const NODE_REF_COORDS: [[f64; 3]; NODES_PER_ELEMENT] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
    [0.0, -1.0, -1.0],
    [1.0, 0.0, -1.0],
    [0.0, 1.0, -1.0],
    [-1.0, 0.0, -1.0],
    [0.0, -1.0, 1.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [-1.0, 0.0, 1.0],
    [-1.0, -1.0, 0.0],
    [1.0, -1.0, 0.0],
    [1.0, 1.0, 0.0],
    [-1.0, 1.0, 0.0],
];

/// Corner pairs spanned by the mid-edge nodes 8..20.
pub const EDGE_CORNERS: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Local node indices of the six faces: four corners (outward-normal
/// counter-clockwise) followed by the four mid-edge nodes between them.
/// Faces are −ξ, +ξ, −η, +η, −ζ, +ζ.
pub const FACE_NODES: [[usize; 8]; 6] = [
    [0, 4, 7, 3, 16, 15, 19, 11],
    [1, 2, 6, 5, 9, 18, 13, 17],
    [0, 1, 5, 4, 8, 17, 12, 16],
    [3, 7, 6, 2, 19, 14, 18, 10],
    [0, 3, 2, 1, 11, 10, 9, 8],
    [4, 5, 6, 7, 12, 13, 14, 15],
];

/// A point in the reference cube [−1, 1]³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefCoord(pub [f64; 3]);

impl RefCoord {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(xi: f64, eta: f64, zeta: f64) -> Self {
        RefCoord([xi, eta, zeta])
    }

    pub fn is_inside(&self) -> bool {
        self.0.iter().all(|c| c.abs() <= 1.0 + Self::TOLERANCE)
    }
}

/// Shape values and reference-coordinate derivatives at one point.
#[derive(Debug, Clone)]
pub struct ShapeEval {
    pub n: [f64; NODES_PER_ELEMENT],
    /// `dn_dxi[I][k] = ∂N_I/∂ξ_k`
    pub dn_dxi: [[f64; 3]; NODES_PER_ELEMENT],
    /// `d2n_dxi2[I][k][l] = ∂²N_I/∂ξ_k∂ξ_l`, symmetric in `k, l`.
    pub d2n_dxi2: [[[f64; 3]; 3]; NODES_PER_ELEMENT],
}

/// Evaluates the serendipity basis at `xi`.
pub fn q2s_eval(xi: RefCoord) -> ShapeEval {
    let x = xi.0;
    let mut n = [0.0; NODES_PER_ELEMENT];
    let mut dn = [[0.0; 3]; NODES_PER_ELEMENT];
    let mut d2n = [[[0.0; 3]; 3]; NODES_PER_ELEMENT];

    for (node, a) in NODE_REF_COORDS.iter().enumerate() {
        match a.iter().position(|c| *c == 0.0) {
            None => {
                // N = p q r s / 8 with p = 1 + a_0 x_0, ..., s = Σ a_k x_k − 2
                let f = [1.0 + a[0] * x[0], 1.0 + a[1] * x[1], 1.0 + a[2] * x[2]];
                let s = a[0] * x[0] + a[1] * x[1] + a[2] * x[2] - 2.0;
                let prod = f[0] * f[1] * f[2];
                n[node] = 0.125 * prod * s;
                for k in 0..3 {
                    let (o1, o2) = others(k);
                    let fo = f[o1] * f[o2];
                    dn[node][k] = 0.125 * a[k] * fo * (s + f[k]);
                    d2n[node][k][k] = 0.25 * fo;
                }
                for k in 0..3 {
                    for l in (k + 1)..3 {
                        let m = 3 - k - l;
                        let v = 0.125 * a[k] * a[l] * f[m] * (s + f[k] + f[l]);
                        d2n[node][k][l] = v;
                        d2n[node][l][k] = v;
                    }
                }
            }
            Some(m) => {
                // N = (1 − x_m²)(1 + a_o1 x_o1)(1 + a_o2 x_o2) / 4
                let (o1, o2) = others(m);
                let bubble = 1.0 - x[m] * x[m];
                let f1 = 1.0 + a[o1] * x[o1];
                let f2 = 1.0 + a[o2] * x[o2];
                n[node] = 0.25 * bubble * f1 * f2;
                dn[node][m] = -0.5 * x[m] * f1 * f2;
                dn[node][o1] = 0.25 * bubble * a[o1] * f2;
                dn[node][o2] = 0.25 * bubble * f1 * a[o2];
                d2n[node][m][m] = -0.5 * f1 * f2;
                let v = -0.5 * x[m] * a[o1] * f2;
                d2n[node][m][o1] = v;
                d2n[node][o1][m] = v;
                let v = -0.5 * x[m] * f1 * a[o2];
                d2n[node][m][o2] = v;
                d2n[node][o2][m] = v;
                let v = 0.25 * bubble * a[o1] * a[o2];
                d2n[node][o1][o2] = v;
                d2n[node][o2][o1] = v;
            }
        }
    }

    ShapeEval {
        n,
        dn_dxi: dn,
        d2n_dxi2: d2n,
    }
}

fn others(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Tensor-product Gauss–Legendre rule on the reference cube.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<RefCoord>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// 1D Gauss–Legendre points and weights on [−1, 1].
pub fn gauss_legendre_1d(points: usize) -> Result<(Vec<f64>, Vec<f64>), ElementError> {
    let (p, w) = match points {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let r = (6.0f64 / 5.0).sqrt();
            let a = ((3.0 - 2.0 * r) / 7.0).sqrt();
            let b = ((3.0 + 2.0 * r) / 7.0).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        other => return Err(ElementError::UnsupportedQuadrature(other)),
    };
    Ok((p, w))
}

/// Hexahedral rule with `points_per_axis` ∈ {2, 3, 4}; 3 is the solver default.
pub fn gauss_rule(points_per_axis: usize) -> Result<QuadratureRule, ElementError> {
    if !(2..=4).contains(&points_per_axis) {
        return Err(ElementError::UnsupportedQuadrature(points_per_axis));
    }
    let (p, w) = gauss_legendre_1d(points_per_axis)?;
    let mut points = Vec::with_capacity(p.len().pow(3));
    let mut weights = Vec::with_capacity(p.len().pow(3));
    // ξ fastest
    for k in 0..p.len() {
        for j in 0..p.len() {
            for i in 0..p.len() {
                points.push(RefCoord::new(p[i], p[j], p[k]));
                weights.push(w[i] * w[j] * w[k]);
            }
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Jacobian of the isoparametric map and the pieces needed for physical
/// second derivatives.
#[derive(Debug, Clone)]
pub struct JacobianData {
    /// `g[(i, k)] = ∂X_k/∂ξ_i`
    pub g: Matrix3<f64>,
    pub det_g: f64,
    /// Adjugate of `g`, so that `g_inv = g_star / det_g`.
    pub g_star: Matrix3<f64>,
    pub g_inv: Matrix3<f64>,
    /// `dg_inv_dxi[l] = ∂G⁻¹/∂ξ_l`
    pub dg_inv_dxi: [Matrix3<f64>; 3],
}

/// Adjugate written as a bilinear form `adj(G) = bilinear(G, G)` so its
/// directional derivative is `bilinear(dG, G) + bilinear(G, dG)`.
fn adjugate_bilinear(a: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix3<f64> {
    let mut r = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            // cofactor of (j, i): rows other than j, columns other than i
            let (r0, r1) = others(j);
            let (c0, c1) = others(i);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            r[(i, j)] = sign * (a[(r0, c0)] * b[(r1, c1)] - a[(r0, c1)] * b[(r1, c0)]);
        }
    }
    r
}

pub fn adjugate(g: &Matrix3<f64>) -> Matrix3<f64> {
    adjugate_bilinear(g, g)
}

/// Evaluates the Jacobian data of an element with node coordinates `coords`
/// (canonical order) at `xi`.
pub fn jacobian(coords: &[[f64; 3]; NODES_PER_ELEMENT], xi: RefCoord) -> Result<JacobianData, ElementError> {
    jacobian_from_shape(coords, &q2s_eval(xi))
}

pub fn jacobian_from_shape(
    coords: &[[f64; 3]; NODES_PER_ELEMENT],
    shape: &ShapeEval,
) -> Result<JacobianData, ElementError> {
    let mut g = Matrix3::zeros();
    let mut dg = [Matrix3::zeros(); 3];
    for (node, x) in coords.iter().enumerate() {
        for i in 0..3 {
            for k in 0..3 {
                g[(i, k)] += shape.dn_dxi[node][i] * x[k];
                for (l, dgl) in dg.iter_mut().enumerate() {
                    dgl[(i, k)] += shape.d2n_dxi2[node][i][l] * x[k];
                }
            }
        }
    }

    let g_star = adjugate(&g);
    // Sarrus expansion; equal to the first row of G times the first column of G*.
    let det_g = g[(0, 0)] * g_star[(0, 0)] + g[(0, 1)] * g_star[(1, 0)] + g[(0, 2)] * g_star[(2, 0)];
    if !(det_g > 0.0) || !det_g.is_finite() {
        return Err(ElementError::InvertedReference { element: None, det_g });
    }
    let g_inv = g_star / det_g;

    let mut dg_inv_dxi = [Matrix3::zeros(); 3];
    for l in 0..3 {
        let d_star = adjugate_bilinear(&dg[l], &g) + adjugate_bilinear(&g, &dg[l]);
        // Jacobi: d|G| = tr(G* dG)
        let d_det = (g_star * dg[l]).trace();
        dg_inv_dxi[l] = d_star / det_g - g_star * (d_det / (det_g * det_g));
    }

    Ok(JacobianData {
        g,
        det_g,
        g_star,
        g_inv,
        dg_inv_dxi,
    })
}

/// Shape derivatives with respect to reference-configuration coordinates.
#[derive(Debug, Clone)]
pub struct PhysicalDerivatives {
    /// `dn_dx[I][i] = ∂N_I/∂X_i`
    pub dn_dx: [[f64; 3]; NODES_PER_ELEMENT],
    /// `d2n_dx2[I][i][j] = ∂²N_I/∂X_i∂X_j`
    pub d2n_dx2: [[[f64; 3]; 3]; NODES_PER_ELEMENT],
    pub det_g: f64,
}

pub fn physical_derivatives(
    coords: &[[f64; 3]; NODES_PER_ELEMENT],
    xi: RefCoord,
) -> Result<PhysicalDerivatives, ElementError> {
    let shape = q2s_eval(xi);
    let jac = jacobian_from_shape(coords, &shape)?;
    Ok(physical_from_parts(&shape, &jac))
}

pub fn physical_from_parts(shape: &ShapeEval, jac: &JacobianData) -> PhysicalDerivatives {
    let gi = &jac.g_inv;
    let mut dn_dx = [[0.0; 3]; NODES_PER_ELEMENT];
    let mut d2n_dx2 = [[[0.0; 3]; 3]; NODES_PER_ELEMENT];
    for node in 0..NODES_PER_ELEMENT {
        let dxi = &shape.dn_dxi[node];
        let d2xi = &shape.d2n_dxi2[node];
        for i in 0..3 {
            dn_dx[node][i] = (0..3).map(|k| gi[(i, k)] * dxi[k]).sum();
        }
        // inner[i][l] = ∂/∂ξ_l (G⁻¹_ik ∂N/∂ξ_k)
        let mut inner = [[0.0; 3]; 3];
        for i in 0..3 {
            for l in 0..3 {
                let mut v = 0.0;
                for k in 0..3 {
                    v += gi[(i, k)] * d2xi[l][k] + dxi[k] * jac.dg_inv_dxi[l][(i, k)];
                }
                inner[i][l] = v;
            }
        }
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = (0..3).map(|l| inner[i][l] * gi[(j, l)]).sum();
            }
        }
        for i in 0..3 {
            for j in i..3 {
                let s = 0.5 * (h[i][j] + h[j][i]);
                d2n_dx2[node][i][j] = s;
                d2n_dx2[node][j][i] = s;
            }
        }
    }
    PhysicalDerivatives {
        dn_dx,
        d2n_dx2,
        det_g: jac.det_g,
    }
}

/// Interpolates the reference position of `xi` inside an element.
pub fn interpolate_position(coords: &[[f64; 3]; NODES_PER_ELEMENT], xi: RefCoord) -> [f64; 3] {
    let shape = q2s_eval(xi);
    let mut x = [0.0; 3];
    for (node, c) in coords.iter().enumerate() {
        for k in 0..3 {
            x[k] += shape.n[node] * c[k];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_element(scale: [f64; 3], offset: [f64; 3]) -> [[f64; 3]; 20] {
        let mut c = [[0.0; 3]; 20];
        for (node, r) in NODE_REF_COORDS.iter().enumerate() {
            for k in 0..3 {
                c[node][k] = offset[k] + scale[k] * r[k];
            }
        }
        c
    }

    fn curved_element() -> [[f64; 3]; 20] {
        let mut c = cube_element([0.5, 0.7, 0.4], [0.1, -0.2, 0.3]);
        c[8][1] += 0.08;
        c[13][0] -= 0.05;
        c[18][2] += 0.04;
        c[6][0] += 0.1;
        c
    }

    #[test]
    fn kronecker_property() {
        for (j, r) in NODE_REF_COORDS.iter().enumerate() {
            let s = q2s_eval(RefCoord(*r));
            for i in 0..20 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s.n[i] - expect).abs() < 1e-14, "N_{i} at node {j}");
            }
        }
    }

    #[test]
    fn centre_values() {
        let s = q2s_eval(RefCoord::new(0.0, 0.0, 0.0));
        for i in 0..8 {
            assert!((s.n[i] + 0.25).abs() < 1e-15);
        }
        for i in 8..20 {
            assert!((s.n[i] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let xi = RefCoord::new(0.31, -0.47, 0.73);
        let s = q2s_eval(xi);
        let h = 1e-6;
        for k in 0..3 {
            let mut p = xi;
            let mut m = xi;
            p.0[k] += h;
            m.0[k] -= h;
            let (sp, sm) = (q2s_eval(p), q2s_eval(m));
            for i in 0..20 {
                let fd = (sp.n[i] - sm.n[i]) / (2.0 * h);
                assert!((fd - s.dn_dxi[i][k]).abs() < 1e-9);
                for l in 0..3 {
                    let fd2 = (sp.dn_dxi[i][l] - sm.dn_dxi[i][l]) / (2.0 * h);
                    assert!((fd2 - s.d2n_dxi2[i][l][k]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn unsupported_rule() {
        assert!(gauss_rule(5).is_err());
        assert!(gauss_rule(1).is_err());
    }

    #[test]
    fn rule_integrates_monomial() {
        let rule = gauss_rule(3).unwrap();
        assert_eq!(rule.len(), 27);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 8.0).abs() < 1e-14);
        let v: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p.0[0].powi(2) * p.0[1].powi(2) * p.0[2].powi(2))
            .sum();
        assert!((v - (2.0f64 / 3.0).powi(3)).abs() < 1e-14);
    }

    #[test]
    fn two_point_rule_exact_for_cubics() {
        let rule = gauss_rule(2).unwrap();
        // ∫ (x³ + x² y + z²·x + y²) = 0 + 0 + 0 + (2/3)·4
        let v: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| {
                let [x, y, z] = p.0;
                w * (x.powi(3) + x * x * y + z * z * x + y * y)
            })
            .sum();
        assert!((v - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn affine_jacobian() {
        let c = cube_element([0.5, 2.0, 0.25], [1.0, 2.0, 3.0]);
        let j = jacobian(&c, RefCoord::new(0.2, -0.3, 0.9)).unwrap();
        assert!((j.det_g - 0.25).abs() < 1e-14);
        assert!((j.g[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((j.g[(1, 1)] - 2.0).abs() < 1e-14);
        assert!(j.g[(0, 1)].abs() < 1e-14);
        for l in 0..3 {
            assert!(j.dg_inv_dxi[l].norm() < 1e-13);
        }
    }

    #[test]
    fn unit_cube_jacobian() {
        let c = cube_element([0.5; 3], [0.5; 3]);
        let j = jacobian(&c, RefCoord::new(0.0, 0.0, 0.0)).unwrap();
        assert!((j.det_g - 0.125).abs() < 1e-15);
        assert!((j.g_star - Matrix3::identity() * 0.25).norm() < 1e-15);
        assert!((j.g - Matrix3::identity() * 0.5).norm() < 1e-15);
    }

    #[test]
    fn inverse_derivative_matches_fd_on_curved_element() {
        let c = curved_element();
        let xi = RefCoord::new(0.21, -0.63, 0.44);
        let j = jacobian(&c, xi).unwrap();
        assert!((j.g_inv * j.g - Matrix3::identity()).norm() < 1e-12);
        assert!((j.g_inv * j.det_g - j.g_star).norm() < 1e-12 * j.g_star.norm());
        let h = 1e-5;
        for l in 0..3 {
            let mut p = xi;
            let mut m = xi;
            p.0[l] += h;
            m.0[l] -= h;
            let fd = (jacobian(&c, p).unwrap().g_inv - jacobian(&c, m).unwrap().g_inv) / (2.0 * h);
            let rel = (fd - j.dg_inv_dxi[l]).norm() / j.dg_inv_dxi[l].norm();
            assert!(rel < 1e-6, "l={l} rel={rel}");
        }
    }

    #[test]
    fn inverted_element_detected() {
        // mirror image of a valid element
        let c = cube_element([-0.5, 0.5, 0.5], [0.0; 3]);
        assert!(matches!(
            jacobian(&c, RefCoord::new(0.0, 0.0, 0.0)),
            Err(ElementError::InvertedReference { .. })
        ));
    }

    #[test]
    fn linear_field_has_zero_hessian_on_curved_element() {
        let c = curved_element();
        let a = [[0.3, -1.2, 0.7], [2.0, 0.1, -0.4], [0.5, 0.9, 1.1]];
        let rule = gauss_rule(3).unwrap();
        for p in &rule.points {
            let d = physical_derivatives(&c, *p).unwrap();
            for comp in 0..3 {
                let mut grad = [0.0; 3];
                let mut hess = [[0.0; 3]; 3];
                for node in 0..20 {
                    let u: f64 = (0..3).map(|k| a[comp][k] * c[node][k]).sum();
                    for i in 0..3 {
                        grad[i] += d.dn_dx[node][i] * u;
                        for j in 0..3 {
                            hess[i][j] += d.d2n_dx2[node][i][j] * u;
                        }
                    }
                }
                for i in 0..3 {
                    assert!((grad[i] - a[comp][i]).abs() < 1e-12);
                    for j in 0..3 {
                        assert!(hess[i][j].abs() < 1e-11, "{}", hess[i][j]);
                    }
                }
            }
        }
    }
}
