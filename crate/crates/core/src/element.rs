//! Element residual and tangent for solid and third-medium Q2S elements.
//!
//! Element DOFs are node-major: `3·I + i` is component `i` of node `I`.

use nalgebra::{Matrix3, SMatrix, SVector};

use crate::error::{ElementError, MaterialError};
use crate::material::{
    idx2, idx3, solid_response, third_medium_response, DerivativeProvider, KinematicState, SolidParams, TangentBlocks,
    ThirdMediumParams,
};
use crate::shape::{jacobian_from_shape, physical_from_parts, q2s_eval, QuadratureRule, NODES_PER_ELEMENT};

pub const ELEMENT_DOFS: usize = 3 * NODES_PER_ELEMENT;

pub type ElementVector = SVector<f64, ELEMENT_DOFS>;
pub type ElementMatrix = SMatrix<f64, ELEMENT_DOFS, ELEMENT_DOFS>;

/// Flattened variation operators: `B1·U = F̂ − Î` and `B2·U = ∇F̂`.
#[derive(Debug, Clone)]
pub struct BOperators {
    pub b1: SMatrix<f64, 9, ELEMENT_DOFS>,
    pub b2: SMatrix<f64, 27, ELEMENT_DOFS>,
}

pub fn build_b_operators(
    dn_dx: &[[f64; 3]; NODES_PER_ELEMENT],
    d2n_dx2: &[[[f64; 3]; 3]; NODES_PER_ELEMENT],
) -> BOperators {
    let mut b1 = SMatrix::<f64, 9, ELEMENT_DOFS>::zeros();
    let mut b2 = SMatrix::<f64, 27, ELEMENT_DOFS>::zeros();
    for node in 0..NODES_PER_ELEMENT {
        for i in 0..3 {
            let col = 3 * node + i;
            for j in 0..3 {
                b1[(idx2(i, j), col)] = dn_dx[node][j];
                for k in 0..3 {
                    b2[(idx3(i, j, k), col)] = d2n_dx2[node][j][k];
                }
            }
        }
    }
    BOperators { b1, b2 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementMaterial {
    Solid(SolidParams),
    ThirdMedium(ThirdMediumParams),
}

impl ElementMaterial {
    pub fn needs_second_derivatives(&self) -> bool {
        matches!(self, ElementMaterial::ThirdMedium(_))
    }
}

/// Physical shape derivatives at one quadrature point.
#[derive(Debug, Clone)]
pub struct QpGeometry {
    pub dn_dx: [[f64; 3]; NODES_PER_ELEMENT],
    /// Empty for solids, which never use second derivatives.
    pub d2n_dx2: Option<Box<[[[f64; 3]; 3]; NODES_PER_ELEMENT]>>,
    /// Quadrature weight times det(G).
    pub weight: f64,
}

/// Reference-configuration data of one element, computed once per run.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub qps: Vec<QpGeometry>,
}

impl ElementGeometry {
    pub fn new(
        coords: &[[f64; 3]; NODES_PER_ELEMENT],
        rule: &QuadratureRule,
        second_derivatives: bool,
    ) -> Result<Self, ElementError> {
        let mut qps = Vec::with_capacity(rule.len());
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let shape = q2s_eval(*p);
            let jac = jacobian_from_shape(coords, &shape)?;
            let phys = physical_from_parts(&shape, &jac);
            qps.push(QpGeometry {
                dn_dx: phys.dn_dx,
                d2n_dx2: second_derivatives.then(|| Box::new(phys.d2n_dx2)),
                weight: w * phys.det_g,
            });
        }
        Ok(ElementGeometry { qps })
    }

    pub fn volume(&self) -> f64 {
        self.qps.iter().map(|q| q.weight).sum()
    }
}

impl QpGeometry {
    pub fn deformation_gradient(&self, u: &ElementVector) -> Matrix3<f64> {
        let mut f = Matrix3::identity();
        for (node, g) in self.dn_dx.iter().enumerate() {
            for i in 0..3 {
                let ui = u[3 * node + i];
                for j in 0..3 {
                    f[(i, j)] += ui * g[j];
                }
            }
        }
        f
    }

    pub fn grad_f(&self, u: &ElementVector) -> [f64; 27] {
        let mut g = [0.0; 27];
        if let Some(h) = &self.d2n_dx2 {
            for (node, hn) in h.iter().enumerate() {
                for i in 0..3 {
                    let ui = u[3 * node + i];
                    for k in 0..3 {
                        for j in 0..3 {
                            g[idx3(i, j, k)] += ui * hn[j][k];
                        }
                    }
                }
            }
        }
        g
    }
}

#[derive(Debug, Clone)]
pub struct ElementContribution {
    /// Integral of the energy density over the element.
    pub energy: f64,
    pub residual: ElementVector,
    /// Left empty when only the residual was requested.
    pub tangent: Option<Box<ElementMatrix>>,
}

/// Scales the pneumatic load of a third-medium material.
pub fn with_pressure_factor(material: &ElementMaterial, factor: f64) -> ElementMaterial {
    match material {
        ElementMaterial::ThirdMedium(p) => ElementMaterial::ThirdMedium(ThirdMediumParams {
            pbar: p.pbar * factor,
            ..*p
        }),
        solid => *solid,
    }
}

fn map_material_error(e: MaterialError, element: usize, qp: usize) -> ElementError {
    match e {
        MaterialError::BarrierViolation { j } => ElementError::BarrierViolation { element, qp, j },
        MaterialError::NonFinite => ElementError::NonFinite { element, qp },
    }
}

/// Integrates residual and (optionally) tangent over the element.
///
/// The tangent is contracted node by node instead of forming `Bᵀ·C·B` with
/// dense operators; [`build_b_operators`] gives the dense form.
pub fn element_contribution(
    element: usize,
    geometry: &ElementGeometry,
    u: &ElementVector,
    material: &ElementMaterial,
    provider: DerivativeProvider,
    with_tangent: bool,
) -> Result<ElementContribution, ElementError> {
    let mut energy = 0.0;
    let mut residual = ElementVector::zeros();
    let mut tangent = with_tangent.then(|| Box::new(ElementMatrix::zeros()));

    for (qp, geo) in geometry.qps.iter().enumerate() {
        let f = geo.deformation_gradient(u);
        let w = geo.weight;
        let (response, blocks) = match material {
            ElementMaterial::Solid(p) => {
                let (r, c) = solid_response(&f, p, provider).map_err(|e| map_material_error(e, element, qp))?;
                (r, TangentBlocks { c_hat: c, ..TangentBlocks::zeros() })
            }
            ElementMaterial::ThirdMedium(p) => {
                let state = KinematicState::new(f, geo.grad_f(u));
                third_medium_response(&state, p, provider).map_err(|e| map_material_error(e, element, qp))?
            }
        };
        energy += w * response.psi;

        let g = &geo.dn_dx;
        let h = geo.d2n_dx2.as_deref();
        for node in 0..NODES_PER_ELEMENT {
            for i in 0..3 {
                let mut r = 0.0;
                for j in 0..3 {
                    r += response.p_hat[idx2(i, j)] * g[node][j];
                }
                if let Some(h) = h {
                    for k in 0..3 {
                        for j in 0..3 {
                            r += response.t_hat[idx3(i, j, k)] * h[node][j][k];
                        }
                    }
                }
                residual[3 * node + i] += w * r;
            }
        }

        if let Some(kt) = tangent.as_deref_mut() {
            accumulate_tangent(kt, w, g, h, &blocks);
        }
    }

    if !residual.iter().all(|v| v.is_finite()) || !energy.is_finite() {
        return Err(ElementError::NonFinite { element, qp: 0 });
    }
    Ok(ElementContribution {
        energy,
        residual,
        tangent,
    })
}

fn accumulate_tangent(
    kt: &mut ElementMatrix,
    w: f64,
    g: &[[f64; 3]; NODES_PER_ELEMENT],
    h: Option<&[[[f64; 3]; 3]; NODES_PER_ELEMENT]>,
    blocks: &TangentBlocks,
) {
    const N: usize = NODES_PER_ELEMENT;
    // Column-side contractions: cg[b][row] = Σ_L C[row, (k, L)] g_BL with b = 3B + k,
    // and likewise for the 27-rows of 𝔸 and 𝔹.
    let mut cg = [[0.0f64; 9]; ELEMENT_DOFS];
    for b in 0..ELEMENT_DOFS {
        let (node, k) = (b / 3, b % 3);
        for row in 0..9 {
            let mut s = 0.0;
            for l in 0..3 {
                s += blocks.c_hat[(row, idx2(k, l))] * g[node][l];
            }
            cg[b][row] = s;
        }
    }
    let a_nonzero = blocks.a_hat.iter().any(|v| *v != 0.0);
    let mut ag = [[0.0f64; 27]; ELEMENT_DOFS];
    let mut bh = [[0.0f64; 27]; ELEMENT_DOFS];
    if let Some(h) = h {
        let b_nonzero = blocks.b_hat.iter().any(|v| *v != 0.0);
        for b in 0..ELEMENT_DOFS {
            let (node, k) = (b / 3, b % 3);
            for row in 0..27 {
                if a_nonzero {
                    let mut s = 0.0;
                    for l in 0..3 {
                        s += blocks.a_hat[(row, idx2(k, l))] * g[node][l];
                    }
                    ag[b][row] = s;
                }
                if b_nonzero {
                    let mut s = 0.0;
                    for n in 0..3 {
                        for m in 0..3 {
                            s += blocks.b_hat[(row, idx3(k, m, n))] * h[node][m][n];
                        }
                    }
                    bh[b][row] = s;
                }
            }
        }
    }

    for b in 0..ELEMENT_DOFS {
        for a_node in 0..N {
            for i in 0..3 {
                let a = 3 * a_node + i;
                // B1ᵀ C B1
                let mut s = 0.0;
                for j in 0..3 {
                    s += g[a_node][j] * cg[b][idx2(i, j)];
                }
                if let Some(h) = h {
                    for k in 0..3 {
                        for j in 0..3 {
                            let hv = h[a_node][j][k];
                            let r = idx3(i, j, k);
                            // B2ᵀ 𝔸 B1 and B2ᵀ 𝔹 B2
                            s += hv * (ag[b][r] + bh[b][r]);
                        }
                    }
                    if a_nonzero {
                        // B1ᵀ 𝔸ᵀ B2: row (i, J) of 𝔸ᵀ against the 27-side of column b.
                        let (b_node, k) = (b / 3, b % 3);
                        for jj in 0..3 {
                            let mut t = 0.0;
                            for n in 0..3 {
                                for m in 0..3 {
                                    t += blocks.a_hat[(idx3(k, m, n), idx2(i, jj))] * h[b_node][m][n];
                                }
                            }
                            s += g[a_node][jj] * t;
                        }
                    }
                }
                kt[(a, b)] += w * s;
            }
        }
    }
}

/// Determinant of F at every quadrature point.
pub fn qp_jacobians(geometry: &ElementGeometry, u: &ElementVector) -> Vec<f64> {
    geometry.qps.iter().map(|q| q.deformation_gradient(u).determinant()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::Regularization;
    use crate::shape::{gauss_rule, physical_derivatives, RefCoord, NODE_REF_COORDS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn distorted_coords() -> [[f64; 3]; NODES_PER_ELEMENT] {
        let mut c = [[0.0; 3]; NODES_PER_ELEMENT];
        for (n, r) in NODE_REF_COORDS.iter().enumerate() {
            c[n] = [0.5 * r[0] + 0.05 * r[1] * r[2], 0.4 * r[1] + 0.03 * r[0] * r[0], 0.6 * r[2] + 0.04 * r[0] * r[1]];
        }
        c
    }

    fn affine_coords() -> [[f64; 3]; NODES_PER_ELEMENT] {
        let mut c = [[0.0; 3]; NODES_PER_ELEMENT];
        for (n, r) in NODE_REF_COORDS.iter().enumerate() {
            c[n] = [1.0 + 0.5 * r[0] + 0.1 * r[1], 2.0 + 0.4 * r[1], -1.0 + 0.3 * r[2] + 0.05 * r[0]];
        }
        c
    }

    fn nodal(c: &[[f64; 3]; NODES_PER_ELEMENT], u: impl Fn([f64; 3]) -> [f64; 3]) -> ElementVector {
        let mut v = ElementVector::zeros();
        for (n, x) in c.iter().enumerate() {
            let un = u(*x);
            for i in 0..3 {
                v[3 * n + i] = un[i];
            }
        }
        v
    }

    fn third_medium() -> ElementMaterial {
        ElementMaterial::ThirdMedium(ThirdMediumParams {
            bulk: 20.0,
            shear: 10.0,
            gamma: 0.1,
            alpha_r: 0.5,
            pbar: 0.2,
            reg_kind: Regularization::SkewGradient,
        })
    }

    fn solid() -> ElementMaterial {
        ElementMaterial::Solid(SolidParams { bulk: 20.0, shear: 10.0 })
    }

    fn random_u(seed: u64, amp: f64) -> ElementVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ElementVector::from_fn(|_, _| rng.gen_range(-amp..amp))
    }

    #[test]
    fn b_operator_examples() {
        let c = affine_coords();
        let d = physical_derivatives(&c, RefCoord::new(0.2, -0.3, 0.5)).unwrap();
        let b = build_b_operators(&d.dn_dx, &d.d2n_dx2);

        let t = nodal(&c, |_| [0.3, -1.0, 2.0]);
        assert!((b.b1 * t).abs().max() < 1e-12 && (b.b2 * t).abs().max() < 1e-12);

        let ux = nodal(&c, |x| [x[0], 0.0, 0.0]);
        let f = b.b1 * ux;
        for r in 0..9 {
            let want = if r == idx2(0, 0) { 1.0 } else { 0.0 };
            assert!((f[r] - want).abs() < 1e-12);
        }

        let uxy = nodal(&c, |x| [x[0] * x[1], 0.0, 0.0]);
        let h = b.b2 * uxy;
        for r in 0..27 {
            let want = if r == idx3(0, 1, 0) || r == idx3(0, 0, 1) { 1.0 } else { 0.0 };
            assert!((h[r] - want).abs() < 1e-11, "{r}: {}", h[r]);
        }
    }

    #[test]
    fn zero_displacement_gives_zero_residual() {
        let geo = ElementGeometry::new(&distorted_coords(), &gauss_rule(3).unwrap(), true).unwrap();
        for m in [solid(), with_pressure_factor(&third_medium(), 0.0)] {
            let c = element_contribution(0, &geo, &ElementVector::zeros(), &m, DerivativeProvider::Analytic, false).unwrap();
            assert!(c.residual.abs().max() < 1e-14);
        }
    }

    fn fd_check(material: ElementMaterial, provider: DerivativeProvider) {
        let geo = ElementGeometry::new(&distorted_coords(), &gauss_rule(3).unwrap(), true).unwrap();
        let u = random_u(1, 0.05);
        let c = element_contribution(0, &geo, &u, &material, provider, true).unwrap();
        let kt = c.tangent.unwrap();
        let step = 1e-7;
        let mut fd = ElementMatrix::zeros();
        for b in 0..ELEMENT_DOFS {
            let mut up = u;
            let mut um = u;
            up[b] += step;
            um[b] -= step;
            let rp = element_contribution(0, &geo, &up, &material, provider, false).unwrap().residual;
            let rm = element_contribution(0, &geo, &um, &material, provider, false).unwrap().residual;
            fd.set_column(b, &((rp - rm) / (2.0 * step)));
        }
        let rel = (*kt - fd).norm() / fd.norm();
        assert!(rel < 1e-5, "tangent vs FD: {rel}");
        let asym = (*kt - kt.transpose()).norm() / kt.norm();
        assert!(asym < 1e-9, "asymmetry {asym}");

        // residual is the gradient of the element energy
        let mut fd_r = ElementVector::zeros();
        for a in 0..ELEMENT_DOFS {
            let mut up = u;
            let mut um = u;
            up[a] += 1e-6;
            um[a] -= 1e-6;
            let ep = element_contribution(0, &geo, &up, &material, provider, false).unwrap().energy;
            let em = element_contribution(0, &geo, &um, &material, provider, false).unwrap().energy;
            fd_r[a] = (ep - em) / 2e-6;
        }
        assert!((c.residual - fd_r).norm() / fd_r.norm() < 1e-6);
    }

    #[test]
    fn solid_tangent_matches_fd() {
        fd_check(solid(), DerivativeProvider::Analytic);
    }

    #[test]
    fn third_medium_tangent_matches_fd() {
        fd_check(third_medium(), DerivativeProvider::Analytic);
        let full = match third_medium() {
            ElementMaterial::ThirdMedium(p) => ElementMaterial::ThirdMedium(ThirdMediumParams {
                reg_kind: Regularization::FullGradient,
                ..p
            }),
            m => m,
        };
        fd_check(full, DerivativeProvider::Analytic);
    }

    #[test]
    fn node_wise_contraction_matches_dense_operators() {
        let coords = distorted_coords();
        let rule = gauss_rule(3).unwrap();
        let geo = ElementGeometry::new(&coords, &rule, true).unwrap();
        let u = random_u(2, 0.05);
        let m = third_medium();
        // Perturb 𝔸 so the cross terms are exercised as well.
        let mut blocks = TangentBlocks::zeros();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        blocks.c_hat = SMatrix::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        blocks.c_hat = blocks.c_hat + blocks.c_hat.transpose();
        blocks.a_hat = SMatrix::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        blocks.b_hat = SMatrix::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        blocks.b_hat = blocks.b_hat + blocks.b_hat.transpose();
        let qp = &geo.qps[5];
        let mut kt = ElementMatrix::zeros();
        accumulate_tangent(&mut kt, 1.0, &qp.dn_dx, qp.d2n_dx2.as_deref(), &blocks);
        let b = build_b_operators(&qp.dn_dx, qp.d2n_dx2.as_deref().unwrap());
        let dense = b.b1.transpose() * blocks.c_hat * b.b1
            + b.b2.transpose() * blocks.a_hat * b.b1
            + b.b1.transpose() * blocks.a_hat.transpose() * b.b2
            + b.b2.transpose() * blocks.b_hat * b.b2;
        assert!((kt - dense).norm() < 1e-12 * dense.norm());

        // residual through the dense operators
        let c = element_contribution(0, &geo, &u, &m, DerivativeProvider::Analytic, false).unwrap();
        let mut r = ElementVector::zeros();
        for q in &geo.qps {
            let b = build_b_operators(&q.dn_dx, q.d2n_dx2.as_deref().unwrap());
            let state = KinematicState::new(q.deformation_gradient(&u), q.grad_f(&u));
            let p = match m {
                ElementMaterial::ThirdMedium(p) => p,
                _ => unreachable!(),
            };
            let (resp, _) = third_medium_response(&state, &p, DerivativeProvider::Analytic).unwrap();
            let ph = SVector::<f64, 9>::from_column_slice(&resp.p_hat);
            let th = SVector::<f64, 27>::from_column_slice(&resp.t_hat);
            r += q.weight * (b.b1.transpose() * ph + b.b2.transpose() * th);
        }
        assert!((c.residual - r).norm() < 1e-12 * r.norm());
    }

    #[test]
    fn providers_give_same_element_tangent() {
        let geo = ElementGeometry::new(&distorted_coords(), &gauss_rule(2).unwrap(), true).unwrap();
        let u = random_u(3, 0.05);
        let a = element_contribution(0, &geo, &u, &third_medium(), DerivativeProvider::Analytic, true).unwrap();
        let d = element_contribution(0, &geo, &u, &third_medium(), DerivativeProvider::DualNumber, true).unwrap();
        let (ka, kd) = (a.tangent.unwrap(), d.tangent.unwrap());
        assert!((*ka - *kd).norm() < 1e-10 * kd.norm());
    }

    #[test]
    fn translation_invariance() {
        let geo = ElementGeometry::new(&distorted_coords(), &gauss_rule(3).unwrap(), true).unwrap();
        let u = random_u(5, 0.05);
        let shift = nodal(&distorted_coords(), |_| [0.7, -0.2, 1.3]);
        for m in [solid(), third_medium()] {
            let a = element_contribution(0, &geo, &u, &m, DerivativeProvider::Analytic, false).unwrap();
            let b = element_contribution(0, &geo, &(u + shift), &m, DerivativeProvider::Analytic, false).unwrap();
            assert!((a.residual - b.residual).norm() <= 1e-12 * a.residual.norm());
        }
    }

    #[test]
    fn barrier_violation_names_element_and_point() {
        let geo = ElementGeometry::new(&affine_coords(), &gauss_rule(2).unwrap(), false).unwrap();
        let u = nodal(&affine_coords(), |x| [-2.0 * x[0], 0.0, 0.0]);
        let err = element_contribution(7, &geo, &u, &solid(), DerivativeProvider::Analytic, true).unwrap_err();
        assert!(matches!(err, ElementError::BarrierViolation { element: 7, qp: 0, .. }), "{err}");
    }
}
