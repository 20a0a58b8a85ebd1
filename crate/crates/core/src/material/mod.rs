//! Energy densities, stresses and tangents for the hyperelastic solid and the
//! third medium.
//!
//! Flattening is fixed everywhere in the crate: a second-order tensor `A_iJ`
//! maps to index `i + 3J` and a third-order tensor `A_ijk` to
//! `i + 3j + 9k`, first index fastest. `a_hat` has rows in the 27-layout and
//! columns in the 9-layout.

pub mod dual;
mod fd;

pub use fd::{fd_oracle, fd_stress_jacobian, FdDerivatives};

use nalgebra::{Matrix3, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::MaterialError;
use dual::{Dual2, Real};

pub type Matrix9 = SMatrix<f64, 9, 9>;
pub type Matrix27x9 = SMatrix<f64, 27, 9>;
pub type Matrix27 = SMatrix<f64, 27, 27>;

#[inline]
pub const fn idx2(i: usize, j: usize) -> usize {
    i + 3 * j
}

#[inline]
pub const fn idx3(i: usize, j: usize, k: usize) -> usize {
    i + 3 * j + 9 * k
}

pub fn flatten2(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for j in 0..3 {
        for i in 0..3 {
            out[idx2(i, j)] = m[(i, j)];
        }
    }
    out
}

pub fn unflatten2(v: &[f64; 9]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| v[idx2(i, j)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolidParams {
    pub bulk: f64,
    pub shear: f64,
}

impl SolidParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.bulk > 0.0 && self.shear > 0.0) {
            return Err(format!("bulk and shear moduli must be positive (K = {}, mu = {})", self.bulk, self.shear));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    #[default]
    SkewGradient,
    FullGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThirdMediumParams {
    pub bulk: f64,
    pub shear: f64,
    pub gamma: f64,
    pub alpha_r: f64,
    /// Positive values are suction, negative values inflation.
    pub pbar: f64,
    pub reg_kind: Regularization,
}

impl ThirdMediumParams {
    pub fn validate(&self) -> Result<(), String> {
        SolidParams {
            bulk: self.bulk,
            shear: self.shear,
        }
        .validate()?;
        if !(self.gamma > 0.0) {
            return Err(format!("gamma must be positive (got {})", self.gamma));
        }
        if !(self.alpha_r >= 0.0) {
            return Err(format!("alpha_r must be non-negative (got {})", self.alpha_r));
        }
        if !self.pbar.is_finite() {
            return Err("pbar must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeProvider {
    #[default]
    Analytic,
    DualNumber,
}

/// Deformation gradient and its material gradient at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub f: Matrix3<f64>,
    /// `∂F_ij/∂X_k` at index `i + 3j + 9k`.
    pub grad_f: [f64; 27],
    pub j: f64,
}

impl KinematicState {
    pub fn new(f: Matrix3<f64>, grad_f: [f64; 27]) -> Self {
        KinematicState {
            f,
            grad_f,
            j: f.determinant(),
        }
    }

    pub fn f_hat(&self) -> [f64; 9] {
        flatten2(&self.f)
    }

    pub fn from_flat(f: &[f64; 9], grad_f: &[f64; 27]) -> Self {
        Self::new(unflatten2(f), *grad_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialResponse {
    pub psi: f64,
    pub p_hat: [f64; 9],
    pub t_hat: [f64; 27],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentBlocks {
    pub c_hat: Matrix9,
    pub a_hat: Matrix27x9,
    pub b_hat: Matrix27,
}

impl TangentBlocks {
    pub fn zeros() -> Self {
        TangentBlocks {
            c_hat: Matrix9::zeros(),
            a_hat: Matrix27x9::zeros(),
            b_hat: Matrix27::zeros(),
        }
    }

    /// The symmetric 36×36 matrix `[[C, Aᵀ], [A, B]]`.
    pub fn full(&self) -> SMatrix<f64, 36, 36> {
        let mut m = SMatrix::<f64, 36, 36>::zeros();
        m.fixed_view_mut::<9, 9>(0, 0).copy_from(&self.c_hat);
        m.fixed_view_mut::<27, 9>(9, 0).copy_from(&self.a_hat);
        m.fixed_view_mut::<9, 27>(0, 9).copy_from(&self.a_hat.transpose());
        m.fixed_view_mut::<27, 27>(9, 9).copy_from(&self.b_hat);
        m
    }
}

fn check_j(j: f64) -> Result<(), MaterialError> {
    if !j.is_finite() {
        Err(MaterialError::NonFinite)
    } else if j <= 0.0 {
        Err(MaterialError::BarrierViolation { j })
    } else {
        Ok(())
    }
}

fn check_finite(values: &[f64]) -> Result<(), MaterialError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MaterialError::NonFinite)
    }
}

pub fn psi_solid(f: &Matrix3<f64>, params: &SolidParams) -> Result<f64, MaterialError> {
    let j = f.determinant();
    check_j(j)?;
    let psi = dual::neo_hookean(&flatten2(f), params.bulk, params.shear);
    check_finite(&[psi])?;
    Ok(psi)
}

pub fn psi_reg_skew(grad_f: &[f64; 27], gamma: f64, alpha_r: f64) -> f64 {
    dual::skew_regularization(grad_f, gamma, alpha_r)
}

pub fn psi_reg_fullgrad(grad_f: &[f64; 27], gamma: f64, alpha_r: f64) -> f64 {
    dual::full_gradient_regularization(grad_f, gamma, alpha_r)
}

pub fn psi_pneumatic(j: f64, pbar: f64) -> f64 {
    pbar * j
}

/// Total third-medium energy density: γ-scaled neo-Hookean, regularization
/// and pneumatic term.
pub fn psi_third_medium(state: &KinematicState, params: &ThirdMediumParams) -> Result<f64, MaterialError> {
    check_j(state.j)?;
    let nh = dual::neo_hookean(&state.f_hat(), params.bulk, params.shear);
    let reg = match params.reg_kind {
        Regularization::SkewGradient => psi_reg_skew(&state.grad_f, params.gamma, params.alpha_r),
        Regularization::FullGradient => psi_reg_fullgrad(&state.grad_f, params.gamma, params.alpha_r),
    };
    let psi = params.gamma * nh + reg + psi_pneumatic(state.j, params.pbar);
    check_finite(&[psi])?;
    Ok(psi)
}

/// Closed-form neo-Hookean stress and tangent scaled by `scale`, plus the
/// pneumatic term `pbar·J`, accumulated into `p` and `c`.
fn analytic_volumetric(f: &Matrix3<f64>, bulk: f64, shear: f64, scale: f64, pbar: f64, p: &mut [f64; 9], c: &mut Matrix9) -> f64 {
    let j = f.determinant();
    let finv = f.try_inverse().expect("J > 0 checked");
    let ln_j = j.ln();
    let a = j.powf(-2.0 / 3.0);
    let i1 = f.norm_squared();
    let (k, mu) = (scale * bulk, scale * shear);
    let psi = 0.5 * k * ln_j * ln_j + 0.5 * mu * (a * i1 - 3.0) + pbar * j;

    // finv[(J, i)] is F⁻¹_Ji, i.e. (F⁻ᵀ)_iJ.
    for jj in 0..3 {
        for i in 0..3 {
            let fit = finv[(jj, i)];
            p[idx2(i, jj)] += k * ln_j * fit + mu * a * (f[(i, jj)] - i1 / 3.0 * fit) + pbar * j * fit;
        }
    }
    for ll in 0..3 {
        for k_ in 0..3 {
            let col = idx2(k_, ll);
            let flk = finv[(ll, k_)];
            for jj in 0..3 {
                for i in 0..3 {
                    let row = idx2(i, jj);
                    let fji = finv[(jj, i)];
                    let cross = finv[(jj, k_)] * finv[(ll, i)];
                    let dev = f[(i, jj)] - i1 / 3.0 * fji;
                    let delta = if i == k_ && jj == ll { 1.0 } else { 0.0 };
                    c[(row, col)] += k * (flk * fji - ln_j * cross)
                        + mu * a
                            * (-2.0 / 3.0 * flk * dev + delta - 2.0 / 3.0 * f[(k_, ll)] * fji + i1 / 3.0 * cross)
                        + pbar * j * (flk * fji - cross);
                }
            }
        }
    }
    psi
}

/// Closed-form regularization stress and (constant) tangent.
fn analytic_regularization(grad_f: &[f64; 27], kind: Regularization, w: f64, t: &mut [f64; 27], b: &mut Matrix27) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    match kind {
        Regularization::SkewGradient => {
            for k in 0..3 {
                for j in 0..3 {
                    for i in 0..3 {
                        let r = idx3(i, j, k);
                        let s = idx3(j, i, k);
                        t[r] += w * 0.5 * (grad_f[r] - grad_f[s]);
                        b[(r, r)] += 0.5 * w;
                        b[(r, s)] -= 0.5 * w;
                    }
                }
            }
            psi_reg_skew(grad_f, 1.0, w)
        }
        Regularization::FullGradient => {
            let mut d = [0.0; 3];
            for (i, di) in d.iter_mut().enumerate() {
                *di = (0..3).map(|j| grad_f[idx3(i, j, j)]).sum();
            }
            for k in 0..3 {
                for j in 0..3 {
                    for i in 0..3 {
                        let r = idx3(i, j, k);
                        t[r] += w * grad_f[r];
                        b[(r, r)] += w;
                        if j == k {
                            t[r] -= w * d[i] / 3.0;
                            for m in 0..3 {
                                b[(r, idx3(i, m, m))] -= w / 3.0;
                            }
                        }
                    }
                }
            }
            psi_reg_fullgrad(grad_f, 1.0, w)
        }
    }
}

fn dual_solid(f: &[f64; 9], bulk: f64, shear: f64) -> Dual2<9> {
    let x: [Dual2<9>; 9] = std::array::from_fn(|a| Dual2::variable(f[a], a));
    dual::neo_hookean(&x, bulk, shear)
}

/// Solid energy, PK1 stress and tangent.
pub fn solid_response(
    f: &Matrix3<f64>,
    params: &SolidParams,
    provider: DerivativeProvider,
) -> Result<(MaterialResponse, Matrix9), MaterialError> {
    check_j(f.determinant())?;
    let mut p = [0.0; 9];
    let mut c = Matrix9::zeros();
    let psi = match provider {
        DerivativeProvider::Analytic => analytic_volumetric(f, params.bulk, params.shear, 1.0, 0.0, &mut p, &mut c),
        DerivativeProvider::DualNumber => {
            let d = dual_solid(&flatten2(f), params.bulk, params.shear);
            p = d.g;
            c = Matrix9::from_fn(|r, s| d.h[r][s]);
            d.v
        }
    };
    check_finite(&p)?;
    check_finite(c.as_slice())?;
    Ok((
        MaterialResponse {
            psi,
            p_hat: p,
            t_hat: [0.0; 27],
        },
        c,
    ))
}

/// Third-medium energy, stresses and all three tangent blocks. The energy is
/// separable in F and ∇F, so `a_hat` is zero for both regularizations.
pub fn third_medium_response(
    state: &KinematicState,
    params: &ThirdMediumParams,
    provider: DerivativeProvider,
) -> Result<(MaterialResponse, TangentBlocks), MaterialError> {
    check_j(state.j)?;
    let mut p = [0.0; 9];
    let mut t = [0.0; 27];
    let mut blocks = TangentBlocks::zeros();
    let psi = match provider {
        DerivativeProvider::Analytic => {
            let w = params.alpha_r * params.gamma;
            analytic_volumetric(&state.f, params.bulk, params.shear, params.gamma, params.pbar, &mut p, &mut blocks.c_hat)
                + analytic_regularization(&state.grad_f, params.reg_kind, w, &mut t, &mut blocks.b_hat)
        }
        DerivativeProvider::DualNumber => {
            let d = dual_third_medium(state, params);
            p.copy_from_slice(&d.g[..9]);
            t.copy_from_slice(&d.g[9..]);
            blocks.c_hat = Matrix9::from_fn(|r, s| d.h[r][s]);
            blocks.a_hat = Matrix27x9::from_fn(|r, s| d.h[9 + r][s]);
            blocks.b_hat = Matrix27::from_fn(|r, s| d.h[9 + r][9 + s]);
            d.v
        }
    };
    check_finite(&[psi])?;
    check_finite(&p)?;
    check_finite(&t)?;
    check_finite(blocks.c_hat.as_slice())?;
    check_finite(blocks.b_hat.as_slice())?;
    Ok((MaterialResponse { psi, p_hat: p, t_hat: t }, blocks))
}

fn dual_third_medium(state: &KinematicState, params: &ThirdMediumParams) -> Dual2<36> {
    let fh = state.f_hat();
    let f: [Dual2<36>; 9] = std::array::from_fn(|a| Dual2::variable(fh[a], a));
    let g: [Dual2<36>; 27] = std::array::from_fn(|a| Dual2::variable(state.grad_f[a], 9 + a));
    let reg = match params.reg_kind {
        Regularization::SkewGradient => dual::skew_regularization(&g, params.gamma, params.alpha_r),
        Regularization::FullGradient => dual::full_gradient_regularization(&g, params.gamma, params.alpha_r),
    };
    dual::neo_hookean(&f, params.bulk, params.shear).scale(params.gamma) + reg + dual::det3(&f).scale(params.pbar)
}

/// `σ = P Fᵀ / J`.
pub fn cauchy_from_pk1(f: &Matrix3<f64>, p_hat: &[f64; 9]) -> Result<Matrix3<f64>, MaterialError> {
    let j = f.determinant();
    check_j(j)?;
    Ok(unflatten2(p_hat) * f.transpose() / j)
}
