//! Central finite differences over the 9 entries of F and the 27 entries of
//! ∇F. Independent of both derivative providers; used to check them.

use nalgebra::SMatrix;

use super::{KinematicState, TangentBlocks};
use crate::error::MaterialError;

/// Finite-difference counterparts of the response and tangent blocks.
#[derive(Debug, Clone)]
pub struct FdDerivatives {
    pub p_hat: [f64; 9],
    pub t_hat: [f64; 27],
    pub blocks: TangentBlocks,
}

fn unpack(state: &KinematicState) -> [f64; 36] {
    let mut x = [0.0; 36];
    x[..9].copy_from_slice(&state.f_hat());
    x[9..].copy_from_slice(&state.grad_f);
    x
}

fn eval<F>(psi: &F, x: &[f64; 36]) -> Result<f64, MaterialError>
where
    F: Fn(&[f64; 9], &[f64; 27]) -> Result<f64, MaterialError>,
{
    let f: [f64; 9] = x[..9].try_into().unwrap();
    let g: [f64; 27] = x[9..].try_into().unwrap();
    let v = psi(&f, &g)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(MaterialError::NonFinite)
    }
}

fn blocks_from_full(h: &[[f64; 36]; 36]) -> TangentBlocks {
    TangentBlocks {
        c_hat: SMatrix::from_fn(|r, c| h[r][c]),
        a_hat: SMatrix::from_fn(|r, c| h[9 + r][c]),
        b_hat: SMatrix::from_fn(|r, c| h[9 + r][9 + c]),
    }
}

/// Differentiates an energy density `psi(F̂, ∇F̂)` with step `step`: first
/// derivatives by central differences, second derivatives by the four-point
/// mixed central stencil.
pub fn fd_oracle<F>(psi: F, state: &KinematicState, step: f64) -> Result<FdDerivatives, MaterialError>
where
    F: Fn(&[f64; 9], &[f64; 27]) -> Result<f64, MaterialError>,
{
    let x0 = unpack(state);
    let mut grad = [0.0; 36];
    for a in 0..36 {
        let mut p = x0;
        let mut m = x0;
        p[a] += step;
        m[a] -= step;
        grad[a] = (eval(&psi, &p)? - eval(&psi, &m)?) / (2.0 * step);
    }
    let f0 = eval(&psi, &x0)?;
    let mut h = [[0.0; 36]; 36];
    for a in 0..36 {
        for b in a..36 {
            let v = if a == b {
                let mut p = x0;
                let mut m = x0;
                p[a] += step;
                m[a] -= step;
                (eval(&psi, &p)? - 2.0 * f0 + eval(&psi, &m)?) / (step * step)
            } else {
                let mut pp = x0;
                let mut pm = x0;
                let mut mp = x0;
                let mut mm = x0;
                pp[a] += step;
                pp[b] += step;
                pm[a] += step;
                pm[b] -= step;
                mp[a] -= step;
                mp[b] += step;
                mm[a] -= step;
                mm[b] -= step;
                (eval(&psi, &pp)? - eval(&psi, &pm)? - eval(&psi, &mp)? + eval(&psi, &mm)?) / (4.0 * step * step)
            };
            h[a][b] = v;
            h[b][a] = v;
        }
    }
    Ok(FdDerivatives {
        p_hat: grad[..9].try_into().unwrap(),
        t_hat: grad[9..].try_into().unwrap(),
        blocks: blocks_from_full(&h),
    })
}

/// Jacobian of a first-derivative map `(F̂, ∇F̂) ↦ (P̂, T̂)` by central
/// differences, returned in tangent-block layout.
pub fn fd_stress_jacobian<F>(stress: F, state: &KinematicState, step: f64) -> Result<TangentBlocks, MaterialError>
where
    F: Fn(&[f64; 9], &[f64; 27]) -> Result<([f64; 9], [f64; 27]), MaterialError>,
{
    let x0 = unpack(state);
    let mut h = [[0.0; 36]; 36];
    for b in 0..36 {
        let mut p = x0;
        let mut m = x0;
        p[b] += step;
        m[b] -= step;
        let split = |x: &[f64; 36]| -> Result<[f64; 36], MaterialError> {
            let (ph, th) = stress(&x[..9].try_into().unwrap(), &x[9..].try_into().unwrap())?;
            let mut out = [0.0; 36];
            out[..9].copy_from_slice(&ph);
            out[9..].copy_from_slice(&th);
            if out.iter().all(|v| v.is_finite()) {
                Ok(out)
            } else {
                Err(MaterialError::NonFinite)
            }
        };
        let (sp, sm) = (split(&p)?, split(&m)?);
        for a in 0..36 {
            h[a][b] = (sp[a] - sm[a]) / (2.0 * step);
        }
    }
    Ok(blocks_from_full(&h))
}
