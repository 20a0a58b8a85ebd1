//! Second-order forward-mode numbers and energy densities written once,
//! generically, so the same code yields values (with `f64`) or values,
//! gradients and Hessians (with [`Dual2`]).

use std::ops::{Add, Mul, Neg, Sub};

/// Arithmetic needed by the energy densities.
pub trait Real: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn ln(self) -> Self;
    fn powf(self, e: f64) -> Self;
    fn scale(self, s: f64) -> Self;
}

impl Real for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// Value with exact gradient and Hessian with respect to `N` seeded inputs.
#[derive(Clone, Copy, Debug)]
pub struct Dual2<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
    pub h: [[f64; N]; N],
}

impl<const N: usize> Dual2<N> {
    pub fn constant(v: f64) -> Self {
        Dual2 {
            v,
            g: [0.0; N],
            h: [[0.0; N]; N],
        }
    }

    /// Independent variable number `index`.
    pub fn variable(v: f64, index: usize) -> Self {
        let mut d = Self::constant(v);
        d.g[index] = 1.0;
        d
    }

    /// Applies a scalar function given its value and first two derivatives.
    fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self::constant(f);
        for a in 0..N {
            out.g[a] = df * self.g[a];
        }
        for a in 0..N {
            let ga = d2f * self.g[a];
            for b in 0..N {
                out.h[a][b] = df * self.h[a][b] + ga * self.g[b];
            }
        }
        out
    }
}

impl<const N: usize> Add for Dual2<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        for a in 0..N {
            self.g[a] += o.g[a];
            for b in 0..N {
                self.h[a][b] += o.h[a][b];
            }
        }
        self
    }
}

impl<const N: usize> Sub for Dual2<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        self.v -= o.v;
        for a in 0..N {
            self.g[a] -= o.g[a];
            for b in 0..N {
                self.h[a][b] -= o.h[a][b];
            }
        }
        self
    }
}

impl<const N: usize> Neg for Dual2<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Mul for Dual2<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::constant(self.v * o.v);
        for a in 0..N {
            out.g[a] = self.v * o.g[a] + o.v * self.g[a];
        }
        for a in 0..N {
            for b in 0..N {
                out.h[a][b] = self.v * o.h[a][b] + o.v * self.h[a][b] + self.g[a] * o.g[b] + o.g[a] * self.g[b];
            }
        }
        out
    }
}

impl<const N: usize> Real for Dual2<N> {
    fn constant(v: f64) -> Self {
        Dual2::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }
    fn powf(self, e: f64) -> Self {
        let f = self.v.powf(e);
        self.chain(f, e * self.v.powf(e - 1.0), e * (e - 1.0) * self.v.powf(e - 2.0))
    }
    fn scale(mut self, s: f64) -> Self {
        self.v *= s;
        for a in 0..N {
            self.g[a] *= s;
            for b in 0..N {
                self.h[a][b] *= s;
            }
        }
        self
    }
}

/// Entry `F_{iJ}` of a deformation gradient flattened with the first index
/// fastest.
#[inline]
fn fe<T: Copy>(f: &[T; 9], i: usize, j: usize) -> T {
    f[i + 3 * j]
}

pub fn det3<T: Real>(f: &[T; 9]) -> T {
    fe(f, 0, 0) * (fe(f, 1, 1) * fe(f, 2, 2) - fe(f, 1, 2) * fe(f, 2, 1))
        - fe(f, 0, 1) * (fe(f, 1, 0) * fe(f, 2, 2) - fe(f, 1, 2) * fe(f, 2, 0))
        + fe(f, 0, 2) * (fe(f, 1, 0) * fe(f, 2, 1) - fe(f, 1, 1) * fe(f, 2, 0))
}

/// `K/2 (ln J)² + μ/2 (J^{-2/3} tr(FᵀF) − 3)`; caller guarantees J > 0.
pub fn neo_hookean<T: Real>(f: &[T; 9], bulk: f64, shear: f64) -> T {
    let j = det3(f);
    let ln_j = j.ln();
    let mut i1 = T::constant(0.0);
    for v in f {
        i1 = i1 + *v * *v;
    }
    (ln_j * ln_j).scale(0.5 * bulk) + (j.powf(-2.0 / 3.0) * i1 - T::constant(3.0)).scale(0.5 * shear)
}

/// `α γ / 2 · Σ_{ijk} (∂f^skew_ij/∂X_k)²` with `f^skew = (F − Fᵀ)/2`.
pub fn skew_regularization<T: Real>(g: &[T; 27], gamma: f64, alpha_r: f64) -> T {
    let mut sum = T::constant(0.0);
    for k in 0..3 {
        for j in 0..3 {
            for i in 0..3 {
                let s = (g[i + 3 * j + 9 * k] - g[j + 3 * i + 9 * k]).scale(0.5);
                sum = sum + s * s;
            }
        }
    }
    sum.scale(0.5 * alpha_r * gamma)
}

/// `α γ / 2 · (∇F ⋮ ∇F − (1/3) Div(∇u)·Div(∇u))`.
pub fn full_gradient_regularization<T: Real>(g: &[T; 27], gamma: f64, alpha_r: f64) -> T {
    let mut sum = T::constant(0.0);
    for v in g {
        sum = sum + *v * *v;
    }
    let mut div = T::constant(0.0);
    for i in 0..3 {
        let d = g[i] + g[i + 3 + 9] + g[i + 6 + 18];
        div = div + d * d;
    }
    (sum - div.scale(1.0 / 3.0)).scale(0.5 * alpha_r * gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_and_chain_rule() {
        // f(x, y) = ln(x y²) + x^1.5
        let x = Dual2::<2>::variable(1.3, 0);
        let y = Dual2::<2>::variable(0.7, 1);
        let f = (x * y * y).ln() + x.powf(1.5);
        let (xv, yv) = (1.3f64, 0.7f64);
        assert!((f.v - ((xv * yv * yv).ln() + xv.powf(1.5))).abs() < 1e-14);
        assert!((f.g[0] - (1.0 / xv + 1.5 * xv.sqrt())).abs() < 1e-14);
        assert!((f.g[1] - 2.0 / yv).abs() < 1e-14);
        assert!((f.h[0][0] - (-1.0 / (xv * xv) + 0.75 / xv.sqrt())).abs() < 1e-13);
        assert!((f.h[1][1] + 2.0 / (yv * yv)).abs() < 1e-13);
        assert!(f.h[0][1].abs() < 1e-14 && f.h[1][0].abs() < 1e-14);
    }
}
