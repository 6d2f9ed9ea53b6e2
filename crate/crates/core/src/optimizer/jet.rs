//! Second-order forward-mode derivatives of the knee angle.
//!
//! Near the singular stroke the angle behaves like `−√margin`, so a
//! finite-difference Hessian loses most of its digits exactly where the
//! optimum sits. A [`Jet`] carries value, gradient and Hessian through the
//! same formulas [`crate::kinematics::knee_angle`] evaluates.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
    pub h: [[f64; N]; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            g: [0.0; N],
            h: [[0.0; N]; N],
        }
    }

    /// The `i`-th independent variable at value `v`.
    pub fn variable(v: f64, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[i] = 1.0;
        j
    }

    /// `f(self)` given `f(v)`, `f'(v)`, `f''(v)`.
    fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self::constant(f);
        for i in 0..N {
            out.g[i] = df * self.g[i];
            for k in 0..N {
                out.h[i][k] = df * self.h[i][k] + d2f * self.g[i] * self.g[k];
            }
        }
        out
    }

    /// `f(a, b)` given the value and first and second partials.
    #[allow(clippy::too_many_arguments)]
    fn chain2(a: &Self, b: &Self, f: f64, fa: f64, fb: f64, faa: f64, fab: f64, fbb: f64) -> Self {
        let mut out = Self::constant(f);
        for i in 0..N {
            out.g[i] = fa * a.g[i] + fb * b.g[i];
            for k in 0..N {
                out.h[i][k] = fa * a.h[i][k]
                    + fb * b.h[i][k]
                    + faa * a.g[i] * a.g[k]
                    + fbb * b.g[i] * b.g[k]
                    + fab * (a.g[i] * b.g[k] + b.g[i] * a.g[k]);
            }
        }
        out
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn hypot(self, other: Self) -> Self {
        let (a, b) = (self.v, other.v);
        let r = a.hypot(b);
        let r3 = r * r * r;
        Self::chain2(&self, &other, r, a / r, b / r, b * b / r3, -a * b / r3, a * a / r3)
    }

    /// Four-quadrant arctangent of `self / x`.
    pub fn atan2(self, x: Self) -> Self {
        let (y0, x0) = (self.v, x.v);
        let r2 = x0 * x0 + y0 * y0;
        let r4 = r2 * r2;
        Self::chain2(
            &self,
            &x,
            y0.atan2(x0),
            x0 / r2,
            -y0 / r2,
            -2.0 * x0 * y0 / r4,
            (y0 * y0 - x0 * x0) / r4,
            2.0 * x0 * y0 / r4,
        )
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::chain2(&self, &o, self.v + o.v, 1.0, 1.0, 0.0, 0.0, 0.0)
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::chain2(&self, &o, self.v - o.v, 1.0, -1.0, 0.0, 0.0, 0.0)
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::chain2(&self, &o, self.v * o.v, o.v, self.v, 0.0, 1.0, 0.0)
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let (a, b) = (self.v, o.v);
        let r = 1.0 / b;
        Self::chain2(&self, &o, a / b, r, -a * r * r, 0.0, -r * r, 2.0 * a * r * r * r)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.chain(-self.v, -1.0, 0.0)
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.chain(self.v * k, k, 0.0)
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(self, k: f64) -> Self {
        self.chain(self.v + k, 1.0, 0.0)
    }
}

/// Interior angle opposite `c`, in the cancellation-free half-angle form.
/// Values round exactly as in the kinematics so both agree on the domain.
fn triangle_angle<const N: usize>(a: Jet<N>, b: Jet<N>, c: Jet<N>) -> Option<Jet<N>> {
    let two_ab = a * b * 2.0;
    let one_minus_cos = (c - (a - b)) * (c + (a - b)) / two_ab;
    let one_plus_cos = ((a + b) - c) * ((a + b) + c) / two_ab;
    if !(one_minus_cos.v > 0.0 && one_plus_cos.v > 0.0) {
        return None;
    }
    Some(one_minus_cos.sqrt().atan2(one_plus_cos.sqrt()) * 2.0)
}

/// Knee angle in degrees with exact first and second derivatives in the
/// six link lengths, at fixed stroke `d`. `None` where any triangle of the
/// chain is degenerate or does not close.
pub fn theta_jet(x: &[f64; 6], d: f64) -> Option<Jet<6>> {
    let l: [Jet<6>; 6] = std::array::from_fn(|i| Jet::variable(x[i], i));
    let [l1, l2, l3, l4, l5, l6] = l;
    let l7 = l5.hypot(l6);
    let alpha1 = l5.atan2(l6);
    let alpha2 = triangle_angle(l7, l2, Jet::constant(d))?;
    let l8 = (l2 * l2 + l3 * l3 + l2 * 2.0 * l3 * (alpha1 + alpha2).cos()).sqrt();
    if !(l8.v > 0.0) {
        return None;
    }
    let beta1 = triangle_angle(l8, l3, l2)?;
    let beta2 = triangle_angle(l8, l4, l1)?;
    Some((beta1 + beta2) * (-180.0 / std::f64::consts::PI) + 180.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{knee_angle, LinkSet};

    const OPT: [f64; 6] = [59.081, 68.84, 55.964, 71.849, 118.63, 287.31];

    #[test]
    fn value_matches_knee_angle() {
        for d in [242.0, 252.0, 300.0] {
            let j = theta_jet(&OPT, d).unwrap();
            let k = knee_angle(&LinkSet::from_array(OPT).unwrap(), d).unwrap();
            assert!((j.v - k.theta_deg).abs() < 1e-10, "{} vs {}", j.v, k.theta_deg);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = [60.0, 70.0, 55.0, 75.0, 90.0, 250.0];
        let j = theta_jet(&x, 242.0).unwrap();
        let f = |p: &[f64; 6]| theta_jet(p, 242.0).unwrap().v;
        let h = 1e-4;
        for i in 0..6 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let g = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((g - j.g[i]).abs() < 1e-6 * j.g[i].abs().max(1.0), "g[{i}]");
            let jp = theta_jet(&xp, 242.0).unwrap();
            let jm = theta_jet(&xm, 242.0).unwrap();
            for k in 0..6 {
                let hk = (jp.g[k] - jm.g[k]) / (2.0 * h);
                assert!((hk - j.h[i][k]).abs() < 1e-5 * j.h[i][k].abs().max(1.0), "h[{i}][{k}]");
            }
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        let j = theta_jet(&OPT, 242.0).unwrap();
        for i in 0..6 {
            for k in 0..6 {
                assert!((j.h[i][k] - j.h[k][i]).abs() <= 1e-9 * j.h[i][k].abs().max(1.0));
            }
        }
    }
}
