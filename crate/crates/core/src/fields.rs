//! Scalar test fields and the polynomial ramp profiles shared by the
//! approximation drivers and the bump-family machinery.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::domain::DomainSpec;
use crate::fmath;

/// A deterministic scalar field on the domain closure.
pub trait Field {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

impl<F: Field + ?Sized> Field for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

impl Field for Box<dyn Field + '_> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

pub struct ConstField {
    pub value: f64,
    pub dim: usize,
}

impl Field for ConstField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _x: &[f64]) -> f64 {
        self.value
    }
}

/// The coordinate `x_axis`.
pub struct CoordField {
    pub axis: usize,
    pub dim: usize,
}

impl Field for CoordField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        x[self.axis]
    }
}

/// `prod_i x_i^{powers[i]}`.
pub struct MonomialField {
    pub powers: Vec<u32>,
}

impl Field for MonomialField {
    fn dim(&self) -> usize {
        self.powers.len()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for (xi, &p) in x.iter().zip(&self.powers) {
            v *= fmath::powi(*xi, p as i32);
        }
        v
    }
}

/// Polynomial ramp of order `n`: 0 at 0, 1 at 1, with the first `n`
/// derivatives vanishing at both ends. Outside `[0,1]` it is clamped.
pub fn smoothstep(n: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // sum_{k=0..n} C(n+k, k) C(2n+1, n-k) (-x)^k, times x^{n+1}
    let mut acc = 0.0;
    for k in 0..=n {
        let c1 = binomial(n + k, k);
        let c2 = binomial(2 * n + 1, n - k);
        let term = c1 * c2 * fmath::powi(-x, k as i32);
        acc += term;
    }
    acc * fmath::powi(x, n as i32 + 1)
}

/// `j`-th derivative of [`smoothstep`] (exact polynomial differentiation).
pub fn smoothstep_d(n: u32, j: u32, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return if j == 0 && x >= 1.0 { 1.0 } else { 0.0 };
    }
    // expand into monomial coefficients of degree n+1+k, differentiate j times
    let mut acc = 0.0;
    for k in 0..=n {
        let deg = (n + 1 + k) as i64;
        if (j as i64) > deg {
            continue;
        }
        let mut c = binomial(n + k, k) * binomial(2 * n + 1, n - k) * fmath::powi(-1.0, k as i32);
        for i in 0..j as i64 {
            c *= (deg - i) as f64;
        }
        acc += c * fmath::powi(x, (deg - j as i64) as i32);
    }
    acc
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k.min(n));
    let mut num = 1.0;
    let mut den = 1.0;
    for i in 0..k {
        num *= (n - i) as f64;
        den *= (i + 1) as f64;
    }
    num / den
}

/// Profile applied to the relative height `u = x_d / psi(x')`.
#[derive(Debug, Clone, Copy)]
pub enum CuspProfile {
    /// `g(u) = u`.
    Linear,
    /// `g(u) = smoothstep(order, 2u - 1)`: active only in the upper half of
    /// each column, where the graph geometry bites.
    BoundaryLayer { order: u32 },
}

/// Graph-aligned field `f(x) = g(x_d / psi(x'))`.
pub struct CuspAligned<'a> {
    pub dom: &'a DomainSpec,
    pub profile: CuspProfile,
}

impl<'a> Field for CuspAligned<'a> {
    fn dim(&self) -> usize {
        self.dom.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        let k = self.dom.dim - 1;
        let psi = self.dom.psi_unchecked(&x[..k]);
        let u = (x[k] / psi).clamp(0.0, 1.0);
        match self.profile {
            CuspProfile::Linear => u,
            CuspProfile::BoundaryLayer { order } => smoothstep(order, 2.0 * u - 1.0),
        }
    }
}

/// A spike supported in the slab `x_d > b`, ramping from 0 at `b` to 1 near
/// the top; mirrors the extremal family used for the lower estimates.
pub struct TipBump {
    pub b: f64,
    pub top: f64,
    pub order: u32,
    pub dim: usize,
}

impl Field for TipBump {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        let u = 2.0 * (x[self.dim - 1] - self.b) / (self.top - self.b);
        smoothstep(self.order, 2.0 * (u - 0.5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints_and_derivs() {
        for n in 1..=4u32 {
            assert_eq!(smoothstep(n, 0.0), 0.0);
            assert_eq!(smoothstep(n, 1.0), 1.0);
            for j in 1..=n {
                // coefficients reach ~1e5, so the vanishing rate is O(eps * 1e5)
                assert!(smoothstep_d(n, j, 1e-9).abs() < 1e-3);
                assert!(smoothstep_d(n, j, 1.0 - 1e-9).abs() < 1e-3);
            }
        }
        // classical cubic: 3x^2 - 2x^3
        assert!((smoothstep(1, 0.25) - (3.0 * 0.0625 - 2.0 * 0.015625)).abs() < 1e-15);
    }

    #[test]
    fn smoothstep_derivative_matches_fd() {
        for n in 1..=3u32 {
            for j in 1..=2u32 {
                for &x in &[0.2, 0.5, 0.8] {
                    let h = 1e-6;
                    let fd =
                        (smoothstep_d(n, j - 1, x + h) - smoothstep_d(n, j - 1, x - h)) / (2.0 * h);
                    let an = smoothstep_d(n, j, x);
                    assert!(
                        (fd - an).abs() < 1e-5 * (1.0 + an.abs()),
                        "n={n} j={j} x={x}"
                    );
                }
            }
        }
    }
}
