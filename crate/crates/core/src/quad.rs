//! Gauss–Legendre quadrature on `[0,1]` and the orthonormal shifted
//! Legendre basis used by the local projections.

use alloc::vec::Vec;

use crate::fmath;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[0,1]`.
///
/// Exact for polynomials of degree `2n - 1`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be positive");
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        // Newton iteration on P_n over [-1,1], seeded with Chebyshev angles.
        for k in 0..n {
            let mut x = fmath::cos(core::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5));
            for _ in 0..100 {
                let (p, dp) = legendre_pair(n, x);
                let dx = p / dp;
                x -= dx;
                if fmath::abs(dx) < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_pair(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes.push(0.5 * (x + 1.0));
            weights.push(0.5 * w);
        }
        // Newton above walks the roots right-to-left; keep nodes ascending.
        nodes.reverse();
        weights.reverse();
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = hi - lo;
        if len <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(lo + x * len);
        }
        acc * len
    }
}

/// `(P_n(x), P_n'(x))` on `[-1,1]` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Value of the degree-`j` shifted Legendre polynomial on `[0,1]`,
/// normalized so the family is orthonormal in `L2([0,1])`.
pub fn shifted_legendre(j: usize, u: f64) -> f64 {
    let x = 2.0 * u - 1.0;
    let mut p0 = 1.0;
    let mut p1 = x;
    let p = match j {
        0 => 1.0,
        1 => x,
        _ => {
            for m in 2..=j {
                let mf = m as f64;
                let p2 = ((2.0 * mf - 1.0) * x * p1 - (mf - 1.0) * p0) / mf;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    p * fmath::sqrt(2.0 * j as f64 + 1.0)
}

/// Derivative of [`shifted_legendre`] with respect to `u`.
pub fn shifted_legendre_d(j: usize, u: f64) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let x = 2.0 * u - 1.0;
    // P_j'(x) from the pair recurrence, then chain rule (dx/du = 2).
    let (p, dp) = if fmath::abs(fmath::abs(x) - 1.0) < 1e-14 {
        // Endpoint limit: P_j'(±1) = ±^{j+1} j(j+1)/2.
        let s = if x > 0.0 {
            1.0
        } else {
            fmath::powi(-1.0, j as i32 + 1)
        };
        (0.0, s * j as f64 * (j as f64 + 1.0) / 2.0)
    } else {
        legendre_pair(j, x)
    };
    let _ = p;
    2.0 * dp * fmath::sqrt(2.0 * j as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        let rule = GaussRule::new(8);
        // degree 15 monomial over [0,1]
        let v = rule.integrate(0.0, 1.0, |x| fmath::powi(x, 15));
        assert!((v - 1.0 / 16.0).abs() < 1e-14, "got {v}");
        let v2 = rule.integrate(0.25, 0.75, |x| x * x);
        assert!((v2 - (0.75f64.powi(3) - 0.25f64.powi(3)) / 3.0).abs() < 1e-14);
    }

    #[test]
    fn shifted_legendre_orthonormal() {
        let rule = GaussRule::new(12);
        for a in 0..5 {
            for b in 0..5 {
                let v = rule.integrate(0.0, 1.0, |x| {
                    shifted_legendre(a, x) * shifted_legendre(b, x)
                });
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12, "({a},{b}) -> {v}");
            }
        }
    }

    #[test]
    fn shifted_legendre_derivative_matches_fd() {
        for j in 0..6 {
            for &u in &[0.12, 0.5, 0.88] {
                let h = 1e-6;
                let fd = (shifted_legendre(j, u + h) - shifted_legendre(j, u - h)) / (2.0 * h);
                let an = shifted_legendre_d(j, u);
                assert!((fd - an).abs() < 1e-5, "j={j} u={u}: {fd} vs {an}");
            }
        }
    }
}
