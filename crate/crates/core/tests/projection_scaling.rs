//! Scaling of the cell projections over whole subtree columns: projecting on
//! the level-k0 cell and measuring the residual over everything above it
//! must track `2^{-k0(r + 1/q - 1/p)} (prod phi_i(2^{-k0}))^{1/q-1/p}` times
//! the gradient norm, with a bounded constant across levels.

use cuspidal_core::domain::{BoundaryModulus, DomainSpec};
use cuspidal_core::fields::{smoothstep, smoothstep_d, Field};
use cuspidal_core::partition::{build_tree, BuildLimits};
use cuspidal_core::poly::{eval_poly, lq_norm, project_cell, LqExponent, Region};

struct Ramp;

impl Field for Ramp {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64]) -> f64 {
        smoothstep(2, x[1] / 2.0)
    }
}

struct RampSlope;

impl Field for RampSlope {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64]) -> f64 {
        smoothstep_d(2, 1, x[1] / 2.0) / 2.0
    }
}

struct Residual<'a> {
    coeffs: &'a [f64],
    region: &'a Region,
}

impl<'a> Field for Residual<'a> {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64]) -> f64 {
        Ramp.eval(x) - eval_poly(self.coeffs, self.region, 1, x)
    }
}

#[test]
fn subtree_projection_ratio_bounded() {
    let modulus = BoundaryModulus::power(2.0, 1.0);
    let dom = DomainSpec::constant(2, 2.0, vec![modulus]).unwrap();
    let tree = build_tree(&dom, 6, &BuildLimits::default()).unwrap();
    let r = 1usize;

    for (p, q) in [(2.0f64, 2.0f64), (2.0, 4.0)] {
        let mut ratios = Vec::new();
        for k0 in 0..=6usize {
            // the cell whose base contains x' = 0.3
            let n = tree.resolutions[k0][0];
            let gx = ((0.3 * (1u64 << n) as f64) as u64).min((1u64 << n) - 1);
            let cell = tree.levels[k0]
                .iter()
                .find(|c| c.grid[0] == gx)
                .expect("cell containing 0.3");
            let (lo, hi) = tree.base_box(cell);
            let cell_region = Region::Box {
                lo: vec![lo[0], cell.c_minus],
                hi: vec![hi[0], cell.c_plus],
            };
            let column = Region::Capped {
                lo: vec![lo[0]],
                hi: vec![hi[0]],
                bottom: cell.c_minus,
                top: 2.0,
            };
            let coeffs = project_cell(&Ramp, &cell_region, r, &dom, 10).unwrap();
            let resid = lq_norm(
                &Residual {
                    coeffs: &coeffs,
                    region: &cell_region,
                },
                std::slice::from_ref(&column),
                LqExponent::Fin(q),
                &dom,
                10,
                8,
            )
            .unwrap();
            let grad = lq_norm(
                &RampSlope,
                std::slice::from_ref(&column),
                LqExponent::Fin(p),
                &dom,
                10,
                8,
            )
            .unwrap();
            let t = 2f64.powi(-(k0 as i32));
            let phi = t * t; // modulus t^2
            let scale = t.powf(r as f64 + 1.0 / q - 1.0 / p) * phi.powf(1.0 / q - 1.0 / p);
            let ratio = resid / (scale * grad);
            assert!(ratio.is_finite() && ratio > 0.0);
            ratios.push(ratio);
        }
        let max = ratios.iter().cloned().fold(0.0f64, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max <= 64.0, "p={p} q={q}: ratios {ratios:?}");
        println!(
            "projection scaling p={p} q={q}: ratio range [{min:.4}, {max:.4}] over levels 0..=6"
        );
    }
}
