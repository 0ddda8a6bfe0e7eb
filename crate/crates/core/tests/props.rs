//! Property tests for the structural invariants.

use cuspidal_core::domain::{BoundaryModulus, DomainSpec};
use cuspidal_core::empirics::ellipsoid_widths;
use cuspidal_core::hset::{HSet, HSetKind};
use cuspidal_core::partition::level_resolutions;
use cuspidal_core::rates::{entropy_exponents, rat, Ext, ParamSet, SlowVariation, WidthKind};
use cuspidal_core::treeop::WeightedTree;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The per-level resolution lands in its defining dyadic bracket
    /// (within the supported range n <= 52, i.e. sigma (k+3) well below it).
    #[test]
    fn resolution_bracket(sigma in 1.0f64..4.0, scale in 0.05f64..1.0, k in 0u32..8) {
        let m = BoundaryModulus::power(sigma, scale);
        let n = level_resolutions(&[m], k).unwrap()[0];
        let phi = m.eval(2f64.powi(-(k as i32) - 3)).unwrap();
        prop_assert!(2f64.powi(-(n as i32)) <= phi);
        prop_assert!(phi < 2f64.powi(-(n as i32) + 1));
    }

    /// Set distances are 1-Lipschitz in the l-infinity metric.
    #[test]
    fn hset_distance_lipschitz(
        theta in 0.4f64..1.6,
        x0 in 0.0f64..1.0, y0 in 0.0f64..1.0,
        x1 in 0.0f64..1.0, y1 in 0.0f64..1.0,
    ) {
        let h = HSet::build(theta, 3, 4, HSetKind::Cantor).unwrap();
        let da = h.distance(&[x0, y0]).value;
        let db = h.distance(&[x1, y1]).value;
        let step = (x0 - x1).abs().max((y0 - y1).abs());
        prop_assert!((da - db).abs() <= step + 1e-12);
    }

    /// Membership is monotone in the vertical coordinate.
    #[test]
    fn contains_monotone_in_height(x in 0.001f64..0.999, s in 0.0f64..2.0, frac in 0.0f64..1.0) {
        let h = HSet::build(0.5, 2, 6, HSetKind::Cantor).unwrap();
        let dom = DomainSpec::hset_cusp(2, 2.0, h, 0.0).unwrap();
        if dom.contains(&[x, s]) {
            let lower = s * frac;
            if lower > 0.0 {
                prop_assert!(dom.contains(&[x, lower]));
            }
        }
    }

    /// The summation operator scales linearly with its input.
    #[test]
    fn summation_homogeneous(seed in 0u64..1000, c in 0.25f64..4.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..10usize);
        let mut parents = vec![-1i64];
        for i in 1..n {
            parents.push(rng.random_range(0..i) as i64);
        }
        let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let t = WeightedTree::new(&parents, g, v).unwrap();
        let f: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let fc: Vec<f64> = f.iter().map(|x| c * x).collect();
        let a = t.apply(&fc);
        let b = t.apply(&f);
        for (ai, bi) in a.iter().zip(&b) {
            prop_assert!((ai - c * bi).abs() <= 1e-12 * ai.abs().max(1.0));
        }
    }

    /// Ellipsoid widths are non-increasing whatever the axes.
    #[test]
    fn widths_monotone(axes in proptest::collection::vec(0.0f64..10.0, 1..12)) {
        let w = ellipsoid_widths(&axes);
        for pair in w.windows(2) {
            prop_assert!(pair[1].value <= pair[0].value);
        }
    }

    /// The entropy exponent is exactly the smaller candidate, in exact
    /// rational arithmetic.
    #[test]
    fn entropy_exponent_is_min(
        pn in 2i64..12, qd in 0i64..6, r in 1u32..5, d in 2u32..5, sn in 1i64..5,
    ) {
        let p = rat(pn, 2).max(rat(1, 1));
        let q = p + rat(qd, 3);
        let ps = ParamSet {
            p: Ext::Fin(p),
            q: Ext::Fin(q),
            r,
            d,
            sigma: rat(sn, 1),
            theta: None,
            width: WidthKind::Entropy,
            lambda: SlowVariation::Constant,
        };
        if let Ok(pred) = entropy_exponents(&ps) {
            let min = if pred.alpha1 < pred.alpha2 { pred.alpha1 } else { pred.alpha2 };
            prop_assert_eq!(pred.exponent, -min);
        }
    }
}
