//! Budgeted adaptive piecewise-polynomial approximation.
//!
//! The approximant starts from a single graph-capped piece covering the whole
//! domain and refines greedily: the piece with the worst local error is split,
//! either by carving a full box out from under the graph or by halving an
//! axis. Axes are compared through their boundary moduli, so refined pieces
//! converge to the graph-aligned aspect ratio of the partition cells; a
//! width jump of `2^{-n}` per axis is realized as a run of single halvings,
//! which keeps every intermediate state within the piece budget.

use alloc::vec::Vec;

use crate::domain::DomainSpec;
use crate::fields::Field;
use crate::fmath;
use crate::poly::{
    cell_error, default_quad_order, project_cell, LqExponent, PiecewisePoly, PolyError, Region,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ApproxError {
    #[error("piece budget must be >= 1")]
    BudgetRange,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone)]
pub struct ApproxOptions {
    /// Gauss order per axis; 0 picks `max(2r, 8)`.
    pub quad_order: usize,
    /// Grid density per axis for `q = infinity` errors.
    pub sup_grid: usize,
    /// Record the error after every split.
    pub record_history: bool,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            quad_order: 0,
            sup_grid: 9,
            record_history: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApproxReport {
    pub pieces: usize,
    pub total_error: f64,
    /// The pieces follow the graph exactly, so no truncation fringe remains;
    /// kept in the report for interface parity.
    pub fringe_defect: f64,
    /// `(pieces, enveloped error)` after each split.
    pub history: Vec<(usize, f64)>,
}

struct Piece {
    region: Region,
    coeffs: Vec<f64>,
    error: f64,
    alive: bool,
    splittable: bool,
}

/// Greedy refinement of `f` over the domain into at most `budget` pieces.
///
/// `p` only enters through the caller's normalization of `f` (the scheme is
/// error-driven); `q` is the norm the per-piece errors and the total are
/// measured in. The returned error history is the running envelope, which is
/// non-increasing by construction.
pub fn adaptive_approximate(
    f: &dyn Field,
    dom: &DomainSpec,
    budget: usize,
    r: usize,
    _p: LqExponent,
    q: LqExponent,
    opts: &ApproxOptions,
) -> Result<(PiecewisePoly, ApproxReport), ApproxError> {
    q.validate()?;
    if budget < 1 {
        return Err(ApproxError::BudgetRange);
    }
    let quad = if opts.quad_order == 0 {
        default_quad_order(r)
    } else {
        opts.quad_order
    };
    let bd = dom.base_dim();

    let root = Region::Capped {
        lo: alloc::vec![0.0; bd],
        hi: alloc::vec![1.0; bd],
        bottom: 0.0,
        top: dom.psi_sup(),
    };
    let mut pieces: Vec<Piece> = Vec::new();
    let push = |pieces: &mut Vec<Piece>, region: Region| -> Result<(), ApproxError> {
        let coeffs = project_cell(f, &region, r, dom, quad)?;
        let error = cell_error(f, &coeffs, &region, r, q, dom, quad, opts.sup_grid)?;
        pieces.push(Piece {
            region,
            coeffs,
            error,
            alive: true,
            splittable: true,
        });
        Ok(())
    };
    push(&mut pieces, root)?;

    let total = |pieces: &[Piece]| -> f64 {
        match q {
            LqExponent::Inf => pieces
                .iter()
                .filter(|p| p.alive)
                .map(|p| p.error)
                .fold(0.0f64, f64::max),
            LqExponent::Fin(qv) => fmath::pow(
                pieces
                    .iter()
                    .filter(|p| p.alive)
                    .map(|p| fmath::pow(p.error, qv))
                    .sum::<f64>(),
                1.0 / qv,
            ),
        }
    };

    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut live = 1usize;
    let mut envelope = total(&pieces);
    if opts.record_history {
        history.push((live, envelope));
    }

    // below this the residual is quadrature noise, not approximation error
    const ERROR_FLOOR: f64 = 1e-13;
    while live < budget {
        // worst live splittable piece
        let mut worst: Option<usize> = None;
        for (i, p) in pieces.iter().enumerate() {
            if p.alive
                && p.splittable
                && p.error > ERROR_FLOOR
                && worst.map_or(true, |w: usize| p.error > pieces[w].error)
            {
                worst = Some(i);
            }
        }
        let Some(wi) = worst else { break };
        let Some(children) = split_region(&pieces[wi].region, dom) else {
            pieces[wi].splittable = false;
            continue;
        };
        pieces[wi].alive = false;
        for ch in children {
            push(&mut pieces, ch)?;
        }
        live = pieces.iter().filter(|p| p.alive).count();
        envelope = envelope.min(total(&pieces));
        if opts.record_history {
            history.push((live, envelope));
        }
    }

    let total_error = envelope.min(total(&pieces));
    let out = PiecewisePoly {
        r,
        pieces: pieces
            .into_iter()
            .filter(|p| p.alive)
            .map(|p| (p.region, p.coeffs))
            .collect(),
    };
    let report = ApproxReport {
        pieces: out.pieces.len(),
        total_error,
        fringe_defect: 0.0,
        history,
    };
    Ok((out, report))
}

/// Split a region in two, following the aspect discipline of the partition
/// cells: compare the vertical extent against the boundary-modulus scale of
/// each base width, refine whichever is coarsest.
fn split_region(region: &Region, dom: &DomainSpec) -> Option<Vec<Region>> {
    const MIN_WIDTH: f64 = 1e-12;
    match region {
        Region::Box { lo, hi } => {
            let d = lo.len();
            let mut scale = hi[d - 1] - lo[d - 1]; // vertical effective scale
            let mut axis = d - 1;
            for a in 0..d - 1 {
                let s = dom.moduli[a].inverse(hi[a] - lo[a]);
                if s > scale {
                    scale = s;
                    axis = a;
                }
            }
            if hi[axis] - lo[axis] < MIN_WIDTH {
                return None;
            }
            let mid = 0.5 * (lo[axis] + hi[axis]);
            let mut h1 = hi.clone();
            h1[axis] = mid;
            let mut l2 = lo.clone();
            l2[axis] = mid;
            Some(alloc::vec![
                Region::Box {
                    lo: lo.clone(),
                    hi: h1
                },
                Region::Box {
                    lo: l2,
                    hi: hi.clone()
                },
            ])
        }
        Region::Capped {
            lo,
            hi,
            bottom,
            top,
        } => {
            let k = lo.len();
            let mut base_scale = 0.0f64;
            let mut axis = 0usize;
            for a in 0..k {
                let s = dom.moduli[a].inverse(hi[a] - lo[a]);
                if s > base_scale {
                    base_scale = s;
                    axis = a;
                }
            }
            let inf_tol = (0..k).map(|a| hi[a] - lo[a]).fold(f64::INFINITY, f64::min) / 8.0;
            let s = dom.psi_inf_box(lo, hi, inf_tol.max(1e-9));
            let gap = s - bottom;
            if gap > base_scale && gap > MIN_WIDTH {
                // carve a full box out from under the graph
                let mid = bottom + 0.5 * gap;
                let mut box_hi = hi.clone();
                box_hi.push(mid);
                let mut box_lo = lo.clone();
                box_lo.push(*bottom);
                Some(alloc::vec![
                    Region::Box {
                        lo: box_lo,
                        hi: box_hi
                    },
                    Region::Capped {
                        lo: lo.clone(),
                        hi: hi.clone(),
                        bottom: mid,
                        top: *top
                    },
                ])
            } else {
                if hi[axis] - lo[axis] < MIN_WIDTH {
                    return None;
                }
                let mid = 0.5 * (lo[axis] + hi[axis]);
                let mut h1 = hi.clone();
                h1[axis] = mid;
                let mut l2 = lo.clone();
                l2[axis] = mid;
                Some(alloc::vec![
                    Region::Capped {
                        lo: lo.clone(),
                        hi: h1,
                        bottom: *bottom,
                        top: *top
                    },
                    Region::Capped {
                        lo: l2,
                        hi: hi.clone(),
                        bottom: *bottom,
                        top: *top
                    },
                ])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoundaryModulus;
    use crate::empirics::fit_rate;
    use crate::fields::{ConstField, CoordField, CuspAligned, CuspProfile};
    use crate::hset::{HSet, HSetKind};
    use crate::poly::lq_norm;

    fn const_domain() -> DomainSpec {
        DomainSpec::constant(2, 2.0, alloc::vec![BoundaryModulus::power(1.0, 1.0)]).unwrap()
    }

    #[test]
    fn budget_one_is_global_projection() {
        let dom = const_domain();
        let f = CoordField { axis: 1, dim: 2 };
        let (pp, report) = adaptive_approximate(
            &f,
            &dom,
            1,
            1,
            LqExponent::Fin(2.0),
            LqExponent::Fin(2.0),
            &ApproxOptions::default(),
        )
        .unwrap();
        assert_eq!(report.pieces, 1);
        assert_eq!(pp.pieces.len(), 1);
        // psi == 2: the single capped piece is the box (0,1)x(0,2); the best
        // constant for x_d is 1 and the residual is sqrt(2/3)
        let expect = (2.0f64 / 3.0).sqrt();
        assert!(
            (report.total_error - expect).abs() < 1e-10,
            "{}",
            report.total_error
        );
        assert_eq!(report.fringe_defect, 0.0);
    }

    #[test]
    fn zero_budget_rejected_and_constants_are_free() {
        let dom = const_domain();
        let f = ConstField { value: 3.0, dim: 2 };
        assert_eq!(
            adaptive_approximate(
                &f,
                &dom,
                0,
                1,
                LqExponent::Fin(2.0),
                LqExponent::Fin(2.0),
                &ApproxOptions::default()
            )
            .unwrap_err(),
            ApproxError::BudgetRange
        );
        let (_, report) = adaptive_approximate(
            &f,
            &dom,
            16,
            1,
            LqExponent::Fin(2.0),
            LqExponent::Fin(2.0),
            &ApproxOptions::default(),
        )
        .unwrap();
        // nothing to refine: a constant is reproduced by the first piece
        assert_eq!(report.pieces, 1);
        assert!(report.total_error < 1e-12);
    }

    #[test]
    fn error_envelope_non_increasing() {
        let dom = const_domain();
        let f = CuspAligned {
            dom: &dom,
            profile: CuspProfile::BoundaryLayer { order: 2 },
        };
        let (_, report) = adaptive_approximate(
            &f,
            &dom,
            64,
            1,
            LqExponent::Fin(2.0),
            LqExponent::Fin(2.0),
            &ApproxOptions::default(),
        )
        .unwrap();
        for w in report.history.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-15);
        }
        assert!(report.total_error < report.history[0].1);
    }

    #[test]
    fn cusp_domain_rate_smoke() {
        // d=2, sigma=3 h-set cusp; a boundary-layer field must decay with a
        // slope comfortably below the -1/3 + 0.15 ceiling even at small n
        let h = HSet::build(0.5, 2, 16, HSetKind::Cantor).unwrap();
        let dom = DomainSpec::hset_cusp(2, 3.0, h, 0.0).unwrap();
        let f = CuspAligned {
            dom: &dom,
            profile: CuspProfile::BoundaryLayer { order: 2 },
        };
        let norm = lq_norm(
            &f,
            &[Region::Capped {
                lo: alloc::vec![0.0],
                hi: alloc::vec![1.0],
                bottom: 0.0,
                top: 2.0,
            }],
            LqExponent::Fin(2.0),
            &dom,
            8,
            8,
        )
        .unwrap();
        assert!(norm > 0.1);
        let (_, report) = adaptive_approximate(
            &f,
            &dom,
            256,
            1,
            LqExponent::Fin(2.0),
            LqExponent::Fin(2.0),
            &ApproxOptions::default(),
        )
        .unwrap();
        let pts: Vec<(f64, f64)> = report
            .history
            .iter()
            .filter(|(n, e)| [16usize, 32, 64, 128, 256].contains(n) && *e > 0.0)
            .map(|(n, e)| (*n as f64, *e))
            .collect();
        assert!(pts.len() >= 4, "history too sparse: {} points", pts.len());
        let fit = fit_rate(&pts).unwrap();
        assert!(fit.slope <= -1.0 / 3.0 + 0.15, "slope {}", fit.slope);
    }
}
