//! Desk-scale empirical verification: spike families concentrated at the
//! cusp tip with their norm scaling, SVD-based widths of p = q = 2
//! discretizations, and log-log slope fitting.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix};

use crate::domain::{DomainSpec, PsiSpec};
use crate::fields::{smoothstep, smoothstep_d, Field};
use crate::fmath;
use crate::hset::{CtorCell, HSet, HSetKind};
use crate::quad::{shifted_legendre, shifted_legendre_d, GaussRule};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EmpiricsError {
    #[error("domain must be an h-set cusp over a Cantor-type set")]
    NotCantorCusp,
    #[error("level {k} too deep for the stored construction (depth {depth})")]
    TooDeep { k: u32, depth: u32 },
    #[error("ramp smoothness order {order} below the requested derivative {r}")]
    RampOrder { order: u32, r: u32 },
    #[error("need at least 4 samples with positive values and increasing n")]
    FitData,
    #[error("discretization exceeds the size limit ({0} dofs)")]
    TooLarge(usize),
    #[error("degree parameter out of range")]
    BadDegree,
}

/// Family of disjointly supported spikes, one per level-`k` construction
/// cell, ramping from 0 at height `b_k` to 1 near the graph top.
#[derive(Debug, Clone)]
pub struct BumpFamily {
    pub level: u32,
    pub count: u64,
    pub b_k: f64,
    /// Ramp order: the profile has this many vanishing derivatives at the
    /// ends of its transition zone.
    pub order: u32,
    pub sigma: f64,
    pub cells: Vec<CtorCell>,
}

impl BumpFamily {
    pub fn field<'a>(&'a self, dom: &'a DomainSpec, j: usize) -> BumpField<'a> {
        BumpField {
            family: self,
            dom,
            j,
        }
    }

    /// Ramp value at height `t`.
    pub fn ramp(&self, t: f64) -> f64 {
        let u = 2.0 * (t - self.b_k) / (2.0 - self.b_k);
        smoothstep(self.order, 2.0 * u - 1.0)
    }

    /// `r`-th derivative of the ramp at height `t`.
    pub fn ramp_d(&self, r: u32, t: f64) -> f64 {
        let scale = 4.0 / (2.0 - self.b_k);
        let u = 2.0 * (t - self.b_k) / (2.0 - self.b_k);
        smoothstep_d(self.order, r, 2.0 * u - 1.0) * fmath::powi(scale, r as i32)
    }

    /// Transition zone of the ramp: below `lo` the spike vanishes, above
    /// `hi` it is identically 1.
    pub fn ramp_zone(&self) -> (f64, f64) {
        let h = 2.0 - self.b_k;
        (self.b_k + h / 4.0, self.b_k + h / 2.0)
    }
}

/// One member of the family as a scalar field (zero outside its support).
pub struct BumpField<'a> {
    family: &'a BumpFamily,
    dom: &'a DomainSpec,
    j: usize,
}

impl<'a> Field for BumpField<'a> {
    fn dim(&self) -> usize {
        self.dom.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        let cell = &self.family.cells[self.j];
        let k = self.dom.dim - 1;
        let half = 0.5 * cell_side(self.dom, cell);
        for a in 0..k {
            if fmath::abs(x[a] - cell.center[a]) > half {
                return 0.0;
            }
        }
        if x[k] <= self.family.b_k {
            return 0.0;
        }
        self.family.ramp(x[k])
    }
}

fn cell_side(dom: &DomainSpec, cell: &CtorCell) -> f64 {
    let h = dom.hset().expect("cantor cusp domain");
    h.cell_side(cell.level)
}

fn cantor_of(dom: &DomainSpec) -> Result<(&HSet, f64), EmpiricsError> {
    match &dom.psi {
        PsiSpec::HsetCusp { sigma, hset } if hset.kind == HSetKind::Cantor => Ok((hset, *sigma)),
        _ => Err(EmpiricsError::NotCantorCusp),
    }
}

/// Build the level-`k` spike family for a Cantor cusp domain.
///
/// The threshold `b_k` is the midpoint between the largest graph value on
/// any cell boundary and the graph top: the construction keeps cell
/// boundaries at least `lambda^k (1/m - lambda)/2` away from the set, which
/// pins that largest value explicitly.
pub fn bump_family(dom: &DomainSpec, k: u32, order: u32) -> Result<BumpFamily, EmpiricsError> {
    let (hset, sigma) = cantor_of(dom)?;
    if k + 1 > hset.depth {
        return Err(EmpiricsError::TooDeep {
            k,
            depth: hset.depth,
        });
    }
    let lam = hset.lambda;
    let m = hset.m as f64;
    let d_min = fmath::powi(lam, k as i32) * (1.0 / m - lam) / 2.0;
    let b_k = 2.0 - fmath::pow(d_min, 1.0 / sigma) / 2.0;
    let cells = hset
        .level_cells(k, 1 << 22)
        .map_err(|_| EmpiricsError::TooDeep {
            k,
            depth: hset.depth,
        })?;
    Ok(BumpFamily {
        level: k,
        count: cells.len() as u64,
        b_k,
        order,
        sigma,
        cells,
    })
}

#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub k: u32,
    pub count: u64,
    pub b_k: f64,
    /// `|| d^r/dx_d^r spike ||_p` over the domain (the only non-zero
    /// component of the order-r gradient).
    pub grad_lp: f64,
    pub val_lq: f64,
    pub val_lp: f64,
    /// `Lq` size of the gradient-normalized spike.
    pub separation: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Fitted slopes of `log_m norm` per construction level.
    pub grad_slope: f64,
    pub grad_slope_predicted: f64,
    pub val_slope: f64,
    pub val_slope_predicted: f64,
    /// Fitted slope of `ln separation` against `ln(family size)`.
    pub packing_slope: f64,
    pub packing_slope_predicted: f64,
}

/// Measure the `Lp`/`Lq` scaling of the spike family across levels and fit
/// the per-level slopes. Supports are congruent under the construction's
/// similarity maps, so one representative per level is integrated.
pub fn norm_scaling(
    dom: &DomainSpec,
    k_range: core::ops::RangeInclusive<u32>,
    p: f64,
    q: f64,
    r: u32,
) -> Result<ScalingReport, EmpiricsError> {
    let (hset, sigma) = cantor_of(dom)?;
    let order = r + 1;
    if r > order {
        return Err(EmpiricsError::RampOrder { order, r });
    }
    let theta = hset.theta;
    let dm1 = hset.ambient_dim as f64;
    let mut rows = Vec::new();
    for k in k_range.clone() {
        let fam = bump_family(dom, k, order)?;
        let cell = fam.cells[0];
        let (grad, vq, vp) = bump_norms(dom, &fam, &cell, p, q, r);
        rows.push(ScalingRow {
            k,
            count: fam.count,
            b_k: fam.b_k,
            grad_lp: grad,
            val_lq: vq,
            val_lp: vp,
            separation: vq / grad,
        });
    }
    let lnm = fmath::ln(hset.m as f64);
    let fit_logm = |sel: &dyn Fn(&ScalingRow) -> f64| -> Result<f64, EmpiricsError> {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|row| (fmath::exp(row.k as f64), sel(row)))
            .collect();
        // ln(norm) against k = ln(x); convert to log_m per level
        Ok(fit_rate(&pts)?.slope / lnm)
    };
    let grad_slope = fit_logm(&|row| row.grad_lp)?;
    let val_slope = fit_logm(&|row| row.val_lq)?;
    let sep_pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|row| (row.count as f64, row.separation))
        .collect();
    let packing_slope = fit_rate(&sep_pts)?.slope;

    let s1 = sigma * dm1 + 1.0;
    Ok(ScalingReport {
        rows,
        grad_slope,
        grad_slope_predicted: dm1 * (r as f64 - s1 / p) / (theta * sigma),
        val_slope,
        val_slope_predicted: -dm1 * (s1 / q) / (theta * sigma),
        packing_slope,
        packing_slope_predicted: -(r as f64 + s1 * (1.0 / q - 1.0 / p)) / (sigma * theta),
    })
}

/// Norms of one spike by composite quadrature: a uniform base grid over its
/// cell (the graph only varies at the construction scales) and an exact
/// Gauss rule along each column.
fn bump_norms(
    dom: &DomainSpec,
    fam: &BumpFamily,
    cell: &CtorCell,
    p: f64,
    q: f64,
    r: u32,
) -> (f64, f64, f64) {
    const BASE_GRID: usize = 48;
    let rule = GaussRule::new(16);
    let k = dom.dim - 1;
    let side = cell_side(dom, cell);
    let step = side / BASE_GRID as f64;
    let area = fmath::powi(step, k as i32);
    let (t0, t1) = fam.ramp_zone();
    let mut acc_grad = 0.0;
    let mut acc_vq = 0.0;
    let mut acc_vp = 0.0;
    let mut idx = [0usize; 3];
    let counts = [BASE_GRID; 3];
    loop {
        let mut xp = [0.0f64; 3];
        for a in 0..k {
            xp[a] = cell.center[a] - side / 2.0 + (idx[a] as f64 + 0.5) * step;
        }
        let psi = dom.psi_unchecked(&xp[..k]);
        if psi > t0 {
            let hi = psi.min(t1);
            // transition zone of the ramp
            for (node, w) in rule.nodes.iter().zip(&rule.weights) {
                let t = t0 + (hi - t0) * node;
                let wgt = w * (hi - t0) * area;
                acc_grad += wgt * fmath::pow(fmath::abs(fam.ramp_d(r, t)), p);
                let v = fam.ramp(t);
                acc_vq += wgt * fmath::pow(v, q);
                acc_vp += wgt * fmath::pow(v, p);
            }
            // saturated part: the spike is identically 1 up to the graph
            if psi > t1 {
                acc_vq += (psi - t1) * area;
                acc_vp += (psi - t1) * area;
            }
        }
        // advance base index
        let mut a = 0;
        while a < k {
            idx[a] += 1;
            if idx[a] < counts[a] {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
        if idx[..k].iter().all(|&v| v == 0) {
            break;
        }
    }
    (
        fmath::pow(acc_grad, 1.0 / p),
        fmath::pow(acc_vq, 1.0 / q),
        fmath::pow(acc_vp, 1.0 / p),
    )
}

#[derive(Debug, Clone, Copy)]
pub struct WidthEstimate {
    pub n: usize,
    pub value: f64,
}

/// Widths of the ellipsoid with the given semi-axes: the `(n+1)`-th largest
/// axis, zero once the index passes the rank.
pub fn ellipsoid_widths(semi_axes: &[f64]) -> Vec<WidthEstimate> {
    let mut s: Vec<f64> = semi_axes.to_vec();
    s.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    (0..=s.len())
        .map(|n| WidthEstimate {
            n,
            value: if n < s.len() { s[n] } else { 0.0 },
        })
        .collect()
}

pub const MAX_WIDTH_DOFS: usize = 4096;

/// Widths of the unit ball of the 1-D first-order Sobolev space discretized
/// with `m` hat elements, measured in L2: singular values of the sampled
/// evaluation map with Sobolev-normalized coefficients. The classical decay
/// is `d_n ~ 1/(pi n)`.
pub fn interval_widths(m: usize) -> Result<Vec<WidthEstimate>, EmpiricsError> {
    let dofs = m + 1;
    if dofs > MAX_WIDTH_DOFS {
        return Err(EmpiricsError::TooLarge(dofs));
    }
    let h = 1.0 / m as f64;
    // H1 Gram (stiffness + mass) of the hat basis
    let mut w = DMatrix::<f64>::zeros(dofs, dofs);
    for e in 0..m {
        let (i, j) = (e, e + 1);
        let s = 1.0 / h;
        let mloc = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
        w[(i, i)] += s + mloc[0][0];
        w[(j, j)] += s + mloc[1][1];
        w[(i, j)] += -s + mloc[0][1];
        w[(j, i)] += -s + mloc[1][0];
    }
    // evaluation map on a 2-point Gauss grid per element, rows scaled by
    // sqrt(weight) so that A^T A is exactly the L2 Gram
    let g2 = GaussRule::new(2);
    let mut a = DMatrix::<f64>::zeros(2 * m, dofs);
    for e in 0..m {
        for (gi, (node, wq)) in g2.nodes.iter().zip(&g2.weights).enumerate() {
            let row = 2 * e + gi;
            let sw = fmath::sqrt(wq * h);
            a[(row, e)] = sw * (1.0 - node);
            a[(row, e + 1)] = sw * node;
        }
    }
    let chol = Cholesky::new(w).ok_or(EmpiricsError::TooLarge(dofs))?;
    // scale columns: G = A L^{-T}
    let linv_t = chol
        .l()
        .transpose()
        .try_inverse()
        .ok_or(EmpiricsError::TooLarge(dofs))?;
    let gmat = &a * linv_t;
    let svd = gmat.svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().cloned().collect();
    s.sort_unstable_by(|x, y| y.partial_cmp(x).unwrap());
    Ok((0..s.len())
        .map(|n| WidthEstimate { n, value: s[n] })
        .collect())
}

/// Widths of a broken piecewise-polynomial discretization over the cells of
/// a materialized partition tree (finest level), with the first-order
/// Sobolev surrogate norm on coefficients. Desk-scale only.
pub fn svd_widths_tree(
    tree: &crate::partition::PartitionTree,
    r: usize,
    quad_order: usize,
    n_max: usize,
) -> Result<Vec<WidthEstimate>, EmpiricsError> {
    if r < 1 || r > 3 {
        return Err(EmpiricsError::BadDegree);
    }
    let bd = tree.base_dim();
    let d = bd + 1;
    let cells = &tree.levels[tree.max_level as usize];
    let per_cell = r.pow(d as u32);
    let dofs = cells.len() * per_cell;
    if dofs > MAX_WIDTH_DOFS {
        return Err(EmpiricsError::TooLarge(dofs));
    }
    let rule = GaussRule::new(quad_order.max(r + 1));
    let npts = rule.len().pow(d as u32);
    let mut a = DMatrix::<f64>::zeros(cells.len() * npts, dofs);
    let mut w = DMatrix::<f64>::zeros(dofs, dofs);
    let mut degrees = alloc::vec![[0usize; 4]; per_cell];
    for (j, deg) in degrees.iter_mut().enumerate() {
        let mut v = j;
        for a in 0..d {
            deg[a] = v % r;
            v /= r;
        }
    }
    for (ci, cell) in cells.iter().enumerate() {
        let (lo, hi) = tree.base_box(cell);
        let mut widths = [0.0f64; 4];
        for ax in 0..bd {
            widths[ax] = hi[ax] - lo[ax];
        }
        widths[bd] = cell.c_plus - cell.c_minus;
        let vol: f64 = widths[..d].iter().product();
        // tensor quadrature over the cell
        let mut idx = alloc::vec![0usize; d];
        let mut row = ci * npts;
        loop {
            let mut u = [0.0f64; 4];
            let mut wq = vol;
            for ax in 0..d {
                u[ax] = rule.nodes[idx[ax]];
                wq *= rule.weights[idx[ax]];
            }
            let sw = fmath::sqrt(wq);
            for (j, deg) in degrees.iter().enumerate() {
                let mut val = 1.0;
                for ax in 0..d {
                    val *= shifted_legendre(deg[ax], u[ax]);
                }
                a[(row, ci * per_cell + j)] = sw * val;
                // Sobolev surrogate: L2 + first derivatives
                for (j2, deg2) in degrees.iter().enumerate().skip(j) {
                    let mut val2 = 1.0;
                    for ax in 0..d {
                        val2 *= shifted_legendre(deg2[ax], u[ax]);
                    }
                    let mut grad = 0.0;
                    for gax in 0..d {
                        let mut da = 1.0;
                        let mut db = 1.0;
                        for ax in 0..d {
                            if ax == gax {
                                da *= shifted_legendre_d(deg[ax], u[ax]) / widths[ax];
                                db *= shifted_legendre_d(deg2[ax], u[ax]) / widths[ax];
                            } else {
                                da *= shifted_legendre(deg[ax], u[ax]);
                                db *= shifted_legendre(deg2[ax], u[ax]);
                            }
                        }
                        grad += da * db;
                    }
                    let contrib = wq * (val * val2 + grad);
                    w[(ci * per_cell + j, ci * per_cell + j2)] += contrib;
                    if j2 != j {
                        w[(ci * per_cell + j2, ci * per_cell + j)] += contrib;
                    }
                }
            }
            row += 1;
            let mut ax = 0;
            while ax < d {
                idx[ax] += 1;
                if idx[ax] < rule.len() {
                    break;
                }
                idx[ax] = 0;
                ax += 1;
            }
            if idx.iter().all(|&v| v == 0) {
                break;
            }
        }
    }
    let chol = Cholesky::new(w).ok_or(EmpiricsError::TooLarge(dofs))?;
    let linv_t = chol
        .l()
        .transpose()
        .try_inverse()
        .ok_or(EmpiricsError::TooLarge(dofs))?;
    let gmat = &a * linv_t;
    let svd = gmat.svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().cloned().collect();
    s.sort_unstable_by(|x, y| y.partial_cmp(x).unwrap());
    s.truncate(n_max + 1);
    Ok((0..s.len())
        .map(|n| WidthEstimate { n, value: s[n] })
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

/// Least-squares slope of `ln e` against `ln n`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit, EmpiricsError> {
    if points.len() < 4 {
        return Err(EmpiricsError::FitData);
    }
    let mut prev = 0.0;
    for &(n, e) in points {
        if !(n > prev && e > 0.0 && e.is_finite()) {
            return Err(EmpiricsError::FitData);
        }
        prev = n;
    }
    let m = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(n, e) in points {
        let x = fmath::ln(n);
        let y = fmath::ln(e);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let intercept = (sy - slope * sx) / m;
    let mut max_residual = 0.0f64;
    for &(n, e) in points {
        let pred = intercept + slope * fmath::ln(n);
        max_residual = max_residual.max(fmath::abs(fmath::ln(e) - pred));
    }
    Ok(RateFit {
        slope,
        intercept,
        max_residual,
    })
}
