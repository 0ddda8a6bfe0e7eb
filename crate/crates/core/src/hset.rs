//! Fractal h-sets: self-similar Cantor-type sets with `h(t) = t^theta`
//! regularity, and axis-aligned coordinate slabs.
//!
//! A Cantor set is stored as its iterated-function-system data only; cells of
//! any construction level are generated on demand, so distance queries can
//! descend far below the declared `depth` cheaply. The set itself is
//! identified with its depth-`K` cell approximant `E_K`; every query reports
//! or respects the corresponding approximation radius `lambda^K`.

use alloc::vec::Vec;

use rand::Rng;

use crate::fmath;

pub const MAX_AMBIENT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum HSetKind {
    Cantor,
    Plane,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HSetError {
    #[error("theta={theta} outside the supported range {lo}..{hi} for this kind")]
    ThetaRange { theta: f64, lo: f64, hi: f64 },
    #[error("ambient dimension {0} unsupported (must be 1..={MAX_AMBIENT})")]
    AmbientDim(usize),
    #[error("depth must be at least 1")]
    Depth,
    #[error("plane slab dimension must be an integer in 1..=d-2")]
    PlaneTheta,
    #[error("level {level} would enumerate {cells} cells, above the limit {limit}")]
    TooManyCells {
        level: u32,
        cells: u128,
        limit: u128,
    },
    #[error("t={0} outside (0,1]")]
    TOutOfRange(f64),
}

/// One construction cube: the image of the base cube under a level-`level`
/// composition of the contraction maps. Side length is `lambda^level`.
#[derive(Debug, Clone, Copy)]
pub struct CtorCell {
    pub center: [f64; MAX_AMBIENT],
    pub level: u32,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct HSet {
    pub kind: HSetKind,
    /// Ambient dimension `k = d - 1`.
    pub ambient_dim: usize,
    pub theta: f64,
    /// Subdivision count per axis (Cantor only).
    pub m: u32,
    /// Contraction ratio per level (Cantor only); `lambda * m < 1`.
    pub lambda: f64,
    /// Construction levels retained; the approximant is `E_depth`.
    pub depth: u32,
    /// Two-sided regularity constant the set is checked against.
    pub c_star: f64,
    /// Plane only: number of free axes (the slab passes through 1/2 on the rest).
    pub slab_dim: usize,
}

impl HSet {
    /// Build either the self-similar Cantor set with `h(t) = t^theta` or the
    /// theta-dimensional coordinate slab through 1/2.
    ///
    /// For the Cantor kind, `m` is the smallest integer >= 2 such that
    /// `lambda = m^{-(d-1)/theta}` satisfies `lambda < 1/m`; the constant
    /// contraction makes the natural measure assign exactly `m^{-(d-1)k}`
    /// to every level-`k` cell.
    pub fn build(theta: f64, d: usize, depth: u32, kind: HSetKind) -> Result<HSet, HSetError> {
        let ambient = d
            .checked_sub(1)
            .filter(|&a| (1..=MAX_AMBIENT).contains(&a))
            .ok_or(HSetError::AmbientDim(d.wrapping_sub(1)))?;
        if depth == 0 {
            return Err(HSetError::Depth);
        }
        match kind {
            HSetKind::Cantor => {
                let hi = (d - 1) as f64;
                if !(theta > 0.0 && theta < hi) {
                    return Err(HSetError::ThetaRange { theta, lo: 0.0, hi });
                }
                let mut m = 2u32;
                let lambda = loop {
                    let lam = fmath::pow(m as f64, -(ambient as f64) / theta);
                    if lam < 1.0 / m as f64 {
                        break lam;
                    }
                    m += 1;
                    if m > 64 {
                        return Err(HSetError::ThetaRange { theta, lo: 0.0, hi });
                    }
                };
                Ok(HSet {
                    kind,
                    ambient_dim: ambient,
                    theta,
                    m,
                    lambda,
                    depth,
                    c_star: 8.0,
                    slab_dim: 0,
                })
            }
            HSetKind::Plane => {
                let t = theta as usize;
                if theta != t as f64 || t < 1 || t > d.saturating_sub(2) {
                    return Err(HSetError::PlaneTheta);
                }
                Ok(HSet {
                    kind,
                    ambient_dim: ambient,
                    theta,
                    m: 0,
                    lambda: 0.0,
                    depth,
                    c_star: 8.0,
                    slab_dim: t,
                })
            }
        }
    }

    /// Consistency of a possibly hand-written description (deserialization
    /// does not go through [`HSet::build`]).
    pub fn validate(&self) -> Result<(), HSetError> {
        if !(1..=MAX_AMBIENT).contains(&self.ambient_dim) {
            return Err(HSetError::AmbientDim(self.ambient_dim));
        }
        if self.depth == 0 {
            return Err(HSetError::Depth);
        }
        match self.kind {
            HSetKind::Cantor => {
                let hi = (self.ambient_dim + 1) as f64 - 1.0;
                if !(self.theta > 0.0 && self.theta < hi) {
                    return Err(HSetError::ThetaRange {
                        theta: self.theta,
                        lo: 0.0,
                        hi,
                    });
                }
                let lam_m = self.lambda * self.m as f64;
                if self.m < 2 || !(self.lambda > 0.0 && lam_m < 1.0) {
                    return Err(HSetError::ThetaRange {
                        theta: self.theta,
                        lo: 0.0,
                        hi,
                    });
                }
            }
            HSetKind::Plane => {
                if self.slab_dim < 1 || self.slab_dim > self.ambient_dim.saturating_sub(1) {
                    return Err(HSetError::PlaneTheta);
                }
            }
        }
        Ok(())
    }

    /// l-infinity radius within which the depth-`depth` approximant pins the set.
    pub fn approx_radius(&self) -> f64 {
        match self.kind {
            HSetKind::Cantor => fmath::powi(self.lambda, self.depth as i32),
            HSetKind::Plane => 0.0,
        }
    }

    pub fn root_cell(&self) -> CtorCell {
        CtorCell {
            center: [0.5; MAX_AMBIENT],
            level: 0,
        }
    }

    pub fn cell_side(&self, level: u32) -> f64 {
        fmath::powi(self.lambda, level as i32)
    }

    /// Mass the natural self-similar measure gives to one level-`level` cell.
    pub fn cell_mass(&self, level: u32) -> f64 {
        fmath::powi(
            1.0 / self.m as f64,
            (self.ambient_dim as u32 * level) as i32,
        )
    }

    /// Append the children of a construction cell without allocating; the
    /// descent loops run over millions of cells.
    pub fn children_into(&self, cell: &CtorCell, out: &mut Vec<CtorCell>) {
        let m = self.m as usize;
        let k = self.ambient_dim;
        let side = self.cell_side(cell.level);
        let mut idx = [0usize; MAX_AMBIENT];
        loop {
            let mut c = cell.center;
            for a in 0..k {
                c[a] += side * ((2 * idx[a] + 1) as f64 / (2 * m) as f64 - 0.5);
            }
            out.push(CtorCell {
                center: c,
                level: cell.level + 1,
            });
            let mut a = 0;
            loop {
                if a == k {
                    return;
                }
                idx[a] += 1;
                if idx[a] < m {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }

    pub fn children(&self, cell: &CtorCell) -> Vec<CtorCell> {
        let mut out = Vec::with_capacity((self.m as usize).pow(self.ambient_dim as u32));
        self.children_into(cell, &mut out);
        out
    }

    /// All construction cells of one level. Guarded: levels with more than
    /// `limit` cells are refused rather than enumerated.
    pub fn level_cells(&self, level: u32, limit: u128) -> Result<Vec<CtorCell>, HSetError> {
        let per_level = (self.m as u128).pow(self.ambient_dim as u32);
        let count = per_level
            .checked_pow(0)
            .map(|_| per_level.pow(level.min(40)))
            .unwrap_or(u128::MAX);
        if count > limit {
            return Err(HSetError::TooManyCells {
                level,
                cells: count,
                limit,
            });
        }
        let mut cells = alloc::vec![self.root_cell()];
        for _ in 0..level {
            let mut next = Vec::with_capacity(cells.len() * per_level as usize);
            for c in &cells {
                next.extend(self.children(c));
            }
            cells = next;
        }
        Ok(cells)
    }

    /// A uniformly random depth-level cell, drawn by a random digit chain.
    pub fn random_leaf(&self, rng: &mut impl Rng) -> CtorCell {
        let mut cell = self.root_cell();
        let per_level = (self.m as usize).pow(self.ambient_dim as u32);
        for _ in 0..self.depth {
            let kids = self.children(&cell);
            cell = kids[rng.random_range(0..per_level)];
        }
        cell
    }

    pub fn geometry(&self) -> GammaGeometry<'_> {
        match self.kind {
            HSetKind::Cantor => GammaGeometry::Cantor(self),
            HSetKind::Plane => GammaGeometry::Plane {
                free: self.slab_dim,
                ambient: self.ambient_dim,
            },
        }
    }

    /// l-infinity distance from `x` to the depth-`depth` approximant, plus
    /// the approximation radius against the limit set.
    pub fn distance(&self, x: &[f64]) -> DistanceResult {
        let g = self.geometry();
        DistanceResult {
            value: g.point_dist(x),
            approx_radius: self.approx_radius(),
        }
    }

    /// Two-sided regularity of the natural measure: ratios
    /// `mu(B_t(x)) / t^theta` over sampled set points and the given radii.
    pub fn regularity_check(
        &self,
        samples: usize,
        t_grid: &[f64],
        rng: &mut impl Rng,
    ) -> Result<RegularityReport, HSetError> {
        for &t in t_grid {
            if !(t > 0.0 && t <= 1.0) {
                return Err(HSetError::TOutOfRange(t));
            }
        }
        let mut ratio_max = 0.0f64;
        let mut ratio_min = f64::INFINITY;
        match self.kind {
            HSetKind::Cantor => {
                for _ in 0..samples {
                    let leaf = self.random_leaf(rng);
                    let x = leaf.center;
                    for &t in t_grid {
                        let mu = self.ball_mass(&x, t);
                        let ratio = mu / fmath::pow(t, self.theta);
                        ratio_max = ratio_max.max(ratio);
                        ratio_min = ratio_min.min(ratio);
                    }
                }
            }
            HSetKind::Plane => {
                // mu = slab_dim-dimensional Lebesgue measure on the slab;
                // the ball section is a product of clipped intervals.
                for _ in 0..samples {
                    let mut x = [0.5; MAX_AMBIENT];
                    for a in 0..self.slab_dim {
                        x[a] = rng.random::<f64>();
                    }
                    for &t in t_grid {
                        let mut mu = 1.0;
                        for a in 0..self.slab_dim {
                            let lo = (x[a] - t).max(0.0);
                            let hi = (x[a] + t).min(1.0);
                            mu *= (hi - lo).max(0.0);
                        }
                        let ratio = mu / fmath::pow(t, self.theta);
                        ratio_max = ratio_max.max(ratio);
                        ratio_min = ratio_min.min(ratio);
                    }
                }
            }
        }
        Ok(RegularityReport {
            ratio_max,
            ratio_min,
            pass: ratio_max <= self.c_star && ratio_min >= 1.0 / self.c_star,
        })
    }

    /// Exact mass of the closed l-infinity ball under the natural measure of
    /// the depth-`depth` approximant, by pruned descent over the
    /// construction tree.
    pub fn ball_mass(&self, x: &[f64; MAX_AMBIENT], t: f64) -> f64 {
        debug_assert_eq!(self.kind, HSetKind::Cantor);
        let mut mass = 0.0;
        let mut stack = alloc::vec![self.root_cell()];
        while let Some(cell) = stack.pop() {
            let half = 0.5 * self.cell_side(cell.level);
            let mut gap = 0.0f64;
            let mut reach = 0.0f64;
            for a in 0..self.ambient_dim {
                let d = fmath::abs(x[a] - cell.center[a]);
                gap = gap.max(d - half);
                reach = reach.max(d + half);
            }
            if gap > t {
                continue; // disjoint from the ball
            }
            if reach <= t || cell.level == self.depth {
                // fully inside, or leaf that intersects
                mass += self.cell_mass(cell.level);
                continue;
            }
            self.children_into(&cell, &mut stack);
        }
        mass
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DistanceResult {
    pub value: f64,
    /// Worst-case gap between the reported value and the distance to the
    /// limit set.
    pub approx_radius: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RegularityReport {
    pub ratio_max: f64,
    pub ratio_min: f64,
    pub pass: bool,
}

/// Distance oracle against the set approximant, dispatching on kind so the
/// hot paths stay monomorphic.
///
/// The constant-ratio construction is an exact product of identical 1-D
/// Cantor sets, and the l-infinity distance to a product set splits by
/// axis: `dist(x, C x C) = max_a dist(x_a, C)`. All box and point queries
/// below reduce to cheap 1-D descents through that identity.
#[derive(Clone, Copy)]
pub enum GammaGeometry<'a> {
    Cantor(&'a HSet),
    Plane { free: usize, ambient: usize },
}

/// The common 1-D factor of the product construction.
#[derive(Clone, Copy)]
struct Axis {
    m: usize,
    lambda: f64,
    depth: u32,
}

impl Axis {
    #[inline]
    fn child_center(&self, center: f64, side: f64, t: usize) -> f64 {
        center + side * ((2 * t + 1) as f64 / (2 * self.m) as f64 - 0.5)
    }

    /// Exact distance from a point to the 1-D approximant.
    fn point_dist(&self, x: f64) -> f64 {
        self.interval_min(x, x)
    }

    /// Exact distance from a closed interval to the 1-D approximant.
    fn interval_min(&self, lo: f64, hi: f64) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack: Vec<(f64, f64, u32)> = Vec::with_capacity(4 * self.depth as usize + 4);
        stack.push((0.0, 0.5, 0));
        while let Some((gap, center, level)) = stack.pop() {
            if gap >= best {
                continue;
            }
            if level == self.depth {
                best = gap;
                if best == 0.0 {
                    break;
                }
                continue;
            }
            let side = fmath::powi(self.lambda, level as i32);
            let chalf = 0.5 * side * self.lambda;
            // push farther children first so the nearest pops next
            let start = stack.len();
            for t in 0..self.m {
                let c = self.child_center(center, side, t);
                let g = ((c - chalf - hi).max(lo - (c + chalf))).max(0.0);
                if g < best {
                    stack.push((g, c, level + 1));
                }
            }
            stack[start..].sort_unstable_by(|p, q| q.0.partial_cmp(&p.0).unwrap());
        }
        best
    }

    /// Supremum of the point distance over `[lo, hi]`, within `tol`. The
    /// distance is piecewise linear with unit slopes, so bisection on the
    /// sub-interval holding the maximum converges geometrically.
    fn interval_max(&self, lo: f64, hi: f64, tol: f64) -> f64 {
        let mut best = self.point_dist(lo).max(self.point_dist(hi));
        let mut stack: Vec<(f64, f64)> = Vec::with_capacity(64);
        stack.push((lo, hi));
        while let Some((a, b)) = stack.pop() {
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let dc = self.point_dist(mid);
            best = best.max(dc);
            if dc + half <= best + tol.max(1e-15) {
                continue;
            }
            stack.push((a, mid));
            stack.push((mid, b));
        }
        best
    }
}

impl<'a> GammaGeometry<'a> {
    fn axis(h: &HSet) -> Axis {
        Axis {
            m: h.m as usize,
            lambda: h.lambda,
            depth: h.depth,
        }
    }

    /// Exact l-infinity distance from a point to the approximant.
    pub fn point_dist(&self, x: &[f64]) -> f64 {
        match *self {
            GammaGeometry::Plane { free, ambient } => {
                let mut d = 0.0f64;
                for a in 0..ambient {
                    if a < free {
                        // free axes span [0,1]; clamp
                        d = d.max((x[a] - 1.0).max(-x[a]).max(0.0));
                    } else {
                        d = d.max(fmath::abs(x[a] - 0.5));
                    }
                }
                d
            }
            GammaGeometry::Cantor(h) => {
                let ax = Self::axis(h);
                let mut d = 0.0f64;
                for a in 0..h.ambient_dim {
                    d = d.max(ax.point_dist(x[a]));
                }
                d
            }
        }
    }

    /// Exact l-infinity distance between an axis box `[lo,hi]` and the approximant.
    pub fn box_min_dist(&self, lo: &[f64], hi: &[f64]) -> f64 {
        match *self {
            GammaGeometry::Plane { free, ambient } => {
                let mut d = 0.0f64;
                for a in 0..ambient {
                    let (slo, shi) = if a < free { (0.0, 1.0) } else { (0.5, 0.5) };
                    let gap = (lo[a] - shi).max(slo - hi[a]).max(0.0);
                    d = d.max(gap);
                }
                d
            }
            GammaGeometry::Cantor(h) => {
                let ax = Self::axis(h);
                let mut d = 0.0f64;
                for a in 0..h.ambient_dim {
                    d = d.max(ax.interval_min(lo[a], hi[a]));
                }
                d
            }
        }
    }

    /// Distance from a 1-D interval to the per-axis factor of the product
    /// construction (Cantor only).
    pub fn axis_interval_min(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            GammaGeometry::Cantor(h) => Self::axis(h).interval_min(lo, hi),
            GammaGeometry::Plane { .. } => unreachable!("slab distances are coordinatewise"),
        }
    }

    /// Supremum of the point distance over an axis box, within `tol`:
    /// separable, so it is the max of the per-axis interval suprema.
    pub fn box_max_dist(&self, lo: &[f64], hi: &[f64], tol: f64, ambient: usize) -> f64 {
        match *self {
            GammaGeometry::Plane { free, .. } => {
                let mut d = 0.0f64;
                for a in 0..ambient {
                    if a < free {
                        d = d.max((lo[a] - 1.0).max(-hi[a]).max(0.0));
                    } else {
                        d = d.max(fmath::abs(lo[a] - 0.5).max(fmath::abs(hi[a] - 0.5)));
                    }
                }
                d
            }
            GammaGeometry::Cantor(h) => {
                let ax = Self::axis(h);
                let mut d = 0.0f64;
                for a in 0..ambient.min(h.ambient_dim) {
                    d = d.max(ax.interval_max(lo[a], hi[a], tol));
                }
                d
            }
        }
    }
}
