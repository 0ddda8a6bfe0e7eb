//! Local polynomial projections: per-cell L2-orthogonal projection onto the
//! tensor space of coordinate degree <= r-1, cell-wise error norms by
//! quadrature, and Lq norms over cell families.
//!
//! Regions come in two shapes: plain axis boxes, and graph-capped columns
//! `{x' in B', bottom < x_d < psi(x')}` whose top follows the domain graph.
//! On boxes the pulled-back basis is orthonormal and projection is a dot
//! product; on capped regions a small Gram system is solved instead.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::domain::DomainSpec;
use crate::fields::Field;
use crate::fmath;
use crate::quad::{shifted_legendre, GaussRule};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PolyError {
    #[error("q must be >= 1 (or infinite)")]
    BadQ,
    #[error("degree parameter r must be >= 1")]
    BadR,
    #[error("field returned a non-finite value")]
    NonFinite,
    #[error("region has empty volume")]
    EmptyRegion,
    #[error("Gram system is singular")]
    SingularGram,
}

/// Lq exponent with `infinity` spelled out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LqExponent {
    Fin(f64),
    Inf,
}

impl LqExponent {
    pub fn validate(&self) -> Result<(), PolyError> {
        match self {
            LqExponent::Fin(q) if *q >= 1.0 => Ok(()),
            LqExponent::Inf => Ok(()),
            _ => Err(PolyError::BadQ),
        }
    }
}

/// Tensor-product basis of coordinate degree <= r-1 in `dim` variables,
/// orthonormal in `L2([0,1]^dim)`; size `r^dim`.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    pub r: usize,
    pub dim: usize,
}

impl PolyBasis {
    pub fn new(r: usize, dim: usize) -> Result<Self, PolyError> {
        if r < 1 {
            return Err(PolyError::BadR);
        }
        Ok(PolyBasis { r, dim })
    }

    pub fn size(&self) -> usize {
        self.r.pow(self.dim as u32)
    }

    /// Degree per axis of basis element `idx` (digits of `idx` base `r`).
    fn degrees(&self, idx: usize) -> [usize; 4] {
        let mut out = [0usize; 4];
        let mut v = idx;
        for a in 0..self.dim {
            out[a] = v % self.r;
            v /= self.r;
        }
        out
    }

    /// Evaluate basis element `idx` at a point of the unit cube.
    pub fn eval(&self, idx: usize, u: &[f64]) -> f64 {
        let deg = self.degrees(idx);
        let mut v = 1.0;
        for a in 0..self.dim {
            v *= shifted_legendre(deg[a], u[a]);
        }
        v
    }
}

/// Integration region of a piece.
#[derive(Debug, Clone)]
pub enum Region {
    /// Full-dimensional axis box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{x' in [lo,hi], bottom < x_d < psi(x')}`; `top` fixes the affine
    /// frame used for the polynomial variables.
    Capped {
        lo: Vec<f64>,
        hi: Vec<f64>,
        bottom: f64,
        top: f64,
    },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lo, .. } => lo.len(),
            Region::Capped { lo, .. } => lo.len() + 1,
        }
    }

    pub fn unit_box(dim: usize) -> Region {
        Region::Box {
            lo: alloc::vec![0.0; dim],
            hi: alloc::vec![1.0; dim],
        }
    }

    /// Map a physical point into the polynomial frame `[0,1]^dim`.
    pub fn to_unit(&self, x: &[f64], u: &mut [f64]) {
        match self {
            Region::Box { lo, hi } => {
                for a in 0..lo.len() {
                    u[a] = (x[a] - lo[a]) / (hi[a] - lo[a]);
                }
            }
            Region::Capped {
                lo,
                hi,
                bottom,
                top,
            } => {
                let k = lo.len();
                for a in 0..k {
                    u[a] = (x[a] - lo[a]) / (hi[a] - lo[a]);
                }
                u[k] = (x[k] - bottom) / (top - bottom);
            }
        }
    }

    pub fn contains(&self, x: &[f64], dom: &DomainSpec) -> bool {
        match self {
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= *l && *v < *h),
            Region::Capped { lo, hi, bottom, .. } => {
                let k = lo.len();
                for a in 0..k {
                    if !(x[a] >= lo[a] && x[a] < hi[a]) {
                        return false;
                    }
                }
                x[k] >= *bottom && x[k] < dom.psi_unchecked(&x[..k])
            }
        }
    }
}

/// Quadrature nodes of a region: physical points plus weights that include
/// the volume jacobian, and the matching unit-frame points.
pub(crate) struct RegionQuadrature {
    pub points: Vec<f64>,
    pub units: Vec<f64>,
    pub weights: Vec<f64>,
    pub dim: usize,
}

impl RegionQuadrature {
    pub(crate) fn build(region: &Region, dom: &DomainSpec, order: usize) -> RegionQuadrature {
        let rule = GaussRule::new(order);
        let dim = region.dim();
        let mut points = Vec::new();
        let mut units = Vec::new();
        let mut weights = Vec::new();
        match region {
            Region::Box { lo, hi } => {
                let mut idx = alloc::vec![0usize; dim];
                let mut vol = 1.0;
                for a in 0..dim {
                    vol *= hi[a] - lo[a];
                }
                loop {
                    let mut w = vol;
                    for a in 0..dim {
                        let u = rule.nodes[idx[a]];
                        points.push(lo[a] + (hi[a] - lo[a]) * u);
                        units.push(u);
                        w *= rule.weights[idx[a]];
                    }
                    weights.push(w);
                    if !advance(&mut idx, rule.len()) {
                        break;
                    }
                }
            }
            Region::Capped {
                lo,
                hi,
                bottom,
                top,
            } => {
                let k = lo.len();
                let mut base_area = 1.0;
                for a in 0..k {
                    base_area *= hi[a] - lo[a];
                }
                let mut idx = alloc::vec![0usize; k];
                let mut xp = alloc::vec![0.0f64; k];
                loop {
                    let mut wb = base_area;
                    for a in 0..k {
                        xp[a] = lo[a] + (hi[a] - lo[a]) * rule.nodes[idx[a]];
                        wb *= rule.weights[idx[a]];
                    }
                    let psi = dom.psi_unchecked(&xp);
                    let len = (psi.min(*top) - bottom).max(0.0);
                    if len > 0.0 {
                        for (un, wn) in rule.nodes.iter().zip(&rule.weights) {
                            let xd = bottom + un * len;
                            for a in 0..k {
                                points.push(xp[a]);
                                units.push((xp[a] - lo[a]) / (hi[a] - lo[a]));
                            }
                            points.push(xd);
                            units.push((xd - bottom) / (top - bottom));
                            weights.push(wb * wn * len);
                        }
                    }
                    if !advance(&mut idx, rule.len()) {
                        break;
                    }
                }
            }
        }
        RegionQuadrature {
            points,
            units,
            weights,
            dim,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.weights.len()
    }

    pub(crate) fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn unit(&self, i: usize) -> &[f64] {
        &self.units[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn advance(idx: &mut [usize], base: usize) -> bool {
    for v in idx.iter_mut() {
        *v += 1;
        if *v < base {
            return true;
        }
        *v = 0;
    }
    false
}

pub fn default_quad_order(r: usize) -> usize {
    (2 * r).max(8)
}

/// L2 projection of `f` onto the tensor polynomial space over `region`;
/// returns the coefficient vector in the region's unit frame. Reproduces any
/// polynomial of coordinate degree <= r-1 exactly.
pub fn project_cell(
    f: &dyn Field,
    region: &Region,
    r: usize,
    dom: &DomainSpec,
    quad_order: usize,
) -> Result<Vec<f64>, PolyError> {
    let basis = PolyBasis::new(r, region.dim())?;
    let quad = RegionQuadrature::build(region, dom, quad_order.max(r));
    if quad.len() == 0 || quad.volume() <= 0.0 {
        return Err(PolyError::EmptyRegion);
    }
    let m = basis.size();
    let mut fvals = Vec::with_capacity(quad.len());
    for i in 0..quad.len() {
        let v = f.eval(quad.point(i));
        if !v.is_finite() {
            return Err(PolyError::NonFinite);
        }
        fvals.push(v);
    }
    match region {
        Region::Box { .. } => {
            // orthonormal basis after volume normalization: plain inner products
            let vol = quad.volume();
            let mut coeffs = alloc::vec![0.0f64; m];
            for (j, c) in coeffs.iter_mut().enumerate() {
                let mut acc = 0.0;
                for i in 0..quad.len() {
                    acc += quad.weights[i] * fvals[i] * basis.eval(j, quad.unit(i));
                }
                *c = acc / vol;
            }
            Ok(coeffs)
        }
        Region::Capped { .. } => {
            let mut gram = DMatrix::<f64>::zeros(m, m);
            let mut rhs = DVector::<f64>::zeros(m);
            let mut bvals = alloc::vec![0.0f64; m];
            for i in 0..quad.len() {
                let u = quad.unit(i);
                for (j, b) in bvals.iter_mut().enumerate() {
                    *b = basis.eval(j, u);
                }
                let w = quad.weights[i];
                for a in 0..m {
                    rhs[a] += w * fvals[i] * bvals[a];
                    for b in a..m {
                        gram[(a, b)] += w * bvals[a] * bvals[b];
                    }
                }
            }
            for a in 0..m {
                for b in 0..a {
                    gram[(a, b)] = gram[(b, a)];
                }
            }
            let chol = Cholesky::new(gram).ok_or(PolyError::SingularGram)?;
            let sol = chol.solve(&rhs);
            Ok(sol.iter().cloned().collect())
        }
    }
}

/// Evaluate the projected polynomial at a physical point.
pub fn eval_poly(coeffs: &[f64], region: &Region, r: usize, x: &[f64]) -> f64 {
    let basis = PolyBasis {
        r,
        dim: region.dim(),
    };
    let mut u = [0.0f64; 4];
    region.to_unit(x, &mut u[..region.dim()]);
    let mut acc = 0.0;
    for (j, c) in coeffs.iter().enumerate() {
        acc += c * basis.eval(j, &u[..region.dim()]);
    }
    acc
}

/// `||f - poly||_{Lq(region)}`: tensor quadrature for finite `q`, dense-grid
/// maximum for `q = infinity` (`grid` points per axis).
pub fn cell_error(
    f: &dyn Field,
    coeffs: &[f64],
    region: &Region,
    r: usize,
    q: LqExponent,
    dom: &DomainSpec,
    quad_order: usize,
    grid: usize,
) -> Result<f64, PolyError> {
    q.validate()?;
    match q {
        LqExponent::Fin(qv) => {
            let quad = RegionQuadrature::build(region, dom, quad_order.max(r));
            let basis = PolyBasis::new(r, region.dim())?;
            let mut acc = 0.0;
            for i in 0..quad.len() {
                let u = quad.unit(i);
                let mut p = 0.0;
                for (j, c) in coeffs.iter().enumerate() {
                    p += c * basis.eval(j, u);
                }
                let v = f.eval(quad.point(i));
                if !v.is_finite() {
                    return Err(PolyError::NonFinite);
                }
                acc += quad.weights[i] * fmath::pow(fmath::abs(v - p), qv);
            }
            Ok(fmath::pow(acc, 1.0 / qv))
        }
        LqExponent::Inf => {
            let pts = sup_grid(region, dom, grid.max(3));
            let dim = region.dim();
            let mut best = 0.0f64;
            for chunk in pts.chunks(dim) {
                let v = f.eval(chunk);
                if !v.is_finite() {
                    return Err(PolyError::NonFinite);
                }
                let p = eval_poly(coeffs, region, r, chunk);
                best = best.max(fmath::abs(v - p));
            }
            Ok(best)
        }
    }
}

/// `||f||_{Lq}` over a disjoint family of regions.
pub fn lq_norm(
    f: &dyn Field,
    regions: &[Region],
    q: LqExponent,
    dom: &DomainSpec,
    quad_order: usize,
    grid: usize,
) -> Result<f64, PolyError> {
    q.validate()?;
    match q {
        LqExponent::Fin(qv) => {
            let mut acc = 0.0;
            for region in regions {
                let quad = RegionQuadrature::build(region, dom, quad_order.max(2));
                for i in 0..quad.len() {
                    let v = f.eval(quad.point(i));
                    if !v.is_finite() {
                        return Err(PolyError::NonFinite);
                    }
                    acc += quad.weights[i] * fmath::pow(fmath::abs(v), qv);
                }
            }
            Ok(fmath::pow(acc, 1.0 / qv))
        }
        LqExponent::Inf => {
            let mut best = 0.0f64;
            for region in regions {
                let dim = region.dim();
                for chunk in sup_grid(region, dom, grid.max(3)).chunks(dim) {
                    let v = f.eval(chunk);
                    if !v.is_finite() {
                        return Err(PolyError::NonFinite);
                    }
                    best = best.max(fmath::abs(v));
                }
            }
            Ok(best)
        }
    }
}

fn sup_grid(region: &Region, dom: &DomainSpec, grid: usize) -> Vec<f64> {
    let dim = region.dim();
    let mut out = Vec::new();
    match region {
        Region::Box { lo, hi } => {
            let mut idx = alloc::vec![0usize; dim];
            loop {
                for a in 0..dim {
                    out.push(lo[a] + (hi[a] - lo[a]) * idx[a] as f64 / (grid - 1) as f64);
                }
                if !advance(&mut idx, grid) {
                    break;
                }
            }
        }
        Region::Capped { lo, hi, bottom, .. } => {
            let k = lo.len();
            let mut idx = alloc::vec![0usize; k];
            let mut xp = alloc::vec![0.0f64; k];
            loop {
                for a in 0..k {
                    xp[a] = lo[a] + (hi[a] - lo[a]) * idx[a] as f64 / (grid - 1) as f64;
                }
                let top = dom.psi_unchecked(&xp);
                if top > *bottom {
                    for g in 0..grid {
                        out.extend_from_slice(&xp);
                        // stay strictly inside the column
                        out.push(bottom + (top - bottom) * (g as f64 + 0.5) / grid as f64);
                    }
                }
                if !advance(&mut idx, grid) {
                    break;
                }
            }
        }
    }
    out
}

/// A piecewise polynomial over a disjoint family of regions.
#[derive(Debug, Clone)]
pub struct PiecewisePoly {
    pub r: usize,
    pub pieces: Vec<(Region, Vec<f64>)>,
}

impl PiecewisePoly {
    pub fn eval(&self, x: &[f64], dom: &DomainSpec) -> Option<f64> {
        self.pieces
            .iter()
            .find(|(region, _)| region.contains(x, dom))
            .map(|(region, coeffs)| eval_poly(coeffs, region, self.r, x))
    }
}
