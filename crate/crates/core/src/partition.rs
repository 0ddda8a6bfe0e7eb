//! Hierarchical cell partitions of a cusp domain.
//!
//! Level `k` slices the domain between graph offsets `2^-k` and `2^-k-1`;
//! each slice is carried by base parallelepipeds whose per-axis width
//! `2^{-n_{k,i}}` tracks the boundary moduli, so cells stay graph-aligned.
//! Two variants exist: the full tree subdivides every base cell, the pruned
//! variant (for h-set cusps) only refines cells near the singular set and
//! lets the far cells absorb their vertical tail up to the graph.
//!
//! Trees can be materialized (every cell stored, exact audits) or probed
//! implicitly (point location by grid arithmetic plus distance descent).
//! The implicit path exists because for d = 3 h-set domains the level-1 cell
//! population already exceeds 10^6, far beyond what is worth storing.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{BoundaryModulus, DomainError, DomainSpec, PsiSpec};
use crate::fmath;
use crate::hset::{HSet, HSetKind};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PartitionError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("resolution out of supported range at level {0}")]
    ResolutionRange(u32),
    #[error("level {level} holds ~{cells} cells, above the materialization limit {limit}; use the probe interface")]
    TooManyCells {
        level: u32,
        cells: u128,
        limit: u128,
    },
    #[error("tree variant requires an h-set cusp domain")]
    NotHsetDomain,
    #[error("max_level must be >= 1")]
    MaxLevel,
    #[error("base dimension {0} unsupported for trees (need 1 or 2)")]
    BaseDim(usize),
}

/// Smallest `n >= 1` with `2^-n <= phi_i(2^-k-3) < 2^-n+1`, one per axis.
pub fn level_resolutions(moduli: &[BoundaryModulus], k: u32) -> Result<Vec<u32>, PartitionError> {
    let t = fmath::dyadic(k as i32 + 3);
    moduli
        .iter()
        .map(|m| {
            let v = m.eval(t).map_err(PartitionError::Domain)?;
            bracket_dyadic(v, 0).ok_or(PartitionError::ResolutionRange(k))
        })
        .collect()
}

/// Pruned-variant resolution: smallest `n` with
/// `2^{-n+1} <= phi0(2^{-k-4}) < 2^{-n+2}` where `phi0(t) = t^sigma`.
pub fn hset_level_resolution(sigma: f64, k: u32) -> Result<u32, PartitionError> {
    let v = fmath::pow(fmath::dyadic(k as i32 + 4), sigma);
    bracket_dyadic(v, 1).ok_or(PartitionError::ResolutionRange(k))
}

/// Smallest `n` with `2^{-n+shift} <= v`, located by direct comparison so
/// dyadic boundary cases land exactly.
fn bracket_dyadic(v: f64, shift: i32) -> Option<u32> {
    if !(v > 0.0 && v.is_finite()) {
        return None;
    }
    let mut n = (-fmath::log2(v)) as i64 + shift as i64;
    for _ in 0..4 {
        if fmath::exp2((shift as i64 - n) as f64) > v {
            n += 1;
        }
    }
    while n > 1 && fmath::exp2((shift as i64 - (n - 1)) as f64) <= v {
        n -= 1;
    }
    if !(1..=52).contains(&n) {
        return None;
    }
    Some(n as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TreeVariant {
    Full,
    HsetPruned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Role {
    Interior,
    NearGamma,
    FarGamma,
}

pub const NO_PARENT: u32 = u32::MAX;

/// One cell `base-box x (c_minus, c_plus)`. Base coordinates are dyadic:
/// `base_lo_i = grid[i] * 2^{-n_{k,i}}`, width exactly `2^{-n_{k,i}}`.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub level: u32,
    pub grid: [u64; 2],
    pub parent: u32,
    pub c_minus: f64,
    pub c_plus: f64,
    /// Far cells only: estimated top of the absorbed tail, `sup psi` over the base.
    pub tail_top: Option<f64>,
    pub role: Role,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildLimits {
    pub max_cells: u128,
}

impl Default for BuildLimits {
    fn default() -> Self {
        BuildLimits {
            max_cells: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PartitionTree {
    pub domain: DomainSpec,
    pub variant: TreeVariant,
    pub max_level: u32,
    /// Per-level, per-axis resolutions `n_{k,i}` (level 0 is the unit cube).
    pub resolutions: Vec<Vec<u32>>,
    /// Cells per level, lexicographically sorted by grid coordinates.
    pub levels: Vec<Vec<Cell>>,
}

impl PartitionTree {
    pub fn base_dim(&self) -> usize {
        self.domain.base_dim()
    }

    pub fn cell_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn near_count(&self, k: usize) -> usize {
        self.levels[k]
            .iter()
            .filter(|c| c.role == Role::NearGamma)
            .count()
    }

    /// Closed base box of a cell in unit coordinates.
    pub fn base_box(&self, cell: &Cell) -> ([f64; 2], [f64; 2]) {
        let mut lo = [0.0; 2];
        let mut hi = [1.0; 2];
        for a in 0..self.base_dim() {
            let n = self.resolutions[cell.level as usize][a];
            let w = fmath::dyadic(n as i32);
            lo[a] = cell.grid[a] as f64 * w;
            hi[a] = lo[a] + w;
        }
        (lo, hi)
    }

    pub fn cell_volume(&self, cell: &Cell) -> f64 {
        let mut v = cell.c_plus - cell.c_minus;
        for a in 0..self.base_dim() {
            v *= fmath::dyadic(self.resolutions[cell.level as usize][a] as i32);
        }
        v
    }
}

struct PsiProbe<'a> {
    dom: &'a DomainSpec,
}

impl<'a> PsiProbe<'a> {
    /// Infimum of psi over a base box within a tolerance tied to the box
    /// size. The +3 keeps the induced `c_plus` error well inside the height
    /// bounds without blowing up the branch-and-bound below the graph.
    fn inf_box(&self, lo: &[f64], hi: &[f64], n_max: u32) -> f64 {
        let tol = fmath::dyadic(n_max as i32 + 3);
        self.dom.psi_inf_box(lo, hi, tol)
    }
}

/// Build the fully subdivided tree to `max_level`. Every level-k base cell
/// is materialized; refuse domains whose per-level population exceeds the
/// limit instead of thrashing.
pub fn build_tree(
    dom: &DomainSpec,
    max_level: u32,
    limits: &BuildLimits,
) -> Result<PartitionTree, PartitionError> {
    build_impl(dom, max_level, limits, TreeVariant::Full)
}

/// Build the pruned h-set tree: only near-set cells are refined, far cells
/// keep their vertical tail and become leaves.
pub fn build_hset_tree(
    dom: &DomainSpec,
    max_level: u32,
    limits: &BuildLimits,
) -> Result<PartitionTree, PartitionError> {
    if dom.hset().is_none() {
        return Err(PartitionError::NotHsetDomain);
    }
    build_impl(dom, max_level, limits, TreeVariant::HsetPruned)
}

fn build_impl(
    dom: &DomainSpec,
    max_level: u32,
    limits: &BuildLimits,
    variant: TreeVariant,
) -> Result<PartitionTree, PartitionError> {
    dom.validate()?;
    if max_level == 0 {
        return Err(PartitionError::MaxLevel);
    }
    let bd = dom.base_dim();
    if bd > 2 {
        return Err(PartitionError::BaseDim(bd));
    }
    let cusp_sigma = match (&dom.psi, variant) {
        (PsiSpec::HsetCusp { sigma, .. }, TreeVariant::HsetPruned) => Some(*sigma),
        (_, TreeVariant::HsetPruned) => return Err(PartitionError::NotHsetDomain),
        _ => None,
    };

    let mut resolutions: Vec<Vec<u32>> = alloc::vec![alloc::vec![0; bd]];
    for k in 1..=max_level {
        let row = match cusp_sigma {
            Some(s) => alloc::vec![hset_level_resolution(s, k)?; bd],
            None => level_resolutions(&dom.moduli, k)?,
        };
        resolutions.push(row);
    }

    let probe = PsiProbe { dom };
    let mut lo = [0.0; 2];
    let mut hi = [1.0; 2];
    let root_inf = probe.inf_box(&lo[..bd], &hi[..bd], 10);
    let c_plus_root = root_inf - 0.5;

    let root = Cell {
        level: 0,
        grid: [0, 0],
        parent: NO_PARENT,
        c_minus: 0.0,
        c_plus: c_plus_root,
        tail_top: None,
        role: match variant {
            TreeVariant::Full => Role::Interior,
            TreeVariant::HsetPruned => Role::NearGamma,
        },
    };
    let mut levels: Vec<Vec<Cell>> = alloc::vec![alloc::vec![root]];

    let geometry = dom.hset().map(|h| h.geometry());

    for k in 1..=max_level {
        let n_cur = resolutions[k as usize].clone();
        let n_prev = resolutions[k as usize - 1].clone();
        let tau = fmath::dyadic(n_cur[0] as i32);
        let half_height = fmath::dyadic(k as i32 + 1);
        let n_max = *n_cur.iter().max().unwrap();

        // volume guard before enumerating
        let mut expected: u128 = 0;
        for parent in &levels[k as usize - 1] {
            if variant == TreeVariant::HsetPruned && parent.role != Role::NearGamma {
                continue;
            }
            let mut per_parent: u128 = 1;
            for a in 0..bd {
                per_parent *= 1u128 << (n_cur[a] - n_prev[a]);
            }
            expected += per_parent;
            if expected > limits.max_cells {
                return Err(PartitionError::TooManyCells {
                    level: k,
                    cells: expected,
                    limit: limits.max_cells,
                });
            }
        }

        let mut cells: Vec<Cell> = Vec::with_capacity(expected as usize);
        let parents: Vec<(usize, Cell)> = levels[k as usize - 1]
            .iter()
            .cloned()
            .enumerate()
            .filter(|(_, p)| variant == TreeVariant::Full || p.role == Role::NearGamma)
            .collect();
        for (pidx, parent) in parents {
            let shift: Vec<u32> = (0..bd).map(|a| n_cur[a] - n_prev[a]).collect();
            let counts: Vec<u64> = shift.iter().map(|s| 1u64 << s).collect();
            let mut idx = [0u64; 2];
            loop {
                let mut grid = [0u64; 2];
                for a in 0..bd {
                    grid[a] = (parent.grid[a] << shift[a]) + idx[a];
                }
                for a in 0..bd {
                    let w = fmath::dyadic(n_cur[a] as i32);
                    lo[a] = grid[a] as f64 * w;
                    hi[a] = lo[a] + w;
                }
                let inf = probe.inf_box(&lo[..bd], &hi[..bd], n_max);
                let c_plus = inf - half_height;
                let c_minus = parent.c_plus;
                let (role, tail_top) = match variant {
                    TreeVariant::Full => (Role::Interior, None),
                    TreeVariant::HsetPruned => {
                        let g = geometry.as_ref().unwrap();
                        let near = g.box_min_dist(&lo[..bd], &hi[..bd]) <= tau;
                        if near {
                            (Role::NearGamma, None)
                        } else {
                            let top = dom.psi_sup_box(&lo[..bd], &hi[..bd], tau);
                            (Role::FarGamma, Some(top))
                        }
                    }
                };
                cells.push(Cell {
                    level: k,
                    grid,
                    parent: pidx as u32,
                    c_minus,
                    c_plus,
                    tail_top,
                    role,
                });
                // advance the child index
                let mut a = 0;
                while a < bd {
                    idx[a] += 1;
                    if idx[a] < counts[a] {
                        break;
                    }
                    idx[a] = 0;
                    a += 1;
                }
                if idx[..bd].iter().all(|&v| v == 0) {
                    break;
                }
            }
        }
        cells.sort_unstable_by_key(|c| (c.grid[0], c.grid[1]));
        levels.push(cells);
    }

    Ok(PartitionTree {
        domain: dom.clone(),
        variant,
        max_level,
        resolutions,
        levels,
    })
}

#[derive(Debug, Clone)]
pub struct LevelAudit {
    pub level: u32,
    pub cells: usize,
    pub near: usize,
    pub far: usize,
    pub height_x2k_min: f64,
    pub height_x2k_max: f64,
    pub branching_max: usize,
    pub volume_ratio_min: f64,
    pub volume_ratio_max: f64,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub levels: Vec<LevelAudit>,
    /// Base cells at each level are pairwise disjoint and exactly tile their
    /// parents (integer dyadic arithmetic).
    pub tiling_exact: bool,
    /// `c_minus` equals the parent `c_plus` bitwise on every non-root cell.
    pub chaining_exact: bool,
    /// Volume of the region covered by the cells (tails included).
    pub covered_measure: f64,
    /// Upper bound on the measure missed below the level-K fringe
    /// `{psi(x') - 2^{-K-1} <= x_d < psi(x')}`.
    pub covering_defect_bound: f64,
    /// max over levels of `#near * h(2^{-n_k})` (pruned variant only).
    pub near_constant: f64,
}

/// Exact structural audit of a materialized tree.
pub fn partition_audit(tree: &PartitionTree) -> AuditReport {
    let bd = tree.base_dim();
    let mut tiling_exact = true;
    let mut chaining_exact = true;
    let mut covered = 0.0;
    let mut near_constant: f64 = 0.0;
    let theta = tree.domain.hset().map(|h| h.theta);
    let mut out = Vec::new();

    for k in 0..=tree.max_level as usize {
        let cells = &tree.levels[k];
        let mut near = 0;
        let mut far = 0;
        let mut hmin = f64::INFINITY;
        let mut hmax = f64::NEG_INFINITY;
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        let mut child_count: Vec<usize> =
            alloc::vec![0; if k > 0 { tree.levels[k - 1].len() } else { 1 }];

        // pairwise disjointness: sorted grids must be strictly increasing
        for w in cells.windows(2) {
            if (w[0].grid[0], w[0].grid[1]) >= (w[1].grid[0], w[1].grid[1]) {
                tiling_exact = false;
            }
        }

        let scale = if k >= 1 {
            let t = fmath::dyadic(k as i32);
            let mut phi_prod = 1.0;
            for m in &tree.domain.moduli {
                phi_prod *= m.eval_unchecked(t);
            }
            t * phi_prod
        } else {
            1.0
        };

        for cell in cells {
            let height = cell.c_plus - cell.c_minus;
            covered += tree.cell_volume(cell);
            match cell.role {
                Role::NearGamma => near += 1,
                Role::FarGamma => far += 1,
                Role::Interior => {}
            }
            if let Some(top) = cell.tail_top {
                // absorbed tail; mid-height estimate of the graph cap
                let (lo, hi) = tree.base_box(cell);
                let mut area = 1.0;
                for a in 0..bd {
                    area *= hi[a] - lo[a];
                }
                let inf = tree.domain.psi_inf_box(
                    &lo[..bd],
                    &hi[..bd],
                    ((top - cell.c_plus).max(1e-12)) / 8.0,
                );
                covered += area * (0.5 * (top + inf) - cell.c_plus).max(0.0);
            }
            if k >= 1 {
                let h2k = height * fmath::powi(2.0, k as i32);
                hmin = hmin.min(h2k);
                hmax = hmax.max(h2k);
                let ratio = tree.cell_volume(cell) / scale;
                vmin = vmin.min(ratio);
                vmax = vmax.max(ratio);
                let p = cell.parent as usize;
                child_count[p] += 1;
                let parent = &tree.levels[k - 1][p];
                if cell.c_minus.to_bits() != parent.c_plus.to_bits() {
                    chaining_exact = false;
                }
                // child box inside parent box, exact in integers
                for a in 0..bd {
                    let shift = tree.resolutions[k][a] - tree.resolutions[k - 1][a];
                    if cell.grid[a] >> shift != parent.grid[a] {
                        tiling_exact = false;
                    }
                }
            }
        }

        // exact tiling: every refined parent owns exactly prod 2^{shift} children
        if k >= 1 {
            let shift_total: u32 = (0..bd)
                .map(|a| tree.resolutions[k][a] - tree.resolutions[k - 1][a])
                .sum();
            for (pi, parent) in tree.levels[k - 1].iter().enumerate() {
                let refined = tree.variant == TreeVariant::Full || parent.role == Role::NearGamma;
                let expect = if refined { 1usize << shift_total } else { 0 };
                if child_count[pi] != expect {
                    tiling_exact = false;
                }
            }
        }

        if let Some(theta) = theta {
            if tree.variant == TreeVariant::HsetPruned && k >= 1 && near > 0 {
                let n_k = tree.resolutions[k][0];
                near_constant =
                    near_constant.max(near as f64 * fmath::pow(fmath::dyadic(n_k as i32), theta));
            }
        }

        out.push(LevelAudit {
            level: k as u32,
            cells: cells.len(),
            near,
            far,
            height_x2k_min: hmin,
            height_x2k_max: hmax,
            branching_max: child_count.iter().cloned().max().unwrap_or(0),
            volume_ratio_min: vmin,
            volume_ratio_max: vmax,
        });
    }

    // fringe-excluded defect: graph variation over the finest base cells
    let defect = fmath::dyadic(tree.max_level as i32 + 2);

    AuditReport {
        levels: out,
        tiling_exact,
        chaining_exact,
        covered_measure: covered,
        covering_defect_bound: defect,
        near_constant,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeParams {
    pub samples: u64,
    pub seed: u64,
    /// How many sampled columns get the exact child-tiling arithmetic check.
    pub tile_checks: u32,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams {
            samples: 1_000_000,
            seed: 1729,
            tile_checks: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub samples: u64,
    pub in_omega: u64,
    pub covered: u64,
    pub fringe: u64,
    pub box_volume: f64,
    pub mc_omega_volume: f64,
    pub mc_covered_volume: f64,
    /// Standard error of the fringe volume estimate.
    pub fringe_stderr: f64,
    pub height_x2k_min: f64,
    pub height_x2k_max: f64,
    /// Per-level `(k, min, max)` of the scaled heights across visited cells.
    /// Level 1 sits on the root cell, whose floor carries the global graph
    /// oscillation; the sharpened [1/4, 3/4] band only binds from level 2.
    pub level_heights: Vec<(u32, f64, f64)>,
    pub chaining_exact: bool,
    pub tiling_checked: u64,
    pub tiling_exact: bool,
    pub covering_defect_bound: f64,
    /// Worst-case error of the graph-infimum estimates entering `c_plus`.
    pub c_plus_tol: f64,
}

/// Structural and volumetric checks on the implicit tree: point location by
/// grid arithmetic, no cell storage. Works at depths where materialization
/// is impossible.
pub fn probe_tree(
    dom: &DomainSpec,
    variant: TreeVariant,
    max_level: u32,
    params: &ProbeParams,
) -> Result<ProbeReport, PartitionError> {
    dom.validate()?;
    if max_level == 0 {
        return Err(PartitionError::MaxLevel);
    }
    let bd = dom.base_dim();
    if bd > 2 {
        return Err(PartitionError::BaseDim(bd));
    }
    let cusp_sigma = match (&dom.psi, variant) {
        (PsiSpec::HsetCusp { sigma, .. }, TreeVariant::HsetPruned) => Some(*sigma),
        (_, TreeVariant::HsetPruned) => return Err(PartitionError::NotHsetDomain),
        _ => None,
    };
    let mut resolutions: Vec<Vec<u32>> = alloc::vec![alloc::vec![0; bd]];
    for k in 1..=max_level {
        let row = match cusp_sigma {
            Some(s) => alloc::vec![hset_level_resolution(s, k)?; bd],
            None => level_resolutions(&dom.moduli, k)?,
        };
        resolutions.push(row);
    }

    let probe = PsiProbe { dom };
    let geometry = dom.hset().map(|h| h.geometry());
    let mut lo = [0.0f64; 2];
    let mut hi = [1.0f64; 2];
    let root_inf = probe.inf_box(&lo[..bd], &hi[..bd], 10);
    let c_plus_root = root_inf - 0.5;

    let top = dom.psi_sup();
    let box_volume = top; // unit base area times box height
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut in_omega = 0u64;
    let mut covered = 0u64;
    let mut hmin = f64::INFINITY;
    let mut hmax = f64::NEG_INFINITY;
    let mut level_h: Vec<(f64, f64)> =
        alloc::vec![(f64::INFINITY, f64::NEG_INFINITY); max_level as usize + 1];
    let mut c_plus_tol = 0.0f64;
    let chaining_exact = true;
    let mut tiling_checked = 0u64;
    let mut tiling_exact = true;

    for _ in 0..params.samples {
        let mut xp = [0.0f64; 2];
        for a in &mut xp[..bd] {
            *a = rng.random::<f64>();
        }
        let xd = top * rng.random::<f64>();
        let psi = dom.psi_unchecked(&xp[..bd]);
        let inside = xd < psi;
        if inside {
            in_omega += 1;
        }

        // descend the column
        let mut c_plus = c_plus_root;
        let mut hit_covered = xd <= c_plus;
        if !hit_covered {
            for k in 1..=max_level {
                let n = &resolutions[k as usize];
                let mut grid = [0u64; 2];
                for a in 0..bd {
                    let cellsn = 1u64 << n[a];
                    grid[a] = ((xp[a] * cellsn as f64) as u64).min(cellsn - 1);
                    let w = fmath::dyadic(n[a] as i32);
                    lo[a] = grid[a] as f64 * w;
                    hi[a] = lo[a] + w;
                }
                let n_max = *n.iter().max().unwrap();
                let inf = probe.inf_box(&lo[..bd], &hi[..bd], n_max);
                let c_minus = c_plus;
                c_plus = inf - fmath::dyadic(k as i32 + 1);
                c_plus_tol = c_plus_tol.max(fmath::pow(fmath::dyadic(n_max as i32 + 2), 0.5));
                let h2k = (c_plus - c_minus) * fmath::powi(2.0, k as i32);
                hmin = hmin.min(h2k);
                hmax = hmax.max(h2k);
                let slot = &mut level_h[k as usize];
                slot.0 = slot.0.min(h2k);
                slot.1 = slot.1.max(h2k);
                if xd <= c_plus {
                    hit_covered = true;
                    break;
                }
                if variant == TreeVariant::HsetPruned {
                    let g = geometry.as_ref().unwrap();
                    let tau = fmath::dyadic(n[0] as i32);
                    let near = g.box_min_dist(&lo[..bd], &hi[..bd]) <= tau;
                    if !near {
                        // far cell: its tail runs to the graph, so the whole
                        // in-domain part of this column is covered
                        hit_covered = inside;
                        break;
                    }
                }
            }
        }
        if inside && hit_covered {
            covered += 1;
        }

        if tiling_checked < params.tile_checks as u64 {
            // exact dyadic arithmetic: the located child must sit inside its
            // parent cell on every axis
            for k in 1..=max_level.min(4) {
                let n = &resolutions[k as usize];
                let np = &resolutions[k as usize - 1];
                for a in 0..bd {
                    let cellsn = 1u64 << n[a];
                    let g = ((xp[a] * cellsn as f64) as u64).min(cellsn - 1);
                    let gp = ((xp[a] * (1u64 << np[a]) as f64) as u64).min((1u64 << np[a]) - 1);
                    if g >> (n[a] - np[a]) != gp {
                        tiling_exact = false;
                    }
                }
            }
            tiling_checked += 1;
        }
    }

    let fringe = in_omega - covered;
    let frac = fringe as f64 / params.samples as f64;
    let stderr = box_volume * fmath::sqrt(frac * (1.0 - frac) / params.samples as f64);

    Ok(ProbeReport {
        samples: params.samples,
        in_omega,
        covered,
        fringe,
        box_volume,
        mc_omega_volume: box_volume * in_omega as f64 / params.samples as f64,
        mc_covered_volume: box_volume * covered as f64 / params.samples as f64,
        fringe_stderr: stderr,
        height_x2k_min: hmin,
        height_x2k_max: hmax,
        level_heights: level_h
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, (lo2, _))| lo2.is_finite())
            .map(|(k, (lo2, hi2))| (k as u32, *lo2, *hi2))
            .collect(),
        chaining_exact,
        tiling_checked,
        tiling_exact,
        covering_defect_bound: fmath::dyadic(max_level as i32 + 2),
        c_plus_tol,
    })
}

/// Number of level-`n` grid cells within `2^-n` of the h-set. Exact with
/// respect to the stored approximant; no cells are materialized.
///
/// Both set kinds are products of identical per-axis factors and the
/// l-infinity box distance separates by axis, so a grid cell is near the
/// set exactly when every axis is near its 1-D factor: the count is the
/// per-axis count raised to the ambient dimension. The brute-force
/// simultaneous grid/construction descent survives as a test oracle.
pub fn near_cell_count(hset: &HSet, n: u32) -> u64 {
    let tau = fmath::dyadic(n as i32);
    match hset.kind {
        HSetKind::Plane => {
            // free axes accept every cell; pinned axes count the cells
            // within tau of the coordinate value 1/2
            let w = fmath::dyadic(n as i32);
            let mut pinned = 0u64;
            for g in 0..(1u64 << n) {
                let lo = g as f64 * w;
                let gap = (lo - 0.5).max(0.5 - (lo + w)).max(0.0);
                if gap <= tau {
                    pinned += 1;
                }
            }
            let free = hset.slab_dim as u32;
            let rest = (hset.ambient_dim - hset.slab_dim) as u32;
            (1u64 << (n * free)) * pinned.pow(rest)
        }
        HSetKind::Cantor => {
            let n1 = count_near_axis(hset, n, tau);
            n1.pow(hset.ambient_dim as u32)
        }
    }
}

/// 1-D near-cell count: DFS over dyadic intervals, pruning by the exact
/// interval distance to the per-axis factor of the construction.
fn count_near_axis(hset: &HSet, n: u32, tau: f64) -> u64 {
    let g = hset.geometry();
    let mut count = 0u64;
    let mut stack: Vec<(u32, u64)> = alloc::vec![(0, 0)];
    while let Some((lvl, grid)) = stack.pop() {
        let w = fmath::dyadic(lvl as i32);
        let lo = grid as f64 * w;
        let hi = lo + w;
        if g.axis_interval_min(lo, hi) > tau {
            continue;
        }
        if lvl == n {
            count += 1;
            continue;
        }
        stack.push((lvl + 1, grid << 1));
        stack.push((lvl + 1, (grid << 1) | 1));
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoundaryModulus;
    use crate::hset::CtorCell;

    /// Dual-tree DFS: each frame owns a slice of the arena holding the
    /// construction cells that can still reach the grid box within `tau`.
    fn count_near_cantor(hset: &HSet, n: u32, tau: f64) -> u64 {
        let bd = hset.ambient_dim;
        struct Frame {
            lvl: u32,
            grid: [u64; 2],
            start: usize,
            len: usize,
        }
        let mut arena: Vec<CtorCell> = alloc::vec![hset.root_cell()];
        let mut stack = alloc::vec![Frame {
            lvl: 0,
            grid: [0, 0],
            start: 0,
            len: 1
        }];
        let mut count = 0u64;
        let mut scratch: Vec<CtorCell> = Vec::with_capacity(256);
        let mut desc: Vec<CtorCell> = Vec::with_capacity(256);

        while let Some(frame) = stack.pop() {
            let Frame {
                lvl,
                grid,
                start,
                len,
            } = frame;
            arena.truncate(start + len);

            let w = fmath::dyadic(lvl as i32);
            let mut lo = [0.0f64; 2];
            let mut hi = [0.0f64; 2];
            for a in 0..bd {
                lo[a] = grid[a] as f64 * w;
                hi[a] = lo[a] + w;
            }

            // refine active construction cells down to the box scale, keeping
            // those still within tau of the box
            scratch.clear();
            scratch.extend_from_slice(&arena[start..start + len]);
            let active_start = arena.len();
            let mut kept = 0usize;
            while let Some(cell) = scratch.pop() {
                let side = hset.cell_side(cell.level);
                let half = 0.5 * side;
                let mut gap = 0.0f64;
                for a in 0..bd {
                    let g = (cell.center[a] - half - hi[a]).max(lo[a] - (cell.center[a] + half));
                    gap = gap.max(g);
                }
                if gap > tau {
                    continue;
                }
                if side > w && cell.level < hset.depth {
                    hset.children_into(&cell, &mut scratch);
                } else {
                    arena.push(cell);
                    kept += 1;
                }
            }
            if kept == 0 {
                arena.truncate(active_start);
                continue;
            }
            if lvl == n {
                // exact test against the approximant; survivors already sitting
                // at the approximant depth passed it during filtering
                let mut near = arena[active_start..].iter().any(|c| c.level >= hset.depth);
                if !near {
                    desc.clear();
                    desc.extend(
                        arena[active_start..]
                            .iter()
                            .filter(|c| c.level < hset.depth),
                    );
                    while let Some(cell) = desc.pop() {
                        let half = 0.5 * hset.cell_side(cell.level);
                        let mut gap = 0.0f64;
                        for a in 0..bd {
                            let g = (cell.center[a] - half - hi[a])
                                .max(lo[a] - (cell.center[a] + half));
                            gap = gap.max(g);
                        }
                        if gap > tau {
                            continue;
                        }
                        if cell.level >= hset.depth {
                            near = true;
                            break;
                        }
                        hset.children_into(&cell, &mut desc);
                    }
                }
                if near {
                    count += 1;
                }
                arena.truncate(active_start);
                continue;
            }
            let children: u64 = 1 << bd;
            for c in 0..children {
                let mut g2 = [0u64; 2];
                for a in 0..bd {
                    g2[a] = (grid[a] << 1) | ((c >> a) & 1);
                }
                stack.push(Frame {
                    lvl: lvl + 1,
                    grid: g2,
                    start: active_start,
                    len: kept,
                });
            }
        }
        count
    }

    fn const_domain(dim: usize, sigma: f64) -> DomainSpec {
        DomainSpec::constant(
            dim,
            2.0,
            alloc::vec![BoundaryModulus::power(sigma, 1.0); dim - 1],
        )
        .unwrap()
    }

    #[test]
    fn resolutions_examples() {
        // phi(t) = t^2: k=0 -> phi(2^-3) = 2^-6 exactly on the bracket edge
        let m = alloc::vec![BoundaryModulus::power(2.0, 1.0)];
        assert_eq!(level_resolutions(&m, 0).unwrap(), alloc::vec![6]);
        assert_eq!(level_resolutions(&m, 5).unwrap(), alloc::vec![16]);
        // phi(t) = 0.3 t^2: bracket search -> 2^-8 <= 0.0046875 < 2^-7
        let m = alloc::vec![BoundaryModulus::power(2.0, 0.3)];
        assert_eq!(level_resolutions(&m, 0).unwrap(), alloc::vec![8]);
        // monotone in k
        let m = alloc::vec![BoundaryModulus::power(2.0, 1.0)];
        let mut prev = 0;
        for k in 0..20 {
            let n = level_resolutions(&m, k).unwrap()[0];
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn hset_resolution_rule() {
        // sigma=2: phi0(2^{-k-4}) = 2^{-2k-8}, so n = 2k+9
        for k in 0..=8u32 {
            assert_eq!(hset_level_resolution(2.0, k).unwrap(), 2 * k + 9);
        }
        // sigma=3: n = 3k+13
        for k in 0..=6u32 {
            assert_eq!(hset_level_resolution(3.0, k).unwrap(), 3 * k + 13);
        }
    }

    #[test]
    fn constant_psi_tree_exact() {
        // psi == 2, d=2, phi(t)=t^2: c_plus at the root is 1.5, heights 2^-k-1
        let dom = const_domain(2, 2.0);
        let tree = build_tree(&dom, 3, &BuildLimits::default()).unwrap();
        assert_eq!(tree.levels[0][0].c_plus, 1.5);
        for k in 1..=3usize {
            let n = tree.resolutions[k][0];
            assert_eq!(n, 2 * k as u32 + 6);
            for cell in &tree.levels[k] {
                assert_eq!(cell.c_plus - cell.c_minus, fmath::dyadic(k as i32 + 1));
            }
        }
        // covered measure: geometric sum of slab heights = 2 - 2^-4
        let audit = partition_audit(&tree);
        assert!((audit.covered_measure - 1.9375).abs() < 1e-12);
        assert!(audit.tiling_exact);
        assert!(audit.chaining_exact);
    }

    #[test]
    fn branching_jumps_by_sigma() {
        // integer sigma: branching is 2^{sigma(d-1)} exactly at refining levels
        let dom = const_domain(2, 2.0);
        let tree = build_tree(&dom, 3, &BuildLimits::default()).unwrap();
        let audit = partition_audit(&tree);
        for la in &audit.levels[2..] {
            assert_eq!(la.branching_max, 4); // 2^{2*1}
        }
    }

    #[test]
    fn hset_tree_small_d2() {
        let h = HSet::build(0.5, 2, 12, HSetKind::Cantor).unwrap();
        let dom = DomainSpec::hset_cusp(2, 2.0, h, 0.0).unwrap();
        let tree = build_hset_tree(&dom, 2, &BuildLimits::default()).unwrap();
        let audit = partition_audit(&tree);
        assert!(audit.tiling_exact);
        assert!(audit.chaining_exact);
        // root is always near: the set lives inside the base cube
        assert_eq!(tree.levels[0][0].role, Role::NearGamma);
        // far cells carry tails, near cells do not
        for cell in &tree.levels[1] {
            match cell.role {
                Role::FarGamma => assert!(cell.tail_top.is_some()),
                Role::NearGamma => assert!(cell.tail_top.is_none()),
                Role::Interior => panic!("pruned tree has no interior role"),
            }
        }
        // level-2 cells descend only from near parents
        for cell in &tree.levels[2] {
            assert_eq!(tree.levels[1][cell.parent as usize].role, Role::NearGamma);
        }
    }

    #[test]
    fn far_cell_tails_reach_the_graph() {
        // every in-domain point above a far cell lies in that cell's tail
        let h = HSet::build(0.5, 2, 12, HSetKind::Cantor).unwrap();
        let dom = DomainSpec::hset_cusp(2, 2.0, h, 0.0).unwrap();
        let tree = build_hset_tree(&dom, 2, &BuildLimits::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        for cell in tree.levels[1]
            .iter()
            .filter(|c| c.role == Role::FarGamma)
            .take(50)
        {
            let (lo, hi) = tree.base_box(cell);
            let top = cell.tail_top.unwrap();
            for _ in 0..20 {
                let x = lo[0] + (hi[0] - lo[0]) * rng.random::<f64>();
                let psi = tree.domain.psi_unchecked(&[x]);
                // tail cap dominates the graph over the base
                assert!(top >= psi - 1e-12);
                let xd = cell.c_plus + (psi - cell.c_plus) * rng.random::<f64>();
                if xd < psi {
                    assert!(xd >= cell.c_plus && xd <= top + 1e-12);
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn product_count_matches_dual_tree_oracle() {
        // the separable product count must agree with the brute-force
        // simultaneous grid/construction descent
        let h = HSet::build(1.0, 3, 7, HSetKind::Cantor).unwrap();
        for k in 0..=2u32 {
            let n = hset_level_resolution(2.0, k).unwrap();
            let tau = fmath::dyadic(n as i32);
            assert_eq!(
                near_cell_count(&h, n),
                count_near_cantor(&h, n, tau),
                "k={k}"
            );
        }
        let h15 = HSet::build(1.5, 3, 9, HSetKind::Cantor).unwrap();
        for n in [6u32, 9] {
            let tau = fmath::dyadic(n as i32);
            assert_eq!(
                near_cell_count(&h15, n),
                count_near_cantor(&h15, n, tau),
                "n={n}"
            );
        }
    }

    #[test]
    fn near_count_matches_materialized() {
        let h = HSet::build(0.5, 2, 12, HSetKind::Cantor).unwrap();
        let dom = DomainSpec::hset_cusp(2, 2.0, h, 0.0).unwrap();
        let tree = build_hset_tree(&dom, 3, &BuildLimits::default()).unwrap();
        for k in 1..=3usize {
            let n = tree.resolutions[k][0];
            let fast = near_cell_count(dom.hset().unwrap(), n);
            let slow = tree.near_count(k) as u64;
            assert_eq!(fast, slow, "level {k}");
        }
    }

    #[test]
    fn near_count_plane_rows() {
        // theta=1 slab in d=3: exactly 4 rows of cells hug the line
        let h = HSet::build(1.0, 3, 1, HSetKind::Plane).unwrap();
        for n in [5u32, 9, 13] {
            let c = near_cell_count(&h, n);
            assert_eq!(c, 4 << n, "n={n}");
        }
    }

    #[test]
    fn probe_constant_domain() {
        let dom = const_domain(2, 1.0);
        let report = probe_tree(
            &dom,
            TreeVariant::Full,
            8,
            &ProbeParams {
                samples: 200_000,
                seed: 7,
                tile_checks: 500,
            },
        )
        .unwrap();
        assert!(report.tiling_exact);
        assert!(report.chaining_exact);
        // psi == 2: heights are exactly 2^-k-1, ratio 1/2
        assert!((report.height_x2k_min - 0.5).abs() < 1e-12);
        assert!((report.height_x2k_max - 0.5).abs() < 1e-12);
        // fringe volume is 2^-9; the MC gap stays within bound + 3 se
        let defect = report.mc_omega_volume - report.mc_covered_volume;
        assert!(defect >= 0.0);
        assert!(
            defect <= report.covering_defect_bound + fmath::dyadic(9) + 3.0 * report.fringe_stderr
        );
    }

    #[test]
    fn rejects_oversized_materialization() {
        let h = HSet::build(1.0, 3, 6, HSetKind::Cantor).unwrap();
        let dom = DomainSpec::hset_cusp(3, 2.0, h, 0.0).unwrap();
        // level 1 alone is 2^22 cells for sigma=2 in d=3
        let err = build_hset_tree(&dom, 1, &BuildLimits { max_cells: 100_000 }).unwrap_err();
        match err {
            PartitionError::TooManyCells { level: 1, .. } => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
