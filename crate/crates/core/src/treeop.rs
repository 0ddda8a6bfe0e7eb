//! Weighted summation operators on rooted trees: `(S f)(v) = v(v) * sum of
//! g*f along the root path`, the geometric-decay condition on the weights,
//! and numerical bounds for the `lp -> lq` operator norm.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fmath;
use crate::poly::LqExponent;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TreeOpError {
    #[error("tree must have exactly one root (parent -1)")]
    RootCount,
    #[error("parent index {0} out of range")]
    ParentRange(i64),
    #[error("parent links contain a cycle")]
    Cycle,
    #[error("weights must be nonnegative and finite")]
    BadWeights,
    #[error("lengths of parents, g, v differ")]
    LengthMismatch,
    #[error("spectral method needs p = q = 2")]
    SpectralNeeds2,
    #[error("exhaustive method supports at most {0} vertices")]
    TooLargeForExhaustive(usize),
    #[error("decay condition requires finite q")]
    DecayNeedsFiniteQ,
    #[error("decay condition fails, bound check precondition violated")]
    DecayFails,
}

#[derive(Debug, Clone)]
pub struct WeightedTree {
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    root: usize,
    /// Topological order, parents first.
    topo: Vec<usize>,
    pub g: Vec<f64>,
    pub v: Vec<f64>,
}

pub const EXHAUSTIVE_LIMIT: usize = 14;

impl WeightedTree {
    /// Build from parent links (`-1` marks the root).
    pub fn new(parents: &[i64], g: Vec<f64>, v: Vec<f64>) -> Result<Self, TreeOpError> {
        let n = parents.len();
        if g.len() != n || v.len() != n || n == 0 {
            return Err(TreeOpError::LengthMismatch);
        }
        if g.iter()
            .chain(v.iter())
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return Err(TreeOpError::BadWeights);
        }
        let mut root = None;
        let mut plinks = Vec::with_capacity(n);
        let mut children = alloc::vec![Vec::new(); n];
        for (i, &p) in parents.iter().enumerate() {
            if p < 0 {
                if root.replace(i).is_some() {
                    return Err(TreeOpError::RootCount);
                }
                plinks.push(None);
            } else {
                let p = p as usize;
                if p >= n {
                    return Err(TreeOpError::ParentRange(parents[i]));
                }
                plinks.push(Some(p));
                children[p].push(i);
            }
        }
        let root = root.ok_or(TreeOpError::RootCount)?;
        // BFS from the root; anything unreached sits on a cycle
        let mut topo = Vec::with_capacity(n);
        let mut queue = alloc::vec![root];
        while let Some(x) = queue.pop() {
            topo.push(x);
            queue.extend(children[x].iter().copied());
        }
        if topo.len() != n {
            return Err(TreeOpError::Cycle);
        }
        Ok(WeightedTree {
            parents: plinks,
            children,
            root,
            topo,
            g,
            v,
        })
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// One root-to-leaf prefix pass: `out(v) = v(v) * sum_{u <= v} g(u) f(u)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut prefix = alloc::vec![0.0f64; n];
        let mut out = alloc::vec![0.0f64; n];
        for &x in &self.topo {
            let up = self.parents[x].map_or(0.0, |p| prefix[p]);
            prefix[x] = up + self.g[x] * f[x];
            out[x] = self.v[x] * prefix[x];
        }
        out
    }

    /// Depth-indexed descendant sets `V_j(x)`.
    fn depths_below(&self, x: usize) -> Vec<Vec<usize>> {
        let mut levels = alloc::vec![alloc::vec![x]];
        loop {
            let last = levels.last().unwrap();
            let mut next = Vec::new();
            for &y in last {
                next.extend(self.children[y].iter().copied());
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        levels
    }

    /// Exhaustive check of `sum_{V_j(x)} v^q <= b 2^{-aj} v^q(x)` over all
    /// vertices and all depths present.
    pub fn decay_check(&self, a: f64, b: f64, q: f64) -> Result<bool, TreeOpError> {
        if !q.is_finite() {
            return Err(TreeOpError::DecayNeedsFiniteQ);
        }
        for x in 0..self.len() {
            let levels = self.depths_below(x);
            let vxq = fmath::pow(self.v[x], q);
            for (j, level) in levels.iter().enumerate() {
                let s: f64 = level.iter().map(|&y| fmath::pow(self.v[y], q)).sum();
                if s > b * fmath::exp2(-a * j as f64) * vxq * (1.0 + 1e-12) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Dense `lp -> lq` matrix `M[i][j] = v_i g_j [j <= i]`.
    fn path_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut cur = Some(i);
            while let Some(x) = cur {
                m[(i, x)] = self.v[i] * self.g[x];
                cur = self.parents[x];
            }
        }
        m
    }

    fn ratio(&self, m: &DMatrix<f64>, f: &[f64], p: LqExponent, q: LqExponent) -> f64 {
        let nf = vec_norm(f, p);
        if nf == 0.0 {
            return 0.0;
        }
        let mut out = alloc::vec![0.0f64; self.len()];
        for i in 0..self.len() {
            let mut acc = 0.0;
            for j in 0..self.len() {
                acc += m[(i, j)] * f[j];
            }
            out[i] = acc;
        }
        vec_norm(&out, q) / nf
    }

    /// Multi-start nonlinear power iteration over the nonnegative cone (the
    /// kernel is nonnegative, so the norm is attained on f >= 0). Returns a
    /// certified lower bound; exact for p = 1 or q = infinity, where the
    /// extremal vectors are known.
    fn ascent_norm(&self, p: LqExponent, q: LqExponent, starts: usize, seed: u64) -> NormEstimate {
        let n = self.len();
        let m = self.path_matrix();
        // p = 1: extreme points of the ball are coordinate vectors
        if let LqExponent::Fin(pv) = p {
            if pv == 1.0 {
                let mut best = 0.0f64;
                for j in 0..n {
                    let col: Vec<f64> = (0..n).map(|i| m[(i, j)]).collect();
                    best = best.max(vec_norm(&col, q));
                }
                return NormEstimate {
                    value: best,
                    certainty: Certainty::Exact,
                };
            }
        }
        // q = infinity: the norm is the worst row measured in the dual norm
        if q == LqExponent::Inf {
            let pprime = match p {
                LqExponent::Inf => LqExponent::Fin(1.0),
                LqExponent::Fin(pv) if pv == 1.0 => LqExponent::Inf,
                LqExponent::Fin(pv) => LqExponent::Fin(pv / (pv - 1.0)),
            };
            let mut best = 0.0f64;
            for i in 0..n {
                let row: Vec<f64> = (0..n).map(|j| m[(i, j)]).collect();
                best = best.max(vec_norm(&row, pprime));
            }
            return NormEstimate {
                value: best,
                certainty: Certainty::Exact,
            };
        }
        // p = infinity, q finite: f == 1 is extremal (monotone kernel)
        if p == LqExponent::Inf {
            let ones = alloc::vec![1.0f64; n];
            let value = self.ratio(&m, &ones, p, q);
            return NormEstimate {
                value,
                certainty: Certainty::Exact,
            };
        }
        let (pv, qv) = match (p, q) {
            (LqExponent::Fin(a), LqExponent::Fin(b)) => (a, b),
            _ => unreachable!(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0.0f64;
        for s in 0..starts.max(1) {
            let mut f: Vec<f64> = if s == 0 {
                alloc::vec![1.0; n]
            } else {
                (0..n).map(|_| rng.random::<f64>() + 1e-3).collect()
            };
            normalize(&mut f, pv);
            let mut last = 0.0f64;
            for _ in 0..200 {
                // y = M f; steepest-ascent fixed point in the nonneg cone
                let mut y = alloc::vec![0.0f64; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += m[(i, j)] * f[j];
                    }
                    y[i] = acc;
                }
                let mut u = alloc::vec![0.0f64; n];
                for j in 0..n {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += m[(i, j)] * fmath::pow(y[i].max(0.0), qv - 1.0);
                    }
                    u[j] = acc;
                }
                for x in u.iter_mut() {
                    *x = fmath::pow(x.max(0.0), 1.0 / (pv - 1.0).max(1e-9));
                }
                normalize(&mut u, pv);
                f = u;
                let cur = self.ratio(&m, &f, p, q);
                if (cur - last).abs() <= 1e-13 * cur.max(1.0) {
                    break;
                }
                last = cur;
            }
            best = best.max(self.ratio(&m, &f, p, q));
        }
        NormEstimate {
            value: best,
            certainty: Certainty::LowerBound,
        }
    }

    /// Operator norm of the summation map between `lp` and `lq`.
    pub fn operator_norm(
        &self,
        p: LqExponent,
        q: LqExponent,
        method: NormMethod,
    ) -> Result<NormEstimate, TreeOpError> {
        match method {
            NormMethod::Spectral => {
                if p != LqExponent::Fin(2.0) || q != LqExponent::Fin(2.0) {
                    return Err(TreeOpError::SpectralNeeds2);
                }
                let m = self.path_matrix();
                let svd = m.svd(false, false);
                let value = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
                Ok(NormEstimate {
                    value,
                    certainty: Certainty::Exact,
                })
            }
            NormMethod::Ascent => Ok(self.ascent_norm(p, q, 8, 0x5eed)),
            NormMethod::Exhaustive => {
                if self.len() > EXHAUSTIVE_LIMIT {
                    return Err(TreeOpError::TooLargeForExhaustive(EXHAUSTIVE_LIMIT));
                }
                Ok(self.ascent_norm(p, q, 64, 0x5eed))
            }
        }
    }

    /// Compare the operator norm against `sup g*v` under the decay
    /// condition; `pass` means the norm stays below `ceiling` times the sup.
    pub fn bound_check(
        &self,
        a: f64,
        b: f64,
        p: LqExponent,
        q: LqExponent,
        ceiling: f64,
    ) -> Result<BoundReport, TreeOpError> {
        let qv = match q {
            LqExponent::Fin(v) => v,
            LqExponent::Inf => return Err(TreeOpError::DecayNeedsFiniteQ),
        };
        if !self.decay_check(a, b, qv)? {
            return Err(TreeOpError::DecayFails);
        }
        let est = if p == LqExponent::Fin(2.0) && q == LqExponent::Fin(2.0) {
            self.operator_norm(p, q, NormMethod::Spectral)?
        } else {
            self.operator_norm(p, q, NormMethod::Ascent)?
        };
        let bound: f64 = self
            .g
            .iter()
            .zip(&self.v)
            .map(|(g, v)| g * v)
            .fold(0.0f64, f64::max);
        Ok(BoundReport {
            norm_lb: est.value,
            bound,
            ratio: if bound > 0.0 {
                est.value / bound
            } else {
                f64::INFINITY
            },
            pass: est.value <= ceiling * bound * (1.0 + 1e-12),
        })
    }
}

fn vec_norm(x: &[f64], p: LqExponent) -> f64 {
    match p {
        LqExponent::Inf => x.iter().fold(0.0f64, |m, v| m.max(fmath::abs(*v))),
        LqExponent::Fin(pv) => fmath::pow(
            x.iter()
                .map(|v| fmath::pow(fmath::abs(*v), pv))
                .sum::<f64>(),
            1.0 / pv,
        ),
    }
}

fn normalize(x: &mut [f64], p: f64) {
    let n = fmath::pow(
        x.iter().map(|v| fmath::pow(fmath::abs(*v), p)).sum::<f64>(),
        1.0 / p,
    );
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum NormMethod {
    Spectral,
    Ascent,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certainty {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    pub certainty: Certainty,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    pub norm_lb: f64,
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Deterministic random tree with weights satisfying the decay condition at
/// `(a, b) = (1, 1)` for the given `q`: `v` decays geometrically fast enough
/// to beat the worst-case branching.
pub fn random_decaying_tree(n: usize, q: f64, rng: &mut impl Rng) -> WeightedTree {
    let mut parents = alloc::vec![-1i64];
    for i in 1..n {
        parents.push(rng.random_range(0..i) as i64);
    }
    let mut deg = alloc::vec![0usize; n];
    for &p in &parents[1..] {
        deg[p as usize] += 1;
    }
    let maxdeg = deg.iter().cloned().max().unwrap_or(1).max(1);
    let decay = fmath::pow(2.0 * maxdeg as f64, -1.0 / q);
    let mut depth = alloc::vec![0u32; n];
    for i in 1..n {
        depth[i] = depth[parents[i] as usize] + 1;
    }
    let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0).collect();
    let v: Vec<f64> = depth
        .iter()
        .map(|&d| fmath::powi(decay, d as i32))
        .collect();
    WeightedTree::new(&parents, g, v).expect("generated tree is valid")
}
