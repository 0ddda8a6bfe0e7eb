//! Cusp domains: regions `0 < x_d < psi(x')` over the unit base cube, where
//! the graph function `psi` has a prescribed (possibly degenerate) modulus of
//! continuity per base axis.

use alloc::vec::Vec;

use rand::Rng;

use crate::fmath;
use crate::hset::{GammaGeometry, HSet, MAX_AMBIENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModulusKind {
    Power,
    PowerLog,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DomainError {
    #[error("t={0} outside (0,1]")]
    TOutOfRange(f64),
    #[error("modulus parameters invalid: {0}")]
    BadModulus(&'static str),
    #[error("dimension {0} unsupported (need 2..=4)")]
    BadDim(usize),
    #[error("h-set cusp requested but no h-set attached")]
    MissingHSet,
    #[error("sampled psi grid invalid: {0}")]
    BadSample(&'static str),
    #[error("min psi = {0} outside [1,2]")]
    PsiMinRange(f64),
    #[error("modulus invariant `{name}` fails at t=2^-{j}")]
    ModulusInvariant { name: &'static str, j: u32 },
}

/// Per-axis modulus of continuity `phi(t)`, either `a t^sigma` or
/// `a t^sigma ln(e/t)^beta`, with its doubling constant `a_star`.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct BoundaryModulus {
    pub kind: ModulusKind,
    pub sigma: f64,
    pub scale: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub beta: f64,
    /// Doubling constant; 0 in serialized form means "derive from sigma and beta".
    #[cfg_attr(feature = "serde", serde(default))]
    pub a_star: f64,
}

impl BoundaryModulus {
    /// Fill in the derived doubling constant after deserialization.
    pub fn normalize(&mut self) {
        if self.a_star <= 0.0 {
            self.a_star = fmath::pow(2.0, self.sigma + fmath::abs(self.beta));
        }
    }
}

impl BoundaryModulus {
    pub fn power(sigma: f64, scale: f64) -> Self {
        BoundaryModulus {
            kind: ModulusKind::Power,
            sigma,
            scale,
            beta: 0.0,
            a_star: fmath::pow(2.0, sigma),
        }
    }

    pub fn power_log(sigma: f64, scale: f64, beta: f64) -> Self {
        BoundaryModulus {
            kind: ModulusKind::PowerLog,
            sigma,
            scale,
            beta,
            a_star: fmath::pow(2.0, sigma + fmath::abs(beta)),
        }
    }

    /// `phi(t)` for `t` in `(0,1]`.
    pub fn eval(&self, t: f64) -> Result<f64, DomainError> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(DomainError::TOutOfRange(t));
        }
        Ok(self.eval_unchecked(t))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            ModulusKind::Power => self.scale * fmath::pow(t, self.sigma),
            ModulusKind::PowerLog => {
                self.scale * fmath::pow(t, self.sigma) * fmath::pow(1.0 - fmath::ln(t), self.beta)
            }
        }
    }

    /// The scale `t` at which `phi(t) = w`, clamped to `(0, 1]`. Used to
    /// compare cell widths across axes on a common footing.
    pub fn inverse(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match self.kind {
            ModulusKind::Power => fmath::pow(w / self.scale, 1.0 / self.sigma).min(1.0),
            ModulusKind::PowerLog => {
                if self.eval_unchecked(1.0) <= w {
                    return 1.0;
                }
                let (mut lo, mut hi) = (1e-300, 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.eval_unchecked(mid) < w {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Validates monotonicity, `phi(t) <= a_star t`, and the doubling bound
    /// on the dyadic grid `t = 2^-j`, `j = 0..=40`.
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.sigma < 1.0 || !(self.scale > 0.0 && self.scale <= 1.0) || self.a_star < 1.0 {
            return Err(DomainError::BadModulus(
                "need sigma >= 1, 0 < scale <= 1, a_star >= 1",
            ));
        }
        let mut prev = f64::INFINITY;
        for j in 0..=40u32 {
            let t = fmath::dyadic(j as i32);
            let v = self.eval_unchecked(t);
            if !(v > 0.0) {
                return Err(DomainError::ModulusInvariant {
                    name: "positive",
                    j,
                });
            }
            if v > self.a_star * t * (1.0 + 1e-12) {
                return Err(DomainError::ModulusInvariant {
                    name: "phi <= a_star t",
                    j,
                });
            }
            if v > prev * (1.0 + 1e-12) {
                return Err(DomainError::ModulusInvariant {
                    name: "monotone",
                    j,
                });
            }
            if t <= 0.5 {
                let v2 = self.eval_unchecked(2.0 * t);
                if v2 > self.a_star * v * (1.0 + 1e-12) {
                    return Err(DomainError::ModulusInvariant {
                        name: "doubling",
                        j,
                    });
                }
            }
            prev = v;
        }
        Ok(())
    }
}

/// Evaluate a boundary modulus; thin named wrapper kept for symmetry with the
/// other operations.
pub fn modulus_eval(m: &BoundaryModulus, t: f64) -> Result<f64, DomainError> {
    m.eval(t)
}

/// The graph function.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum PsiSpec {
    Constant {
        value: f64,
    },
    /// `psi(x') = 2 - dist(x', Gamma)^{1/sigma}` with `Gamma` an h-set.
    HsetCusp {
        sigma: f64,
        hset: HSet,
    },
    /// Uniform grid samples with multilinear interpolation.
    ExplicitSample {
        resolution: usize,
        values: Vec<f64>,
    },
}

/// A cusp domain below `psi` over the open unit base cube. `base_offset`
/// records the coordinate convention of the original description (0 for the
/// unit cube, -0.5 for the centered cube); all internal arithmetic uses unit
/// coordinates.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct DomainSpec {
    pub dim: usize,
    pub moduli: Vec<BoundaryModulus>,
    pub psi: PsiSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub base_offset: f64,
}

impl DomainSpec {
    pub fn constant(
        dim: usize,
        value: f64,
        moduli: Vec<BoundaryModulus>,
    ) -> Result<Self, DomainError> {
        let d = DomainSpec {
            dim,
            moduli,
            psi: PsiSpec::Constant { value },
            base_offset: 0.0,
        };
        d.validate()?;
        Ok(d)
    }

    /// The moduli for an h-set cusp are `phi_i(t) = (1/sigma) t^sigma`; the
    /// prefactor `1/sigma <= 1` keeps the sampled graph-continuity check
    /// comfortably inside its budget for every admissible `sigma`.
    pub fn hset_cusp(
        dim: usize,
        sigma: f64,
        hset: HSet,
        base_offset: f64,
    ) -> Result<Self, DomainError> {
        if hset.ambient_dim != dim - 1 {
            return Err(DomainError::BadDim(dim));
        }
        let moduli = alloc::vec![BoundaryModulus::power(sigma, 1.0 / sigma); dim - 1];
        let d = DomainSpec {
            dim,
            moduli,
            psi: PsiSpec::HsetCusp { sigma, hset },
            base_offset,
        };
        d.validate()?;
        Ok(d)
    }

    /// Repair derived fields after deserialization, then validate.
    pub fn normalize(&mut self) -> Result<(), DomainError> {
        for m in &mut self.moduli {
            m.normalize();
        }
        if let PsiSpec::HsetCusp { hset, .. } = &self.psi {
            hset.validate()
                .map_err(|_| DomainError::BadSample("invalid h-set description"))?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if !(2..=MAX_AMBIENT + 1).contains(&self.dim) {
            return Err(DomainError::BadDim(self.dim));
        }
        if self.moduli.len() != self.dim - 1 {
            return Err(DomainError::BadModulus("need exactly d-1 moduli"));
        }
        for m in &self.moduli {
            m.validate()?;
        }
        match &self.psi {
            PsiSpec::Constant { value } => {
                if !(1.0..=2.0).contains(value) {
                    return Err(DomainError::PsiMinRange(*value));
                }
            }
            PsiSpec::HsetCusp { sigma, .. } => {
                if *sigma < 1.0 {
                    return Err(DomainError::BadModulus("cusp order sigma must be >= 1"));
                }
                // dist <= 1 on the unit cube, so min psi = 2 - (max dist)^{1/sigma} >= 1
            }
            PsiSpec::ExplicitSample { resolution, values } => {
                let k = self.dim - 1;
                let expect = (resolution + 1).pow(k as u32);
                if *resolution < 1 || values.len() != expect {
                    return Err(DomainError::BadSample("grid size mismatch"));
                }
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                if !(1.0..=2.0).contains(&min) {
                    return Err(DomainError::PsiMinRange(min));
                }
            }
        }
        Ok(())
    }

    pub fn base_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn hset(&self) -> Option<&HSet> {
        match &self.psi {
            PsiSpec::HsetCusp { hset, .. } => Some(hset),
            _ => None,
        }
    }

    /// `psi(x')` for `x'` in the closed base cube (unit coordinates).
    pub fn psi_eval(&self, xprime: &[f64]) -> Result<f64, DomainError> {
        for &c in &xprime[..self.base_dim()] {
            if !(0.0..=1.0).contains(&c) {
                return Err(DomainError::BadSample("point outside the closed base cube"));
            }
        }
        Ok(self.psi_unchecked(xprime))
    }

    #[inline]
    pub(crate) fn psi_unchecked(&self, xprime: &[f64]) -> f64 {
        match &self.psi {
            PsiSpec::Constant { value } => *value,
            PsiSpec::HsetCusp { sigma, hset } => {
                let d = hset.geometry().point_dist(xprime);
                2.0 - fmath::pow(d, 1.0 / *sigma)
            }
            PsiSpec::ExplicitSample { resolution, values } => {
                interp_multilinear(*resolution, values, xprime, self.base_dim())
            }
        }
    }

    /// Upper bound used for bounding boxes: `psi <= 2` for constant and
    /// h-set graphs; sampled graphs report their grid maximum.
    pub fn psi_sup(&self) -> f64 {
        match &self.psi {
            PsiSpec::Constant { value } => *value,
            PsiSpec::HsetCusp { .. } => 2.0,
            PsiSpec::ExplicitSample { values, .. } => {
                values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Strict membership: `x'` inside the open base cube and `0 < x_d < psi(x')`.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim {
            return false;
        }
        let k = self.base_dim();
        for &c in &x[..k] {
            if !(c > 0.0 && c < 1.0) {
                return false;
            }
        }
        let xd = x[k];
        xd > 0.0 && xd < self.psi_unchecked(&x[..k])
    }

    /// Infimum of `psi` over the closed axis box `[lo,hi]`, within `tol`.
    pub fn psi_inf_box(&self, lo: &[f64], hi: &[f64], tol: f64) -> f64 {
        let k = self.base_dim();
        match &self.psi {
            PsiSpec::Constant { value } => *value,
            PsiSpec::HsetCusp { sigma, hset } => {
                let g = hset.geometry();
                let dmax = g.box_max_dist(lo, hi, tol, k);
                2.0 - fmath::pow(dmax, 1.0 / *sigma)
            }
            PsiSpec::ExplicitSample { .. } => {
                // dense-grid minimization at the requested tolerance
                let mut steps = [1usize; MAX_AMBIENT];
                for a in 0..k {
                    steps[a] =
                        (fmath::ceil((hi[a] - lo[a]) / tol.max(1e-9)) as usize).clamp(1, 512);
                }
                let mut best = f64::INFINITY;
                let mut idx = [0usize; MAX_AMBIENT];
                loop {
                    let mut x = [0.0; MAX_AMBIENT];
                    for a in 0..k {
                        x[a] = lo[a] + (hi[a] - lo[a]) * idx[a] as f64 / steps[a] as f64;
                    }
                    best = best.min(self.psi_unchecked(&x[..k]));
                    let mut a = 0;
                    loop {
                        if a == k {
                            return best;
                        }
                        idx[a] += 1;
                        if idx[a] <= steps[a] {
                            break;
                        }
                        idx[a] = 0;
                        a += 1;
                    }
                }
            }
        }
    }

    /// Supremum of `psi` over the closed axis box, within `tol` (h-set graphs).
    pub fn psi_sup_box(&self, lo: &[f64], hi: &[f64], _tol: f64) -> f64 {
        let k = self.base_dim();
        match &self.psi {
            PsiSpec::Constant { value } => *value,
            PsiSpec::HsetCusp { sigma, hset } => {
                let dmin = hset.geometry().box_min_dist(&lo[..k], &hi[..k]);
                2.0 - fmath::pow(dmin, 1.0 / *sigma)
            }
            PsiSpec::ExplicitSample { .. } => self.psi_sup(),
        }
    }

    pub fn gamma_geometry(&self) -> Option<GammaGeometry<'_>> {
        self.hset().map(|h| h.geometry())
    }

    /// Sampled graph-continuity check: for random pairs, the change of `psi`
    /// stays below the scale `t` at which every coordinate gap fits under its
    /// modulus. Returns the worst observed `|psi(x)-psi(y)| / t` ratio.
    pub fn holder_check(&self, pairs: usize, rng: &mut impl Rng) -> f64 {
        let k = self.base_dim();
        let mut worst = 0.0f64;
        for _ in 0..pairs {
            let mut x = [0.0; MAX_AMBIENT];
            let mut y = [0.0; MAX_AMBIENT];
            for a in 0..k {
                x[a] = rng.random::<f64>();
                // bias towards nearby pairs where the moduli bite
                let span = fmath::pow(10.0, -3.0 * rng.random::<f64>());
                y[a] = (x[a] + span * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
            }
            // smallest t with |x_a - y_a| <= phi_a(t) for all a
            let mut t = 0.0f64;
            for a in 0..k {
                t = t.max(self.moduli[a].inverse(fmath::abs(x[a] - y[a])));
            }
            if t <= 0.0 || t > 1.0 {
                continue;
            }
            let dp = fmath::abs(self.psi_unchecked(&x[..k]) - self.psi_unchecked(&y[..k]));
            worst = worst.max(dp / t);
        }
        worst
    }
}

fn interp_multilinear(res: usize, values: &[f64], x: &[f64], k: usize) -> f64 {
    let n = res;
    let mut base = [0usize; MAX_AMBIENT];
    let mut frac = [0.0f64; MAX_AMBIENT];
    for a in 0..k {
        let t = (x[a].clamp(0.0, 1.0)) * n as f64;
        let i = (t as usize).min(n - 1);
        base[a] = i;
        frac[a] = t - i as f64;
    }
    let stride = n + 1;
    let mut acc = 0.0;
    for corner in 0..(1usize << k) {
        let mut w = 1.0;
        let mut idx = 0usize;
        for a in 0..k {
            let up = (corner >> a) & 1 == 1;
            w *= if up { frac[a] } else { 1.0 - frac[a] };
            idx = idx * stride + base[a] + if up { 1 } else { 0 };
        }
        acc += w * values[idx];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hset::HSetKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn modulus_eval_examples() {
        let m = BoundaryModulus::power(2.0, 1.0);
        assert_eq!(modulus_eval(&m, 0.5).unwrap(), 0.25);
        let ident = BoundaryModulus::power(1.0, 1.0);
        for &t in &[0.1, 0.35, 1.0] {
            assert!((modulus_eval(&ident, t).unwrap() - t).abs() < 1e-15);
        }
        let scaled = BoundaryModulus::power(2.0, 0.3);
        assert!((modulus_eval(&scaled, 0.125).unwrap() - 0.0046875).abs() < 1e-18);
        assert!(modulus_eval(&m, 0.0).is_err());
        assert!(modulus_eval(&m, 1.5).is_err());
    }

    #[test]
    fn modulus_grid_invariants() {
        for m in [
            BoundaryModulus::power(1.0, 1.0),
            BoundaryModulus::power(2.0, 0.3),
            BoundaryModulus::power(3.0, 1.0),
            BoundaryModulus::power_log(2.0, 0.5, -1.0),
            BoundaryModulus::power_log(1.0, 1.0, 0.0),
        ] {
            m.validate().unwrap();
        }
    }

    #[test]
    fn modulus_inverse_roundtrip() {
        let m = BoundaryModulus::power_log(2.0, 0.7, -0.5);
        for &t in &[1e-6, 1e-3, 0.2, 0.9] {
            let w = m.eval(t).unwrap();
            let back = m.inverse(w);
            assert!((back - t).abs() < 1e-9 * t.max(1e-9), "t={t} back={back}");
        }
    }

    #[test]
    fn psi_eval_examples() {
        let dom =
            DomainSpec::constant(2, 2.0, alloc::vec![BoundaryModulus::power(1.0, 1.0)]).unwrap();
        assert_eq!(dom.psi_eval(&[0.77]).unwrap(), 2.0);

        let h = HSet::build(1.0, 3, 6, HSetKind::Cantor).unwrap();
        let dom = DomainSpec::hset_cusp(3, 2.0, h, 0.0).unwrap();
        // pick a point at known distance 0.25 from the level-6 approximant:
        // the top edge of the base square is >= 0.25 from everything at x2=1.
        let x = [0.5, 0.625];
        let d = dom.hset().unwrap().distance(&x).value;
        let psi = dom.psi_eval(&x).unwrap();
        assert!((psi - (2.0 - d.sqrt())).abs() < 1e-15);

        // on the set itself psi is exactly 2
        let h2 = HSet::build(1.0, 4, 3, HSetKind::Plane).unwrap();
        let dom2 = DomainSpec::hset_cusp(4, 1.0, h2, 0.0).unwrap();
        assert_eq!(dom2.psi_eval(&[0.3, 0.5, 0.5]).unwrap(), 2.0);
    }

    #[test]
    fn psi_direct_formula_case() {
        // distance 0.25, sigma=2 -> psi = 2 - 0.5 = 1.5 exactly
        let h = HSet::build(1.0, 3, 1, HSetKind::Plane).unwrap();
        let dom = DomainSpec::hset_cusp(3, 2.0, h, 0.0).unwrap();
        assert_eq!(dom.hset().unwrap().distance(&[0.3, 0.75]).value, 0.25);
        assert_eq!(dom.psi_eval(&[0.3, 0.75]).unwrap(), 1.5);
    }

    #[test]
    fn contains_examples_and_monotonicity() {
        let dom =
            DomainSpec::constant(2, 2.0, alloc::vec![BoundaryModulus::power(1.0, 1.0)]).unwrap();
        assert!(dom.contains(&[0.5, 1.0]));
        assert!(!dom.contains(&[0.5, 2.0]));
        assert!(!dom.contains(&[0.0, 1.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = rng.random::<f64>();
            let s = 2.0 * rng.random::<f64>();
            if dom.contains(&[x, s]) {
                let s2 = s * rng.random::<f64>();
                if s2 > 0.0 {
                    assert!(dom.contains(&[x, s2]));
                }
            }
        }
    }

    #[test]
    fn holder_check_hset_cusp() {
        let h = HSet::build(1.0, 3, 6, HSetKind::Cantor).unwrap();
        let dom = DomainSpec::hset_cusp(3, 2.0, h, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let worst = dom.holder_check(10_000, &mut rng);
        assert!(worst <= 1.0 + 1e-9, "worst ratio {worst}");
    }

    #[test]
    fn explicit_sample_interp() {
        // psi(x) = 1 + x on a 4-interval grid is reproduced exactly
        let res = 4usize;
        let values: Vec<f64> = (0..=res).map(|i| 1.0 + i as f64 / res as f64).collect();
        let dom = DomainSpec {
            dim: 2,
            moduli: alloc::vec![BoundaryModulus::power(1.0, 1.0)],
            psi: PsiSpec::ExplicitSample {
                resolution: res,
                values,
            },
            base_offset: 0.0,
        };
        dom.validate().unwrap();
        for &x in &[0.0, 0.3, 0.5, 0.77, 1.0] {
            assert!((dom.psi_eval(&[x]).unwrap() - (1.0 + x)).abs() < 1e-12);
        }
        assert!((dom.psi_inf_box(&[0.25], &[0.5], 1e-3) - 1.25).abs() < 1e-9);
    }
}
