//! Decay-rate calculator: exact rational evaluation of the exponents in the
//! entropy-number and width estimates for Sobolev embeddings on cusp
//! domains, the `q_hat` convention, the implicit-scale solver, and the
//! slowly-varying correction factor.
//!
//! All exponent arithmetic is done in `Ratio<i64>`, so rational inputs give
//! bit-identical rational outputs. Degenerate parameter sets (tied minima)
//! are rejected, never silently broken.

use num_rational::Ratio;
use num_traits::Zero;

use crate::fmath;

pub type Rat = Ratio<i64>;

pub fn rat(n: i64, d: i64) -> Rat {
    Ratio::new(n, d)
}

/// An exponent in `[1, +infinity]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ext {
    Fin(Rat),
    Inf,
}

impl Ext {
    pub fn fin(n: i64, d: i64) -> Self {
        Ext::Fin(rat(n, d))
    }

    /// `1/p`, with `1/inf = 0`.
    pub fn recip(&self) -> Rat {
        match self {
            Ext::Fin(r) => r.recip(),
            Ext::Inf => Rat::zero(),
        }
    }

    /// Hölder conjugate.
    pub fn conjugate(&self) -> Ext {
        match self {
            Ext::Inf => Ext::Fin(rat(1, 1)),
            Ext::Fin(r) => {
                if *r == rat(1, 1) {
                    Ext::Inf
                } else {
                    Ext::Fin(*r / (*r - rat(1, 1)))
                }
            }
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Ext::Fin(r) => rat_f64(*r),
            Ext::Inf => f64::INFINITY,
        }
    }

    fn le(&self, other: &Ext) -> bool {
        match (self, other) {
            (_, Ext::Inf) => true,
            (Ext::Inf, Ext::Fin(_)) => false,
            (Ext::Fin(a), Ext::Fin(b)) => a <= b,
        }
    }
}

pub fn rat_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum WidthKind {
    Entropy,
    Kolmogorov,
    Linear,
    Gelfand,
}

/// The slowly varying factor in `prod phi_i(t) = t^{sigma(d-1)} Lambda(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlowVariation {
    Constant,
    /// `Lambda(t) = ln(e/t)^beta` on `(0,1]`.
    LogPower {
        beta: f64,
    },
}

impl SlowVariation {
    /// `psi_Lambda(t) = 1 / Lambda(1/t)` for `t >= 1`.
    pub fn psi(&self, t: f64) -> f64 {
        match self {
            SlowVariation::Constant => 1.0,
            SlowVariation::LogPower { beta } => fmath::pow(1.0 + fmath::ln(t), -beta),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamSet {
    pub p: Ext,
    pub q: Ext,
    pub r: u32,
    pub d: u32,
    pub sigma: Rat,
    pub theta: Option<Rat>,
    pub width: WidthKind,
    pub lambda: SlowVariation,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RateError {
    #[error("parameter out of range: {0}")]
    ParamRange(&'static str),
    #[error("embedding condition fails: r + (sigma(d-1)+1)(1/q-1/p) <= 0")]
    Infeasible,
    #[error("degenerate: {0}")]
    Degenerate(&'static str),
    #[error("no bracket for the implicit-scale equation within [1, 2^64]")]
    NoBracket,
    #[error("t^gamma u(t) is not increasing past the solution")]
    NotIncreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TauKind {
    Tau1,
    Tau2,
    Tau2HatQ,
}

#[derive(Debug, Clone)]
pub struct RatePrediction {
    pub alpha1: Rat,
    pub alpha2: Rat,
    pub thetas: Option<[Rat; 4]>,
    /// Selected regime: index into (alpha1, alpha2) or (theta1..theta4).
    pub j_star: u8,
    /// Signed power of `n` in the final estimate `n^exponent * tau(n)`.
    pub exponent: Rat,
    pub tau: TauKind,
    pub q_hat: Option<Ext>,
}

impl ParamSet {
    fn check_common(&self) -> Result<(), RateError> {
        if !Ext::fin(1, 1).le(&self.p) || !self.p.le(&self.q) {
            return Err(RateError::ParamRange("need 1 <= p <= q <= inf"));
        }
        if self.r < 1 {
            return Err(RateError::ParamRange("need r >= 1"));
        }
        if self.d < 2 {
            return Err(RateError::ParamRange("need d >= 2"));
        }
        if self.sigma < rat(1, 1) {
            return Err(RateError::ParamRange("need sigma >= 1"));
        }
        Ok(())
    }

    /// `1/q - 1/p` (non-positive).
    fn qp_gap(&self) -> Rat {
        self.q.recip() - self.p.recip()
    }

    /// `sigma (d-1)`.
    fn gamma_base(&self) -> Rat {
        self.sigma * rat(self.d as i64 - 1, 1)
    }

    /// `r + (sigma(d-1)+1)(1/q-1/p)`; must be positive for the embedding.
    pub fn lambda_star(&self) -> Rat {
        rat(self.r as i64, 1) + (self.gamma_base() + rat(1, 1)) * self.qp_gap()
    }

    fn embedding_ok(&self) -> Result<(), RateError> {
        if self.lambda_star() <= Rat::zero() {
            Err(RateError::Infeasible)
        } else {
            Ok(())
        }
    }

    /// Effective exponent of the width kind: q for Kolmogorov,
    /// min(q, p') for linear, p' for Gelfand.
    pub fn q_hat(&self) -> Option<Ext> {
        let pp = self.p.conjugate();
        match self.width {
            WidthKind::Entropy => None,
            WidthKind::Kolmogorov => Some(self.q),
            WidthKind::Linear => Some(if self.q.le(&pp) { self.q } else { pp }),
            WidthKind::Gelfand => Some(pp),
        }
    }
}

/// Regime data shared by all the estimates: the local exponent `delta`, the
/// boundary exponent `lambda`, and the boundary scale `gamma`.
struct AbData {
    delta: Rat,
    lambda: Rat,
    gamma: Rat,
}

fn entropy_from(ab: &AbData, ps: &ParamSet) -> Result<RatePrediction, RateError> {
    let pq = -ps.qp_gap(); // 1/p - 1/q >= 0
    let alpha1 = ab.delta + pq;
    let alpha2 = ab.lambda / ab.gamma + pq;
    if alpha1 == alpha2 {
        return Err(RateError::Degenerate("alpha1 == alpha2"));
    }
    let (j_star, a, tau) = if alpha1 < alpha2 {
        (1u8, alpha1, TauKind::Tau1)
    } else {
        (2u8, alpha2, TauKind::Tau2)
    };
    Ok(RatePrediction {
        alpha1,
        alpha2,
        thetas: None,
        j_star,
        exponent: -a,
        tau,
        q_hat: None,
    })
}

fn widths_from(ab: &AbData, ps: &ParamSet) -> Result<RatePrediction, RateError> {
    // width estimates need 1 < p <= q < inf
    if ps.p == Ext::fin(1, 1) || ps.p == Ext::Inf || ps.q == Ext::Inf {
        return Err(RateError::ParamRange(
            "width estimates need 1 < p <= q < inf",
        ));
    }
    let q_hat = ps.q_hat().expect("width kind");
    let pq = -ps.qp_gap(); // 1/p - 1/q
    let half = rat(1, 2);
    let two = rat(2, 1);
    let qh = match q_hat {
        Ext::Fin(v) => v,
        Ext::Inf => return Err(RateError::ParamRange("q_hat infinite")),
    };
    let case1 = qh <= two || ps.p == ps.q;
    if case1 {
        let alpha1 = ab.delta + pq;
        let alpha2 = ab.lambda / ab.gamma + pq;
        if alpha1 == alpha2 {
            return Err(RateError::Degenerate("alpha1 == alpha2"));
        }
        let (j_star, a, tau) = if alpha1 < alpha2 {
            (1u8, alpha1, TauKind::Tau1)
        } else {
            (2u8, alpha2, TauKind::Tau2)
        };
        return Ok(RatePrediction {
            alpha1,
            alpha2,
            thetas: None,
            j_star,
            exponent: -(a - pq),
            tau,
            q_hat: Some(q_hat),
        });
    }
    // second regime: four competing exponents, strict unique minimizer required
    let gap = {
        let a = pq;
        let b = half - qh.recip();
        if a < b {
            a
        } else {
            b
        }
    };
    let t1 = ab.delta + gap;
    let t2 = qh / two * ab.delta;
    let t3 = ab.lambda / ab.gamma + gap;
    let t4 = qh / two * ab.lambda / ab.gamma;
    let thetas = [t1, t2, t3, t4];
    let mut j_star = 0usize;
    for j in 1..4 {
        if thetas[j] < thetas[j_star] {
            j_star = j;
        }
    }
    for j in 0..4 {
        if j != j_star && thetas[j] == thetas[j_star] {
            return Err(RateError::Degenerate(
                "no strict minimizer among theta1..theta4",
            ));
        }
    }
    let tau = match j_star {
        0 | 1 => TauKind::Tau1,
        2 => TauKind::Tau2,
        _ => TauKind::Tau2HatQ,
    };
    Ok(RatePrediction {
        alpha1: ab.delta + pq,
        alpha2: ab.lambda / ab.gamma + pq,
        thetas: Some(thetas),
        j_star: j_star as u8 + 1,
        exponent: -thetas[j_star],
        tau,
        q_hat: Some(q_hat),
    })
}

fn ab_data_holder(ps: &ParamSet) -> AbData {
    AbData {
        delta: rat(ps.r as i64, 1) / rat(ps.d as i64, 1) + ps.qp_gap(),
        lambda: ps.lambda_star(),
        gamma: ps.gamma_base(),
    }
}

/// Entropy-number decay exponents for a Hölder cusp domain.
pub fn entropy_exponents(ps: &ParamSet) -> Result<RatePrediction, RateError> {
    ps.check_common()?;
    ps.embedding_ok()?;
    entropy_from(&ab_data_holder(ps), ps)
}

/// Width decay exponents (Kolmogorov, linear or Gelfand per `ps.width`).
pub fn width_exponents(ps: &ParamSet) -> Result<RatePrediction, RateError> {
    ps.check_common()?;
    ps.embedding_ok()?;
    if ps.width == WidthKind::Entropy {
        return entropy_exponents(ps);
    }
    widths_from(&ab_data_holder(ps), ps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsetVariant {
    /// Any h-set with `h(t) = t^theta`: the boundary scale becomes `sigma theta`.
    General,
    /// Coordinate slab: sharper exponent from the mixed moduli.
    Plane,
}

#[derive(Debug, Clone)]
pub struct HsetPrediction {
    /// The replacement magnitude `lambda_star / gamma_star` of the h-set estimate.
    pub replaced: Rat,
    /// Rate with the h-set boundary scale.
    pub hset: RatePrediction,
    /// Rate for the generic Hölder estimate, for comparison.
    pub generic: RatePrediction,
}

/// H-set refinement of the decay exponents. `General` substitutes the
/// boundary scale `sigma theta`; `Plane` uses the sharper slab exponent.
pub fn hset_exponents(ps: &ParamSet, variant: HsetVariant) -> Result<HsetPrediction, RateError> {
    ps.check_common()?;
    ps.embedding_ok()?;
    let theta = ps.theta.ok_or(RateError::ParamRange("theta required"))?;
    let d = rat(ps.d as i64, 1);
    match variant {
        HsetVariant::General => {
            if theta <= Rat::zero() || theta >= d {
                return Err(RateError::ParamRange("need 0 < theta < d"));
            }
        }
        HsetVariant::Plane => {
            if !theta.is_integer() || theta < rat(1, 1) || theta > d - rat(2, 1) {
                return Err(RateError::ParamRange(
                    "plane needs integer 1 <= theta <= d-2",
                ));
            }
        }
    }
    let ab = match variant {
        HsetVariant::General => AbData {
            delta: rat(ps.r as i64, 1) / d + ps.qp_gap(),
            lambda: ps.lambda_star(),
            gamma: ps.sigma * theta,
        },
        HsetVariant::Plane => {
            // moduli t on theta axes and t^sigma on the rest
            let lam = rat(ps.r as i64, 1)
                + ps.qp_gap() * (theta + rat(1, 1) + ps.sigma * (d - theta - rat(1, 1)));
            if lam <= Rat::zero() {
                return Err(RateError::Infeasible);
            }
            AbData {
                delta: rat(ps.r as i64, 1) / d + ps.qp_gap(),
                lambda: lam,
                gamma: theta,
            }
        }
    };
    let replaced = ab.lambda / ab.gamma;
    let (hset, generic) = match ps.width {
        WidthKind::Entropy => (
            entropy_from(&ab, ps)?,
            entropy_from(&ab_data_holder(ps), ps)?,
        ),
        _ => (widths_from(&ab, ps)?, widths_from(&ab_data_holder(ps), ps)?),
    };
    Ok(HsetPrediction {
        replaced,
        hset,
        generic,
    })
}

/// Solve `t^gamma u(t) = s` for `t in [1, 2^64]` by bisection on a bracket
/// grown geometrically; rejects targets where the left side is not strictly
/// increasing past the solution.
pub fn solve_scale(gamma: f64, u: impl Fn(f64) -> f64, s: f64) -> Result<f64, RateError> {
    if !(gamma > 0.0 && s.is_finite() && s > 0.0) {
        return Err(RateError::ParamRange("need gamma > 0 and finite s > 0"));
    }
    let f = |t: f64| fmath::pow(t, gamma) * u(t);
    if f(1.0) > s {
        return Err(RateError::NoBracket);
    }
    let mut lo = 1.0f64;
    let mut hi = 2.0f64;
    let mut found = false;
    while hi <= fmath::exp2(64.0) {
        if f(hi) >= s {
            found = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !found {
        return Err(RateError::NoBracket);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
        if fmath::abs(f(0.5 * (lo + hi)) - s) <= 1e-10 * s {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    // strict growth past the solution, sampled
    let mut prev = f(t);
    for i in 1..=32 {
        let cur = f(t * (1.0 + 3.0 * i as f64 / 32.0));
        if cur <= prev {
            return Err(RateError::NotIncreasing);
        }
        prev = cur;
    }
    Ok(t)
}

/// The slowly-varying correction `tau_2(n)` (or `tau_2(n^{q_hat/2})`).
///
/// With `t(n)` solving `t^gamma psi_Lambda(t) = n` and
/// `phi(n) = t(n) n^{-1/gamma}`, the factor is
/// `phi(n)^{-lambda_star} psi_Lambda(t(n))^{1/p - 1/q}`.
pub fn tau_factor(ps: &ParamSet, n: u64, which: TauKind) -> Result<f64, RateError> {
    ps.check_common()?;
    if n < 2 {
        return Err(RateError::ParamRange("need n >= 2"));
    }
    let s = match which {
        TauKind::Tau1 => return Ok(1.0),
        TauKind::Tau2 => n as f64,
        TauKind::Tau2HatQ => {
            let qh = ps.q_hat().ok_or(RateError::ParamRange(
                "tau2_hatq needs a width kind with q_hat",
            ))?;
            match qh {
                Ext::Fin(v) => fmath::pow(n as f64, rat_f64(v) / 2.0),
                Ext::Inf => return Err(RateError::ParamRange("q_hat infinite")),
            }
        }
    };
    let gamma = rat_f64(ps.gamma_base());
    let lam = ps.lambda;
    let t = solve_scale(gamma, |x| lam.psi(x), s)?;
    let phi = t * fmath::pow(s, -1.0 / gamma);
    let lambda_star = rat_f64(ps.lambda_star());
    let pq = -rat_f64(ps.qp_gap()); // 1/p - 1/q
    Ok(fmath::pow(phi, -lambda_star) * fmath::pow(lam.psi(t), pq))
}
