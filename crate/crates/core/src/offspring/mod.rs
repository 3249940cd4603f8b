//! Heavy-tailed offspring laws on the nonnegative integers.
//!
//! A law is immutable once built. Construction precomputes the tail
//! `P{ξ > k}` for `k < 2^20` (or the whole support for finite laws) and a
//! guide table over the tail values, so tail queries are O(1) and inverse-CDF
//! sampling costs a table lookup plus a short search. Beyond the table every
//! family falls back to its analytic tail.

mod spec;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::math::{self, hurwitz_zeta, normal_sf, CompensatedSum};
use crate::rng::uniform_open_closed;

pub use spec::{tune_to_mean, LawSpec};

/// Length of the precomputed tail table for unbounded families.
pub const TABLE_LEN: usize = 1 << 20;

/// Tails below this value are reported as exactly zero.
pub const TAIL_FLOOR: f64 = 1e-300;

const GUIDE_LEN: usize = 1 << 12;

/// Cutoff used for the fast mean evaluation during parameter tuning.
const FAST_MEAN_CUTOFF: u64 = 4096;

/// Largest admissible finite support.
const MAX_FINITE_SUPPORT: u64 = 1 << 24;

/// Tag identifying the family of a law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    ParetoInteger,
    DiscreteWeibull,
    LogCorrectedIndexOne,
    LogNormalInteger,
    FiniteSupport,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::ParetoInteger => "pareto",
            FamilyKind::DiscreteWeibull => "weibull",
            FamilyKind::LogCorrectedIndexOne => "logcorr",
            FamilyKind::LogNormalInteger => "lognormal",
            FamilyKind::FiniteSupport => "finite",
        }
    }
}

/// Family parameters together with the analytic tail they define.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `P{ξ = k} ∝ (k + scale)^{-alpha-1}`; `norm = ζ(alpha + 1, scale)`.
    ParetoInteger { alpha: f64, scale: f64, norm: f64 },
    /// `P{ξ > k} = q exp(-c k^beta)` for `k ≥ 1`, `P{ξ > 0} = q`.
    DiscreteWeibull { beta: f64, c: f64, q: f64 },
    /// `P{ξ > k} = C / (k log^{p+1} k)` for `k ≥ x0 - 1`, uniform mass on
    /// `{1, ..., x0 - 1}` and `P{ξ ≥ x0} = tail_mass`.
    LogCorrectedIndexOne {
        p: f64,
        x0: u64,
        tail_mass: f64,
        constant: f64,
    },
    /// `ξ = ⌊e^Y⌋` with `Y ~ N(mu, sigma^2)`.
    LogNormalInteger { mu: f64, sigma: f64 },
    /// Explicit probabilities `probs[k] = P{ξ = k}`.
    FiniteSupport { probs: Vec<f64> },
}

impl Family {
    pub fn pareto(alpha: f64, scale: f64) -> Result<Family> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::bad(format!("pareto alpha must exceed 1, got {alpha}")));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::bad(format!("pareto scale must be positive, got {scale}")));
        }
        Ok(Family::ParetoInteger {
            alpha,
            scale,
            norm: hurwitz_zeta(alpha + 1.0, scale),
        })
    }

    pub fn weibull(beta: f64, c: f64, q: f64) -> Result<Family> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::bad(format!("weibull beta must lie in (0,1), got {beta}")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::bad(format!("weibull c must be positive, got {c}")));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::bad(format!("weibull q must lie in (0,1], got {q}")));
        }
        Ok(Family::DiscreteWeibull { beta, c, q })
    }

    pub fn log_corrected(p: f64, x0: u64, tail_mass: f64) -> Result<Family> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::bad(format!("logcorr p must exceed 1, got {p}")));
        }
        if x0 < 3 {
            return Err(Error::bad(format!("logcorr x0 must be at least 3, got {x0}")));
        }
        if !(tail_mass > 0.0 && tail_mass < 1.0) {
            return Err(Error::bad(format!(
                "logcorr tail mass must lie in (0,1), got {tail_mass}"
            )));
        }
        let seam = (x0 - 1) as f64;
        let constant = tail_mass * seam * seam.ln().powf(p + 1.0);
        Ok(Family::LogCorrectedIndexOne {
            p,
            x0,
            tail_mass,
            constant,
        })
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Family> {
        if !mu.is_finite() {
            return Err(Error::bad(format!("lognormal mu must be finite, got {mu}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::bad(format!("lognormal sigma must be positive, got {sigma}")));
        }
        Ok(Family::LogNormalInteger { mu, sigma })
    }

    pub fn finite(pmf: &[(u64, f64)]) -> Result<Family> {
        if pmf.is_empty() {
            return Err(Error::BadPmf("empty pmf".into()));
        }
        let max = pmf.iter().map(|&(k, _)| k).max().unwrap_or(0);
        if max >= MAX_FINITE_SUPPORT {
            return Err(Error::BadPmf(format!("support point {max} too large")));
        }
        let mut probs = vec![0.0; max as usize + 1];
        let mut seen = vec![false; max as usize + 1];
        let mut total = CompensatedSum::new();
        for &(k, p) in pmf {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::BadPmf(format!("probability {p} at {k} is not in [0,1]")));
            }
            if seen[k as usize] {
                return Err(Error::BadPmf(format!("support point {k} listed twice")));
            }
            seen[k as usize] = true;
            probs[k as usize] = p;
            total.add(p);
        }
        if (total.value() - 1.0).abs() > 1e-15 {
            return Err(Error::BadPmf(format!("probabilities sum to {}, not 1", total.value())));
        }
        Ok(Family::FiniteSupport { probs })
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::ParetoInteger { .. } => FamilyKind::ParetoInteger,
            Family::DiscreteWeibull { .. } => FamilyKind::DiscreteWeibull,
            Family::LogCorrectedIndexOne { .. } => FamilyKind::LogCorrectedIndexOne,
            Family::LogNormalInteger { .. } => FamilyKind::LogNormalInteger,
            Family::FiniteSupport { .. } => FamilyKind::FiniteSupport,
        }
    }

    /// Analytic `P{ξ > k}` (no underflow flooring).
    pub fn tail_at(&self, k: u64) -> f64 {
        match *self {
            Family::ParetoInteger { alpha, scale, norm } => hurwitz_zeta(alpha + 1.0, k as f64 + 1.0 + scale) / norm,
            Family::DiscreteWeibull { beta, c, q } => {
                if k == 0 {
                    q
                } else {
                    q * (-c * (k as f64).powf(beta)).exp()
                }
            }
            Family::LogCorrectedIndexOne {
                p,
                x0,
                tail_mass,
                constant,
            } => {
                if k == 0 {
                    1.0
                } else if k + 1 < x0 {
                    let h = (1.0 - tail_mass) / (x0 - 1) as f64;
                    1.0 - k as f64 * h
                } else {
                    let u = k as f64;
                    constant / (u * u.ln().powf(p + 1.0))
                }
            }
            Family::LogNormalInteger { mu, sigma } => normal_sf(((k as f64 + 1.0).ln() - mu) / sigma),
            Family::FiniteSupport { ref probs } => {
                let k = k as usize;
                if k + 1 >= probs.len() {
                    0.0
                } else {
                    probs[k + 1..].iter().copied().collect::<CompensatedSum>().value()
                }
            }
        }
    }

    /// Smooth extension of the tail to real arguments; agrees with
    /// [`Family::tail_at`] at integers beyond the head of the law.
    pub fn tail_cont(&self, u: f64) -> f64 {
        match *self {
            Family::ParetoInteger { alpha, scale, norm } => hurwitz_zeta(alpha + 1.0, u + 1.0 + scale) / norm,
            Family::DiscreteWeibull { beta, c, q } => q * (-c * u.powf(beta)).exp(),
            Family::LogCorrectedIndexOne { p, constant, .. } => constant / (u * u.ln().powf(p + 1.0)),
            Family::LogNormalInteger { mu, sigma } => normal_sf(((u + 1.0).ln() - mu) / sigma),
            Family::FiniteSupport { .. } => self.tail_at(u.floor() as u64),
        }
    }

    /// `P{ξ = k}`.
    pub fn pmf_at(&self, k: u64) -> f64 {
        match *self {
            Family::ParetoInteger { alpha, scale, norm } => (k as f64 + scale).powf(-alpha - 1.0) / norm,
            Family::FiniteSupport { ref probs } => probs.get(k as usize).copied().unwrap_or(0.0),
            _ => {
                if k == 0 {
                    1.0 - self.tail_at(0)
                } else {
                    self.tail_at(k - 1) - self.tail_at(k)
                }
            }
        }
    }

    /// Smallest integer beyond which [`Family::tail_cont`] is the tail.
    fn smooth_from(&self) -> u64 {
        match *self {
            Family::LogCorrectedIndexOne { x0, .. } => x0 - 1,
            _ => 0,
        }
    }

    /// `∫_start^∞ tail_cont(u) du`.
    fn tail_integral_from(&self, start: f64) -> Result<f64> {
        match *self {
            Family::ParetoInteger { alpha, scale, norm } => {
                Ok(hurwitz_zeta(alpha, start + 1.0 + scale) / (alpha * norm))
            }
            Family::LogCorrectedIndexOne { p, constant, .. } => Ok(constant / (p * start.ln().powf(p))),
            Family::FiniteSupport { .. } => Ok(0.0),
            _ => math::integrate_to_infinity(|u| self.tail_cont(u), start, 1e-10),
        }
    }

    /// `sum_{k >= start} P{ξ > k}` for `start` at or beyond the smooth range.
    fn tail_sum_from(&self, start: u64) -> Result<f64> {
        self.tail_sum_from_f64(start as f64)
    }

    /// As [`Self::tail_sum_from`] with an integral-valued `f64` start, which
    /// may exceed `u64::MAX`.
    fn tail_sum_from_f64(&self, a: f64) -> Result<f64> {
        if let Family::FiniteSupport { ref probs } = *self {
            let start = if a >= probs.len() as f64 {
                probs.len() as u64
            } else {
                a as u64
            };
            let s: CompensatedSum = (start..probs.len() as u64).map(|k| self.tail_at(k)).collect();
            return Ok(s.value());
        }
        let integral = self.tail_integral_from(a)?;
        Ok(math::euler_maclaurin_tail(|u| self.tail_cont(u), a, integral))
    }

    /// Mean, summing the tail directly up to a small cutoff.
    pub fn mean(&self) -> Result<f64> {
        match *self {
            Family::ParetoInteger { alpha, scale, norm } => Ok((hurwitz_zeta(alpha, scale) - scale * norm) / norm),
            Family::FiniteSupport { ref probs } => Ok(probs
                .iter()
                .enumerate()
                .map(|(k, p)| k as f64 * p)
                .collect::<CompensatedSum>()
                .value()),
            _ => {
                let cutoff = FAST_MEAN_CUTOFF.max(self.smooth_from() + 2);
                let mut s: CompensatedSum = (0..cutoff).map(|k| self.tail_at(k)).collect();
                s.add(self.tail_sum_from(cutoff)?);
                Ok(s.value())
            }
        }
    }

    /// Largest finite moment order, or `None` when all moments are finite.
    pub fn tail_index(&self) -> Option<f64> {
        match *self {
            Family::ParetoInteger { alpha, .. } => Some(alpha),
            Family::LogCorrectedIndexOne { .. } => Some(1.0),
            _ => None,
        }
    }
}

/// An offspring distribution with cached tail table and moments.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    family: Family,
    table: Vec<f64>,
    guide: Vec<u32>,
    mean: f64,
    second_moment: f64,
}

impl PartialEq for OffspringLaw {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
    }
}

impl OffspringLaw {
    /// Pareto-type law with `P{ξ = k} ∝ (k + scale)^{-alpha-1}`.
    pub fn pareto_integer(alpha: f64, scale: f64) -> Result<Self> {
        Self::from_family(Family::pareto(alpha, scale)?)
    }

    /// Discrete Weibull law `P{ξ > k} = q exp(-c k^beta)`.
    pub fn discrete_weibull(beta: f64, c: f64, q: f64) -> Result<Self> {
        Self::from_family(Family::weibull(beta, c, q)?)
    }

    /// Index-one law `P{ξ > k} ~ C k^{-1} log^{-p-1} k` with half of the
    /// mass in the uniform head `{1, ..., x0 - 1}`.
    pub fn log_corrected_index_one(p: f64, x0: u64) -> Result<Self> {
        Self::log_corrected_index_one_with_mass(p, x0, spec::DEFAULT_LOGCORR_MASS)
    }

    pub fn log_corrected_index_one_with_mass(p: f64, x0: u64, tail_mass: f64) -> Result<Self> {
        Self::from_family(Family::log_corrected(p, x0, tail_mass)?)
    }

    /// `ξ = ⌊e^Y⌋` with `Y` normal.
    pub fn log_normal_integer(mu: f64, sigma: f64) -> Result<Self> {
        Self::from_family(Family::log_normal(mu, sigma)?)
    }

    /// Law with explicit `(k, P{ξ = k})` pairs.
    pub fn finite_support(pmf: &[(u64, f64)]) -> Result<Self> {
        Self::from_family(Family::finite(pmf)?)
    }

    pub fn from_family(family: Family) -> Result<Self> {
        let mean = family.mean()?;
        if !(mean > 1.0) {
            return Err(Error::SubcriticalMean { mean });
        }
        let table = build_table(&family);
        let mean = match family {
            Family::ParetoInteger { .. } | Family::FiniteSupport { .. } => mean,
            _ => {
                let mut s: CompensatedSum = table.iter().copied().collect();
                s.add(family.tail_sum_from(table.len() as u64)?);
                s.value()
            }
        };
        let second_moment = second_moment(&family, &table)?;
        let guide = build_guide(&table);
        Ok(OffspringLaw {
            family,
            table,
            guide,
            mean,
            second_moment,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn kind(&self) -> FamilyKind {
        self.family.kind()
    }

    /// `m = E ξ`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `Var ξ`, `+∞` when the second moment diverges.
    pub fn variance(&self) -> f64 {
        if self.second_moment.is_finite() {
            (self.second_moment - self.mean * self.mean).max(0.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn has_finite_variance(&self) -> bool {
        self.second_moment.is_finite()
    }

    /// Largest point of a finite support.
    pub fn support_max(&self) -> Option<u64> {
        match self.family {
            Family::FiniteSupport { ref probs } => Some(probs.len() as u64 - 1),
            _ => None,
        }
    }

    pub fn table_len(&self) -> usize {
        self.table.len()
    }

    /// `P{ξ > k}` at an integer.
    #[inline]
    pub fn tail_int(&self, k: u64) -> f64 {
        if (k as usize) < self.table.len() {
            self.table[k as usize]
        } else {
            floor(self.family.tail_at(k))
        }
    }

    /// `F̄(x) = P{ξ > x}`; non-integer arguments use `⌊x⌋`.
    #[inline]
    pub fn tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        if x >= 9.0e18 {
            // beyond u64 range the floor is irrelevant
            return if self.support_max().is_some() {
                0.0
            } else {
                floor(self.family.tail_cont(x))
            };
        }
        self.tail_int(x as u64)
    }

    /// Hazard `R(x) = -log F̄(x)`.
    pub fn hazard(&self, x: f64) -> Result<f64> {
        let t = self.tail(x);
        if t == 0.0 {
            return Err(Error::TailZero { x });
        }
        Ok(-t.ln())
    }

    /// `P{ξ = k}`.
    pub fn pmf(&self, k: u64) -> f64 {
        match self.family {
            Family::ParetoInteger { .. } | Family::FiniteSupport { .. } => self.family.pmf_at(k),
            _ => {
                if k == 0 {
                    1.0 - self.tail_int(0)
                } else {
                    self.tail_int(k - 1) - self.tail_int(k)
                }
            }
        }
    }

    /// `E ξ²`, `+∞` when divergent.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// `E{ξ^order; ξ ≤ cutoff}`; `cutoff` may be `+∞`.
    pub fn truncated_moment(&self, order: f64, cutoff: f64) -> Result<f64> {
        if !(order > 0.0) {
            return Err(Error::bad(format!("moment order must be positive, got {order}")));
        }
        if cutoff < 0.0 {
            return Ok(0.0);
        }
        if cutoff.is_infinite() {
            if order == 1.0 {
                return Ok(self.mean);
            }
            if order == 2.0 {
                return Ok(self.second_moment);
            }
            if let Some(index) = self.family.tail_index() {
                if order >= index {
                    return Ok(f64::INFINITY);
                }
            }
        }
        let len = self.table.len() as u64;
        let last = if cutoff >= 9.0e18 { u64::MAX } else { cutoff as u64 };
        let direct_end = last.min(len - 1);
        let mut s: CompensatedSum = (1..=direct_end).map(|k| (k as f64).powf(order) * self.pmf(k)).collect();
        if last < len || self.support_max().is_some() {
            return Ok(s.value());
        }
        // Summation by parts beyond the table:
        // sum_{k=K}^{L} k^r pmf(k) = K^r F̄(K-1) - L^r F̄(L) + sum_{k=K}^{L-1} ((k+1)^r - k^r) F̄(k)
        let start = len as f64;
        let g = |u: f64| u.powf(order) * (order * (1.0 / u).ln_1p()).exp_m1() * self.family.tail_cont(u);
        s.add(start.powf(order) * self.tail_int(len - 1));
        if cutoff.is_infinite() || last == u64::MAX {
            let integral = math::integrate_to_infinity(g, start, 1e-10)?;
            s.add(integral + 0.5 * g(start) - (0.5 * (g(start + 1.0) - g(start - 1.0))) / 12.0);
        } else {
            let end = last as f64;
            s.add(-end.powf(order) * self.tail_int(last));
            let mut integral = CompensatedSum::new();
            let mut lo = start;
            while lo < end {
                let hi = (2.0 * lo).min(end);
                integral.add(math::integrate(g, lo, hi, 1e-11, 0.0)?.0);
                lo = hi;
            }
            let dg = |u: f64| 0.5 * (g(u + 1.0) - g(u - 1.0));
            s.add(integral.value() + 0.5 * (g(start) - g(end)) + (dg(end) - dg(start)) / 12.0);
        }
        Ok(s.value())
    }

    /// `E ξ log ξ` (finite for every law in the catalog).
    pub fn x_log_x_moment(&self) -> Result<f64> {
        let len = self.table.len() as u64;
        let xlx = |u: f64| if u <= 0.0 { 0.0 } else { u * u.ln() };
        // sum_{k>=1} ((k+1) log(k+1) - k log k) F̄(k)
        let mut s: CompensatedSum = (1..len)
            .map(|k| (xlx(k as f64 + 1.0) - xlx(k as f64)) * self.tail_int(k))
            .collect();
        if self.support_max().is_some() {
            return Ok(s.value());
        }
        let start = len as f64;
        let g = |u: f64| (u * (1.0 / u).ln_1p() + u.ln_1p()) * self.family.tail_cont(u);
        let integral = match self.family {
            Family::LogCorrectedIndexOne { p, constant, .. } => {
                let l = start.ln();
                constant * (1.0 / ((p - 1.0) * l.powf(p - 1.0)) + 1.0 / (p * l.powf(p)))
            }
            _ => math::integrate_to_infinity(g, start, 1e-10)?,
        };
        s.add(math::euler_maclaurin_tail(g, start, integral));
        Ok(s.value())
    }

    /// `∫_a^b F̄(u) du` for the step-function tail, `b` may be `+∞`.
    pub fn integrated_tail(&self, a: f64, b: f64) -> Result<f64> {
        let a = a.max(0.0);
        if !(b > a) {
            return Ok(0.0);
        }
        let len = self.table.len() as u64;
        let mut s = CompensatedSum::new();
        // partial cell at the left end
        let ka = a.floor();
        let kb = if b.is_finite() { b.floor() } else { f64::INFINITY };
        if ka == kb {
            return Ok((b - a) * self.tail(a));
        }
        s.add((ka + 1.0 - a) * self.tail(a));
        if kb.is_finite() {
            s.add((b - kb) * self.tail(b));
        }
        // full cells k in [ka + 1, kb - 1]
        let first = ka as u64 + 1;
        let table_end = if kb.is_finite() { (kb as u64).min(len) } else { len };
        for k in first..table_end {
            s.add(self.table[k as usize]);
        }
        let beyond_start = first.max(len);
        if self.support_max().is_none() && (kb.is_infinite() || kb > beyond_start as f64) {
            let from = self.family.tail_sum_from(beyond_start)?;
            let upto = if kb.is_finite() {
                self.family.tail_sum_from_f64(kb)?
            } else {
                0.0
            };
            s.add(from - upto);
        }
        Ok(s.value())
    }

    /// Smallest `k` with `F̄(k) < u`, for `u ∈ (0, 1]`.
    #[inline]
    pub fn inverse_tail(&self, u: f64) -> u64 {
        let len = self.table.len();
        let cell = ((u * GUIDE_LEN as f64) as usize).min(GUIDE_LEN - 1);
        let lo = self.guide[cell] as usize;
        if lo < len && self.table[lo] < u {
            return lo as u64;
        }
        let hi = if cell == 0 {
            len
        } else {
            (self.guide[cell - 1] as usize).min(len)
        };
        let lo = lo.min(hi);
        let k = lo + self.table[lo..hi].partition_point(|&t| t >= u);
        if k < len {
            return k as u64;
        }
        self.inverse_tail_beyond(u)
    }

    #[cold]
    fn inverse_tail_beyond(&self, u: f64) -> u64 {
        let mut lo = self.table.len() as u64 - 1;
        let mut hi = (lo + 1) * 2;
        const CAP: u64 = 1 << 62;
        while floor(self.family.tail_at(hi)) >= u {
            lo = hi;
            if hi >= CAP {
                return CAP;
            }
            hi = (hi * 2).min(CAP);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if floor(self.family.tail_at(mid)) >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// One draw of ξ by inversion.
    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        self.inverse_tail(uniform_open_closed(rng))
    }

    /// One draw of ξ conditioned on `ξ > threshold`.
    pub fn sample_above<R: RngCore + ?Sized>(&self, threshold: f64, rng: &mut R) -> Result<u64> {
        let t = self.tail(threshold);
        if t == 0.0 {
            return Err(Error::ConditionalTailEmpty { threshold });
        }
        Ok(self.inverse_tail(uniform_open_closed(rng) * t))
    }

    /// One draw of ξ conditioned on `ξ ≤ threshold` (`threshold ≥ 0`).
    pub fn sample_at_most<R: RngCore + ?Sized>(&self, threshold: f64, rng: &mut R) -> u64 {
        let t = self.tail(threshold);
        let u = t + uniform_open_closed(rng) * (1.0 - t);
        self.inverse_tail(u.min(1.0))
    }
}

#[inline]
fn floor(t: f64) -> f64 {
    if t < TAIL_FLOOR {
        0.0
    } else {
        t
    }
}

fn build_table(family: &Family) -> Vec<f64> {
    let mut table = match *family {
        Family::FiniteSupport { ref probs } => {
            let mut tail = vec![0.0; probs.len()];
            let mut acc = CompensatedSum::new();
            for k in (0..probs.len()).rev() {
                tail[k] = acc.value();
                acc.add(probs[k]);
            }
            tail
        }
        Family::ParetoInteger { .. } => {
            // backward summation of the pmf from an analytic anchor
            let mut tail = vec![0.0; TABLE_LEN];
            let mut acc = CompensatedSum::new();
            acc.add(family.tail_at(TABLE_LEN as u64 - 1));
            for k in (0..TABLE_LEN).rev() {
                tail[k] = acc.value();
                acc.add(family.pmf_at(k as u64));
            }
            tail
        }
        _ => (0..TABLE_LEN as u64).map(|k| family.tail_at(k)).collect(),
    };
    for t in table.iter_mut() {
        *t = floor(t.clamp(0.0, 1.0));
    }
    table
}

fn build_guide(table: &[f64]) -> Vec<u32> {
    let mut guide = vec![0u32; GUIDE_LEN];
    let mut k = 0usize;
    for i in (0..GUIDE_LEN).rev() {
        let level = (i + 1) as f64 / GUIDE_LEN as f64;
        while k < table.len() && table[k] >= level {
            k += 1;
        }
        guide[i] = k as u32;
    }
    guide
}

fn second_moment(family: &Family, table: &[f64]) -> Result<f64> {
    match *family {
        Family::ParetoInteger { alpha, scale, norm } => {
            if alpha <= 2.0 {
                return Ok(f64::INFINITY);
            }
            let s = scale;
            let z = CompensatedSum::from_iter([
                hurwitz_zeta(alpha - 1.0, s),
                -2.0 * s * hurwitz_zeta(alpha, s),
                s * s * norm,
            ]);
            Ok(z.value() / norm)
        }
        Family::LogCorrectedIndexOne { .. } => Ok(f64::INFINITY),
        Family::FiniteSupport { ref probs } => Ok(probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k * k) as f64 * p)
            .collect::<CompensatedSum>()
            .value()),
        _ => {
            // E ξ² = sum_k (2k + 1) F̄(k)
            let mut s: CompensatedSum = table.iter().enumerate().map(|(k, t)| (2 * k + 1) as f64 * t).collect();
            let start = table.len() as f64;
            let g = |u: f64| (2.0 * u + 1.0) * family.tail_cont(u);
            let integral = math::integrate_to_infinity(g, start, 1e-10)?;
            s.add(math::euler_maclaurin_tail(g, start, integral));
            Ok(s.value())
        }
    }
}

#[cfg(test)]
mod tests;
