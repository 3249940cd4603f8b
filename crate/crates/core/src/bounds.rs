//! Upper bounds for tails of centered sums `T_n = η_1 + ... + η_n`,
//! `η = ξ − shift`, and Monte Carlo harnesses to check them.
//!
//! Every bound is an evaluation of the exponential Chebyshev inequality
//! `P{T_n > x} ≤ n Ḡ(y) + e^{−λx} (E{e^{λη}; η ≤ y})^n`, valid for all
//! `λ > 0` and `y`; the individual operations differ in how `λ` and `y` are
//! chosen and in the range over which the simplified form is claimed.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math::CompensatedSum;
use crate::offspring::OffspringLaw;
use crate::rng::{lanes, StreamId};

#[allow(unused_imports)]
use num_traits::Float;

/// Largest exponent `λy` accepted before the mgf is considered overflowing.
pub const EXPONENT_GUARD: f64 = 700.0;

/// Most support points summed directly in [`truncated_mgf`].
pub const MAX_MGF_TERMS: u64 = 1 << 28;

/// The summand `η = ξ − shift`.
#[derive(Debug, Clone, Copy)]
pub struct CenteredSummandLaw<'a> {
    pub base: &'a OffspringLaw,
    pub shift: f64,
    pub mean_eta: f64,
}

impl<'a> CenteredSummandLaw<'a> {
    pub fn new(base: &'a OffspringLaw, shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::bad("shift must be finite"));
        }
        Ok(CenteredSummandLaw {
            base,
            shift,
            mean_eta: base.mean() - shift,
        })
    }

    /// `Ḡ(x) = P{η > x} = F̄(x + shift)`.
    pub fn tail(&self, x: f64) -> f64 {
        self.base.tail(x + self.shift)
    }

    /// `R(x) = −log Ḡ(x)`.
    pub fn hazard(&self, x: f64) -> Result<f64> {
        let g = self.tail(x);
        if g == 0.0 {
            return Err(Error::TailZero { x });
        }
        Ok(-g.ln())
    }

    pub fn sample<R: rand_core::RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.base.sample(rng) as f64 - self.shift
    }
}

/// `E{e^{λη}; η ≤ y}`, summed over the integer support of `ξ`.
pub fn truncated_mgf(summand: &CenteredSummandLaw, lambda: f64, y: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::bad("lambda must be positive"));
    }
    if y.is_nan() {
        return Err(Error::bad("y must not be NaN"));
    }
    if lambda * y > EXPONENT_GUARD {
        return Err(Error::Overflow(lambda * y));
    }
    let top = y + summand.shift;
    if top < 0.0 {
        return Ok(0.0);
    }
    let mut last = top.floor();
    if let Some(s) = summand.base.support_max() {
        last = last.min(s as f64);
    }
    if last >= MAX_MGF_TERMS as f64 {
        return Err(Error::TooLarge(format!("{last} support points in the truncated mgf")));
    }
    let last = last as u64;
    // the largest exponent sits at the top of the range; factor it out
    let top_exp = lambda * (last as f64 - summand.shift);
    let mut s = CompensatedSum::new();
    for k in (0..=last).rev() {
        let p = summand.base.pmf(k);
        if p > 0.0 {
            s.add(p * (lambda * (k as f64 - summand.shift) - top_exp).exp());
        }
    }
    let value = s.value() * top_exp.exp();
    if !value.is_finite() {
        return Err(Error::Overflow(top_exp));
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Validity {
    InRange,
    OutOfRange,
}

impl Validity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Validity::InRange => "in_range",
            Validity::OutOfRange => "out_of_range",
        }
    }
}

/// A bound value with its two components.
///
/// `bound_value == jump_term + chernoff_term` holds as stored. For the
/// `(n+1)Ḡ(y)` form the second component is the in-range estimate `Ḡ(y)` of
/// the Chernoff term, and `raw_chebyshev` carries the fully evaluated
/// inequality, which is valid for any parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub bound_value: f64,
    pub jump_term: f64,
    pub chernoff_term: f64,
    pub lambda_used: f64,
    pub y_used: f64,
    pub validity: Validity,
    pub range_note: String,
    pub raw_chebyshev: f64,
}

/// `n Ḡ(y) + e^{−λx} (E{e^{λη}; η ≤ y})^n`.
pub fn chebyshev_sum_bound(summand: &CenteredSummandLaw, n: u64, x: f64, y: f64, lambda: f64) -> Result<BoundResult> {
    if !(y > 0.0 && y < x) || !x.is_finite() {
        return Err(Error::bad("the Chebyshev bound needs 0 < y < x"));
    }
    // tuned laws hit their target mean only to about 1e-9
    if summand.mean_eta > 1e-9 * (1.0 + summand.shift.abs()) {
        return Err(Error::bad(format!(
            "summand mean must be nonpositive, got {}",
            summand.mean_eta
        )));
    }
    let mgf = truncated_mgf(summand, lambda, y)?;
    let jump_term = n as f64 * summand.tail(y);
    let chernoff_term = if mgf == 0.0 {
        if n == 0 {
            (-lambda * x).exp()
        } else {
            0.0
        }
    } else {
        (-lambda * x + n as f64 * mgf.ln()).exp()
    };
    let bound_value = jump_term + chernoff_term;
    Ok(BoundResult {
        bound_value,
        jump_term,
        chernoff_term,
        lambda_used: lambda,
        y_used: y,
        validity: Validity::InRange,
        range_note: String::from("valid for every lambda > 0 and 0 < y < x"),
        raw_chebyshev: bound_value,
    })
}

/// Default constant in the range conditions.
pub const DEFAULT_RANGE_CONSTANT: f64 = 8.0;

/// The bound at `y = εx`, `λ = 2R(x)/x`, claimed for `n ≤ x²/(c log x)`.
pub fn prop22_bound(summand: &CenteredSummandLaw, n: u64, x: f64, eps: f64, c: f64) -> Result<BoundResult> {
    if !(x >= 1.0) {
        return Err(Error::bad("x must be at least 1"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::bad("eps must lie in (0, 1)"));
    }
    if !(c > 0.0) {
        return Err(Error::bad("range constant must be positive"));
    }
    let lambda = 2.0 * summand.hazard(x)? / x;
    let mut r = chebyshev_sum_bound(summand, n, x, eps * x, lambda)?;
    let limit = x * x / (c * x.ln());
    r.validity = if (n as f64) <= limit || x.ln() == 0.0 {
        Validity::InRange
    } else {
        Validity::OutOfRange
    };
    r.range_note = format!("n <= x^2/(c log x) = {limit:.6e} with c = {c}");
    Ok(r)
}

/// `(n+1)Ḡ(y)` for `y ≤ (1−ε)x`, claimed when `n R(y)/x² ≤ 1/c`; the raw
/// Chebyshev evaluation at `λ = (1+ε)R(y)/x` is attached.
pub fn prop23_bound(summand: &CenteredSummandLaw, n: u64, x: f64, y: f64, eps: f64, c: f64) -> Result<BoundResult> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::bad("eps must lie in (0, 1)"));
    }
    if !(c > 0.0) {
        return Err(Error::bad("range constant must be positive"));
    }
    if !(y > 0.0) || y > (1.0 - eps) * x {
        return Err(Error::bad(format!("y must lie in (0, (1-eps)x], got y = {y}, x = {x}")));
    }
    let g = summand.tail(y);
    let r_y = summand.hazard(y)?;
    let lambda = (1.0 + eps) * r_y / x;
    let raw = chebyshev_sum_bound(summand, n, x, y, lambda)?;
    let jump_term = n as f64 * g;
    let level = n as f64 * r_y / (x * x);
    Ok(BoundResult {
        bound_value: jump_term + g,
        jump_term,
        chernoff_term: g,
        lambda_used: lambda,
        y_used: y,
        validity: if level <= 1.0 / c {
            Validity::InRange
        } else {
            Validity::OutOfRange
        },
        range_note: format!("n R(y)/x^2 = {level:.6e} against 1/c with c = {c}"),
        raw_chebyshev: raw.bound_value,
    })
}

/// Largest support size and `n` for [`exact_sum_distribution`].
pub const EXACT_MAX_ATOMS: usize = 8;
pub const EXACT_MAX_N: u64 = 12;
/// Largest length of the distribution vector.
pub const EXACT_MAX_LEN: u64 = 100_000_000;

/// The distribution of `ξ_1 + ... + ξ_n` for a finite-support base law.
pub fn exact_sum_distribution(base: &OffspringLaw, n: u64) -> Result<Vec<f64>> {
    let smax = base
        .support_max()
        .ok_or_else(|| Error::TooLarge(String::from("exact sums need a finite-support law")))?;
    let atoms: Vec<(usize, f64)> = (0..=smax)
        .map(|k| (k as usize, base.pmf(k)))
        .filter(|&(_, p)| p > 0.0)
        .collect();
    if atoms.len() > EXACT_MAX_ATOMS || n > EXACT_MAX_N {
        return Err(Error::TooLarge(format!(
            "exact sums support at most {EXACT_MAX_ATOMS} atoms and n <= {EXACT_MAX_N}"
        )));
    }
    let len = n * smax + 1;
    if len > EXACT_MAX_LEN {
        return Err(Error::TooLarge(format!("sum distribution of length {len}")));
    }
    let mut dist = vec![0.0; len as usize];
    dist[0] = 1.0;
    let mut reach = 0usize;
    for _ in 0..n {
        let mut next = vec![0.0; len as usize];
        for (s, &p) in dist[..=reach].iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(k, q) in &atoms {
                next[s + k] += p * q;
            }
        }
        reach += smax as usize;
        dist = next;
    }
    Ok(dist)
}

/// `P{T_n > x}` from an exact sum distribution.
pub fn exact_sum_tail(dist: &[f64], n: u64, shift: f64, x: f64) -> f64 {
    // T_n > x  iff  S_n > x + n shift
    let level = x + n as f64 * shift;
    let first = if level < 0.0 { 0 } else { level.floor() as usize + 1 };
    if first >= dist.len() {
        return 0.0;
    }
    let s: CompensatedSum = dist[first..].iter().copied().collect();
    s.value().min(1.0)
}

/// A Monte Carlo estimate of `P{T_n > x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumTailEstimate {
    pub x: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
}

/// Estimates `P{T_n > x}` for every `x` in `x_grid` from the same `replicas`
/// sums. Replica `i` uses stream `(seed, SUMS, i)`.
pub fn sum_tail_mc<E: Executor>(
    summand: &CenteredSummandLaw,
    n: u64,
    x_grid: &[f64],
    replicas: u64,
    seed: u64,
    exec: &E,
) -> Result<Vec<SumTailEstimate>> {
    if replicas == 0 {
        return Err(Error::bad("replicas must be positive"));
    }
    let counts = exec.map_chunks(replicas, |range| {
        let mut counts = vec![0u64; x_grid.len()];
        for i in range {
            let mut rng = StreamId::new(seed, lanes::SUMS, i).rng();
            let mut s = CompensatedSum::new();
            for _ in 0..n {
                s.add(summand.sample(&mut rng));
            }
            let t = s.value();
            for (c, &x) in counts.iter_mut().zip(x_grid) {
                if t > x {
                    *c += 1;
                }
            }
        }
        counts
    });
    let mut total = vec![0u64; x_grid.len()];
    for c in counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    Ok(x_grid
        .iter()
        .zip(total)
        .map(|(&x, hits)| {
            let p = hits as f64 / replicas as f64;
            SumTailEstimate {
                x,
                estimate: p,
                std_error: (p * (1.0 - p) / replicas as f64).sqrt(),
                hits,
            }
        })
        .collect())
}

/// One grid point of the single-big-jump sum harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SstarRow {
    pub n: u64,
    pub x: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `estimate / (n Ḡ(x))`.
    pub ratio: f64,
    /// `x` lies beyond the central region `x ≤ n|a|`.
    pub informative: bool,
    /// `n = 1` is evaluated exactly.
    pub exact: bool,
}

/// Ratios `P̂{T_n > x}/(n Ḡ(x))` over `n_grid × x_grid` for a summand with
/// negative mean.
pub fn sstar_bound_harness<E: Executor>(
    summand: &CenteredSummandLaw,
    n_grid: &[u64],
    x_grid: &[f64],
    replicas: u64,
    seed: u64,
    exec: &E,
) -> Result<Vec<SstarRow>> {
    if !(summand.mean_eta < 0.0) {
        return Err(Error::bad("the harness needs a summand with negative mean"));
    }
    let a = summand.mean_eta.abs();
    let mut rows = Vec::with_capacity(n_grid.len() * x_grid.len());
    for &n in n_grid {
        if n == 0 {
            return Err(Error::bad("n must be positive"));
        }
        let estimates: Vec<SumTailEstimate> = if n == 1 {
            x_grid
                .iter()
                .map(|&x| SumTailEstimate {
                    x,
                    estimate: summand.tail(x),
                    std_error: 0.0,
                    hits: 0,
                })
                .collect()
        } else {
            sum_tail_mc(summand, n, x_grid, replicas, seed, exec)?
        };
        for e in estimates {
            let reference = n as f64 * summand.tail(e.x);
            rows.push(SstarRow {
                n,
                x: e.x,
                estimate: e.estimate,
                std_error: e.std_error,
                ratio: if reference > 0.0 {
                    e.estimate / reference
                } else {
                    f64::NAN
                },
                informative: e.x > n as f64 * a,
                exact: n == 1,
            });
        }
    }
    Ok(rows)
}
