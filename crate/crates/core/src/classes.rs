//! Finite-grid diagnostics for distribution-class hypotheses.
//!
//! Class membership is a statement about `x → ∞` and cannot be decided from
//! finitely many tail evaluations. Every check therefore returns a
//! three-valued verdict: `Violated` only with a concrete witness where the
//! defining inequality fails (or the statistic is visibly bounded away from
//! its required limit), `Consistent` when the statistic has settled near its
//! required limit over the top decade of the grid, and `Inconclusive`
//! otherwise. Points where `F̄(x) = 0` are dropped from the grid, and finite
//! support laws are never reported as consistent.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::geometric_grid;
use crate::offspring::OffspringLaw;

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassName {
    DominatedVarying,
    IntermediateRV,
    Matuszewska,
    HInsensitive,
    SStar,
    RapidlyVarying,
    HazardIncrement,
    HazardSlope,
}

impl ClassName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassName::DominatedVarying => "dominated_varying",
            ClassName::IntermediateRV => "intermediate_rv",
            ClassName::Matuszewska => "matuszewska",
            ClassName::HInsensitive => "h_insensitive",
            ClassName::SStar => "sstar",
            ClassName::RapidlyVarying => "rapidly_varying",
            ClassName::HazardIncrement => "hazard_increment",
            ClassName::HazardSlope => "hazard_slope",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Consistent,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// The grid point singled out by a verdict; `y` is the second coordinate of
/// two-parameter conditions (the multiplier `y` or the comparison point `z`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub x: f64,
    pub y: Option<f64>,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class_name: ClassName,
    pub grid: Vec<f64>,
    pub statistic: Vec<f64>,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
}

impl ClassReport {
    pub fn is_consistent(&self) -> bool {
        self.verdict == Verdict::Consistent
    }
}

/// 64 geometric points from 8 to 2^20.
pub fn default_grid() -> Vec<f64> {
    geometric_grid(8.0, (1u64 << 20) as f64, 64)
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::bad("empty grid"));
    }
    if grid.iter().any(|&x| !(x >= 1.0) || !x.is_finite()) {
        return Err(Error::bad("grid points must be finite and at least 1"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::bad("grid must be strictly increasing"));
    }
    Ok(())
}

/// Grid points with a positive tail; the first dropped point, if any.
fn live_points(law: &OffspringLaw, grid: &[f64]) -> (Vec<f64>, Option<f64>) {
    match grid.iter().position(|&x| law.tail(x) == 0.0) {
        Some(i) => (grid[..i].to_vec(), Some(grid[i])),
        None => (grid.to_vec(), None),
    }
}

/// Index of the first point in the top decade of `grid`.
fn top_decade(grid: &[f64]) -> usize {
    let top = *grid.last().unwrap();
    grid.iter().position(|&x| x >= top / 10.0).unwrap_or(0)
}

/// Fewest surviving grid points for a trend verdict.
const MIN_POINTS: usize = 8;

fn finish(
    law: &OffspringLaw,
    class_name: ClassName,
    grid: Vec<f64>,
    statistic: Vec<f64>,
    mut verdict: Verdict,
    mut witness: Option<Witness>,
) -> ClassReport {
    if verdict == Verdict::Consistent && law.support_max().is_some() {
        verdict = Verdict::Inconclusive;
    }
    if witness.is_none() && !grid.is_empty() {
        let (i, s) =
            statistic.iter().copied().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, s)| if s > acc.1 { (i, s) } else { acc },
            );
        witness = Some(Witness {
            x: grid[i],
            y: None,
            statistic: s,
        });
    }
    ClassReport {
        class_name,
        grid,
        statistic,
        verdict,
        witness,
    }
}

fn truncated(law: &OffspringLaw, class_name: ClassName, edge: f64) -> ClassReport {
    ClassReport {
        class_name,
        grid: Vec::new(),
        statistic: Vec::new(),
        verdict: Verdict::Inconclusive,
        witness: Some(Witness {
            x: edge,
            y: None,
            statistic: law.tail(edge),
        }),
    }
}

/// `F̄(x/2)/F̄(x)` up to `x_max`; consistent when the running supremum
/// stops growing: the supremum over points below `x_max/10` is within 5% of
/// the global one.
pub fn check_dominated_varying(law: &OffspringLaw, x_max: f64) -> Result<ClassReport> {
    if !(x_max >= 4.0) || !x_max.is_finite() {
        return Err(Error::bad("dominated-variation check needs x_max >= 4"));
    }
    let start = 8f64.min(x_max / 2.0);
    let grid = geometric_grid(start, x_max, 64);
    let (grid, edge) = live_points(law, &grid);
    let name = ClassName::DominatedVarying;
    if grid.len() < MIN_POINTS {
        return Ok(truncated(law, name, edge.unwrap_or(start)));
    }
    let statistic: Vec<f64> = grid.iter().map(|&x| law.tail(x / 2.0) / law.tail(x)).collect();
    let top = *grid.last().unwrap();
    let global = statistic.iter().copied().fold(0.0, f64::max);
    let early = grid
        .iter()
        .zip(&statistic)
        .filter(|(&x, _)| x <= top / 10.0)
        .map(|(_, &s)| s)
        .fold(0.0, f64::max);
    let verdict = if edge.is_none() && early >= 0.95 * global {
        Verdict::Consistent
    } else {
        Verdict::Inconclusive
    };
    Ok(finish(law, name, grid, statistic, verdict, None))
}

/// Multipliers `y` for the Matuszewska check: 64 geometric points in
/// `[2^{1/4}, 2^40]`.
pub fn default_multipliers() -> Vec<f64> {
    geometric_grid(2f64.powf(0.25), 2f64.powi(40), 64)
}

/// `sup_y F̄(xy) y^{1+δ} / F̄(x)` per grid point; violated at the first
/// `(x, y)` where it exceeds `c`.
pub fn check_matuszewska(law: &OffspringLaw, delta: f64, c: f64, grid: &[f64]) -> Result<ClassReport> {
    check_matuszewska_with(law, delta, c, grid, &default_multipliers())
}

pub fn check_matuszewska_with(
    law: &OffspringLaw,
    delta: f64,
    c: f64,
    grid: &[f64],
    multipliers: &[f64],
) -> Result<ClassReport> {
    if !(delta > 0.0) {
        return Err(Error::bad("delta must be positive"));
    }
    if !(c >= 1.0) {
        return Err(Error::bad("c must be at least 1"));
    }
    validate_grid(grid)?;
    if multipliers.iter().any(|&y| !(y > 1.0)) {
        return Err(Error::bad("multipliers must exceed 1"));
    }
    let name = ClassName::Matuszewska;
    let (grid, edge) = live_points(law, grid);
    if grid.is_empty() {
        return Ok(truncated(law, name, edge.unwrap()));
    }
    let mut statistic = Vec::with_capacity(grid.len());
    let mut witness = None;
    for &x in &grid {
        let fx = law.tail(x);
        let mut sup = 0.0f64;
        for &y in multipliers {
            let s = matuszewska_ratio(law, delta, x, y, fx);
            if s > c && witness.is_none() {
                witness = Some(Witness {
                    x,
                    y: Some(y),
                    statistic: s,
                });
            }
            sup = sup.max(s);
        }
        statistic.push(sup);
    }
    let verdict = if witness.is_some() {
        Verdict::Violated
    } else if edge.is_some() {
        Verdict::Inconclusive
    } else {
        Verdict::Consistent
    };
    Ok(finish(law, name, grid, statistic, verdict, witness))
}

/// `F̄(xy) y^{1+δ} / F̄(x)`.
pub fn matuszewska_ratio(law: &OffspringLaw, delta: f64, x: f64, y: f64, tail_x: f64) -> f64 {
    law.tail(x * y) * y.powf(1.0 + delta) / tail_x
}

/// Relative tolerance of the insensitivity check at the top decade.
pub const INSENSITIVE_TOL: f64 = 0.02;

/// `F̄(x + x^γ)/F̄(x)`.
///
/// Consistent when the top decade is within 2% of 1, or when the deviation
/// from 1 decreases strictly across the top decade (the limit is 1 but the
/// grid ends before 2% is reached). Violated when the deviation is at least
/// 2% and nondecreasing across the top decade.
pub fn check_insensitive(law: &OffspringLaw, gamma: f64, grid: &[f64]) -> Result<ClassReport> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::bad("gamma must lie in [0, 1)"));
    }
    validate_grid(grid)?;
    let name = ClassName::HInsensitive;
    let (grid, edge) = live_points(law, grid);
    if grid.len() < MIN_POINTS {
        return Ok(truncated(
            law,
            name,
            edge.unwrap_or(grid.last().copied().unwrap_or(1.0)),
        ));
    }
    let statistic: Vec<f64> = grid
        .iter()
        .map(|&x| law.tail(x + x.powf(gamma)) / law.tail(x))
        .collect();
    let dev: Vec<f64> = statistic.iter().map(|s| (1.0 - s).abs()).collect();
    let t = top_decade(&grid);
    let top = &dev[t..];
    let verdict = if top.iter().all(|&d| d <= INSENSITIVE_TOL) || top.windows(2).all(|w| w[1] < w[0]) {
        Verdict::Consistent
    } else if top.iter().all(|&d| d >= INSENSITIVE_TOL) && top.windows(2).all(|w| w[1] >= w[0]) {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    let witness = (verdict == Verdict::Violated).then(|| Witness {
        x: *grid.last().unwrap(),
        y: None,
        statistic: *statistic.last().unwrap(),
    });
    Ok(finish(law, name, grid, statistic, verdict, witness))
}

/// `∫_0^x F̄(x−y)F̄(y)dy` for the step-function tail at `x = ⌊x⌋`, which is
/// `sum_{j<N} F̄(j) F̄(N−1−j)`; the sum runs over `j < N/2` using symmetry.
pub fn self_convolution_integral(law: &OffspringLaw, x: f64) -> f64 {
    let n = x.floor() as u64;
    let half = n / 2;
    let mut s = crate::math::CompensatedSum::new();
    for j in 0..half {
        s.add(2.0 * law.tail_int(j) * law.tail_int(n - 1 - j));
    }
    if n % 2 == 1 {
        let t = law.tail_int(half);
        s.add(t * t);
    }
    s.value()
}

/// Relative tolerance of the S* check at the top decade.
pub const SSTAR_TOL: f64 = 0.05;

/// `∫_0^x F̄(x−y)F̄(y)dy / (2 m F̄(x))`. Consistent when the top decade is
/// within 5% of 1 or its distance from 1 strictly decreases there; violated
/// when the distance stays at least 5% and does not decrease.
pub fn check_sstar(law: &OffspringLaw, grid: &[f64]) -> Result<ClassReport> {
    validate_grid(grid)?;
    let name = ClassName::SStar;
    let (grid, edge) = live_points(law, grid);
    if grid.len() < MIN_POINTS {
        return Ok(truncated(law, name, edge.unwrap_or(1.0)));
    }
    let m = law.mean();
    let statistic: Vec<f64> = grid
        .iter()
        .map(|&x| self_convolution_integral(law, x) / (2.0 * m * law.tail(x)))
        .collect();
    let t = top_decade(&grid);
    let top: Vec<f64> = statistic[t..].iter().map(|s| (s - 1.0).abs()).collect();
    let verdict = if top.iter().all(|&d| d <= SSTAR_TOL) || top.windows(2).all(|w| w[1] < w[0]) {
        Verdict::Consistent
    } else if top.iter().all(|&d| d >= SSTAR_TOL) && top.windows(2).all(|w| w[1] >= w[0]) {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    let witness = (verdict == Verdict::Violated).then(|| Witness {
        x: grid[grid.len() - 1],
        y: None,
        statistic: statistic[statistic.len() - 1],
    });
    Ok(finish(law, name, grid, statistic, verdict, witness))
}

/// Threshold below which `F̄(x(1+ε))/F̄(x)` counts as vanished.
pub const RAPID_TOL: f64 = 0.05;

/// `F̄(x(1+ε))/F̄(x)`. Consistent when the top value is below 0.05 and the
/// statistic is nonincreasing across the top decade; violated when the top
/// decade stays above 0.05 and within 5% of a constant (a positive limit).
pub fn check_rapid_variation(law: &OffspringLaw, eps: f64, grid: &[f64]) -> Result<ClassReport> {
    if !(eps > 0.0) {
        return Err(Error::bad("eps must be positive"));
    }
    validate_grid(grid)?;
    let name = ClassName::RapidlyVarying;
    let (grid, edge) = live_points(law, grid);
    if grid.len() < MIN_POINTS {
        return Ok(truncated(law, name, edge.unwrap_or(1.0)));
    }
    let statistic: Vec<f64> = grid.iter().map(|&x| law.tail(x * (1.0 + eps)) / law.tail(x)).collect();
    let t = top_decade(&grid);
    let top = &statistic[t..];
    let last = *top.last().unwrap();
    let (lo, hi) = top
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    let (verdict, witness) = if last < RAPID_TOL && top.windows(2).all(|w| w[1] <= w[0]) {
        (Verdict::Consistent, None)
    } else if lo > RAPID_TOL && hi <= 1.05 * lo {
        let i = statistic.len() - 1;
        (
            Verdict::Violated,
            Some(Witness {
                x: grid[i],
                y: None,
                statistic: statistic[i],
            }),
        )
    } else {
        (Verdict::Inconclusive, None)
    };
    Ok(finish(law, name, grid, statistic, verdict, witness))
}

/// `(R(k) − R(k−1)) k / R(k)`, undefined where `R(k) = 0`.
pub fn hazard_increment_ratio(law: &OffspringLaw, k: u64) -> Result<f64> {
    let r = law.hazard(k as f64)?;
    let prev = law.hazard(k as f64 - 1.0)?;
    Ok((r - prev) * k as f64 / r)
}

/// Scans `k = 1..=k_max` for `R(k) − R(k−1) > c₁ R(k)/k`. The report keeps
/// the statistic on a geometric subsample of at most 64 points.
pub fn check_hazard_increment(law: &OffspringLaw, c1: f64, k_max: u64) -> Result<ClassReport> {
    if !(c1 > 0.0) {
        return Err(Error::bad("c1 must be positive"));
    }
    if k_max < 1 {
        return Err(Error::bad("k_max must be at least 1"));
    }
    let name = ClassName::HazardIncrement;
    let keep: Vec<u64> = {
        let mut v: Vec<u64> = geometric_grid(1.0, k_max as f64, 64)
            .into_iter()
            .map(|x| x.round() as u64)
            .collect();
        v.dedup();
        v
    };
    let mut grid = Vec::new();
    let mut statistic = Vec::new();
    let mut witness = None;
    let mut next_keep = 0;
    let mut ended = false;
    for k in 1..=k_max {
        if law.tail(k as f64) == 0.0 {
            ended = true;
            if witness.is_none() {
                witness = Some(Witness {
                    x: k as f64,
                    y: None,
                    statistic: f64::INFINITY,
                });
            }
            break;
        }
        let r = law.hazard(k as f64)?;
        if r == 0.0 {
            if next_keep < keep.len() && keep[next_keep] == k {
                next_keep += 1;
            }
            continue;
        }
        let s = hazard_increment_ratio(law, k)?;
        let violated = s > c1;
        if violated && witness.is_none() {
            witness = Some(Witness {
                x: k as f64,
                y: None,
                statistic: s,
            });
        }
        let wanted = (next_keep < keep.len() && keep[next_keep] == k) || (violated && grid.last() != Some(&(k as f64)));
        if wanted && grid.last().is_none_or(|&g| g < k as f64) {
            grid.push(k as f64);
            statistic.push(s);
        }
        while next_keep < keep.len() && keep[next_keep] <= k {
            next_keep += 1;
        }
        if violated {
            break;
        }
    }
    let verdict = match witness {
        Some(w) if w.statistic.is_finite() => Verdict::Violated,
        _ if ended => Verdict::Inconclusive,
        _ => Verdict::Consistent,
    };
    Ok(finish(law, name, grid, statistic, verdict, witness))
}

/// For each grid point `x ≥ x₀`, `(R(x)/x) / min_{x₀ ≤ z ≤ x} (R(z)/z)` with
/// `z` over the grid; violated where it exceeds `1 + ε`, the witness
/// carrying the minimizing `z`.
pub fn check_hazard_slope(law: &OffspringLaw, eps: f64, x0: f64, grid: &[f64]) -> Result<ClassReport> {
    if !(eps > 0.0) {
        return Err(Error::bad("eps must be positive"));
    }
    validate_grid(grid)?;
    let name = ClassName::HazardSlope;
    let pts: Vec<f64> = grid.iter().copied().filter(|&x| x >= x0).collect();
    let (pts, edge) = live_points(law, &pts);
    if pts.is_empty() {
        return Ok(truncated(law, name, edge.unwrap_or(x0)));
    }
    let mut statistic = Vec::with_capacity(pts.len());
    let mut best = (f64::INFINITY, pts[0]);
    let mut witness = None;
    for &x in &pts {
        let slope = law.hazard(x)? / x;
        if slope < best.0 {
            best = (slope, x);
        }
        let s = slope / best.0;
        if s > 1.0 + eps && witness.is_none() {
            witness = Some(Witness {
                x,
                y: Some(best.1),
                statistic: s,
            });
        }
        statistic.push(s);
    }
    let verdict = if witness.is_some() {
        Verdict::Violated
    } else if edge.is_some() {
        Verdict::Inconclusive
    } else {
        Verdict::Consistent
    };
    Ok(finish(law, name, pts, statistic, verdict, witness))
}

/// `F̄(x(1+ε))/F̄(x)` for a small `ε`. Consistent when the statistic has a
/// stable limit across the top decade (spread at most `ε` relative), as for
/// every regularly varying tail; violated when it keeps falling by more than
/// that, as for tails that are not `o(x)`-insensitive.
pub fn check_intermediate_rv(law: &OffspringLaw, eps: f64, grid: &[f64]) -> Result<ClassReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::bad("eps must lie in (0, 1)"));
    }
    validate_grid(grid)?;
    let name = ClassName::IntermediateRV;
    let (grid, edge) = live_points(law, grid);
    if grid.len() < MIN_POINTS {
        return Ok(truncated(law, name, edge.unwrap_or(1.0)));
    }
    let statistic: Vec<f64> = grid.iter().map(|&x| law.tail(x * (1.0 + eps)) / law.tail(x)).collect();
    let t = top_decade(&grid);
    let top = &statistic[t..];
    let (lo, hi) = top
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    let verdict = if lo > 0.0 && hi / lo - 1.0 <= eps {
        Verdict::Consistent
    } else if top.windows(2).all(|w| w[1] <= w[0]) {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    let witness = (verdict == Verdict::Violated).then(|| Witness {
        x: *grid.last().unwrap(),
        y: None,
        statistic: *statistic.last().unwrap(),
    });
    Ok(finish(law, name, grid, statistic, verdict, witness))
}
