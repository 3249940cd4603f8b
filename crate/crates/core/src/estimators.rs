//! Estimators of `P{W_n > x}`: naive Monte Carlo, an exact oracle for
//! finite-support laws, and the big-jump decomposition over the disjoint
//! events `A_k(x)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::asymptotics::{self, ApproxOptions, Horizon, Method};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math::CompensatedSum;
use crate::offspring::OffspringLaw;
use crate::rng::{lanes, uniform_open_closed, StreamId};
use crate::simulator::{draw_generation, MAX_POPULATION};

#[allow(unused_imports)]
use num_traits::Float;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    NaiveMc,
    BigJump,
    Exact,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::NaiveMc => "naive",
            EstimatorKind::BigJump => "bigjump",
            EstimatorKind::Exact => "exact",
        }
    }
}

impl core::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(EstimatorKind::NaiveMc),
            "bigjump" => Ok(EstimatorKind::BigJump),
            "exact" => Ok(EstimatorKind::Exact),
            _ => Err(Error::bad(format!("unknown estimator `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicas_used: u64,
    pub method: EstimatorKind,
    /// Big-jump only: estimated `P{A_k} P{W_n > x | A_k}` for each `k < n`.
    pub breakdown: Option<Vec<f64>>,
    /// Replicas whose population overflowed or passed the cap; they count as
    /// exceedances.
    pub overflow_count: u64,
    pub flags: Vec<String>,
}

impl EstimatorResult {
    fn from_estimate(estimate: f64, std_error: f64, replicas: u64, method: EstimatorKind) -> Self {
        let estimate = estimate.clamp(0.0, 1.0);
        EstimatorResult {
            estimate,
            std_error,
            ci_low: (estimate - Z95 * std_error).max(0.0),
            ci_high: (estimate + Z95 * std_error).min(1.0),
            replicas_used: replicas,
            method,
            breakdown: None,
            overflow_count: 0,
            flags: Vec::new(),
        }
    }

    /// Breakdown entries normalized to sum to one.
    pub fn normalized_breakdown(&self) -> Option<Vec<f64>> {
        let b = self.breakdown.as_ref()?;
        let total: f64 = b.iter().sum();
        (total > 0.0).then(|| b.iter().map(|v| v / total).collect())
    }
}

fn level(m: f64, n: usize, x: f64) -> f64 {
    m.powi(n as i32) * x
}

/// Fraction of `replicas` trajectories with `W_n > x`, replica `i` on stream
/// `(seed, NAIVE, i)`. A generation larger than `population_cap` ends the
/// replica and counts it as an exceedance.
pub fn naive_mc<E: Executor>(
    law: &OffspringLaw,
    n: usize,
    x: f64,
    replicas: u64,
    seed: u64,
    population_cap: u64,
    exec: &E,
) -> Result<EstimatorResult> {
    if replicas < 100 {
        return Err(Error::bad("naive Monte Carlo needs at least 100 replicas"));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::bad("x must be nonnegative and finite"));
    }
    if population_cap > MAX_POPULATION {
        return Err(Error::bad("population cap exceeds 2^63 - 1"));
    }
    let m = law.mean();
    let scale = m.powi(-(n as i32));
    let parts = exec.map_chunks(replicas, |range| -> Result<(u64, u64)> {
        let mut hits = 0;
        let mut overflow = 0;
        for i in range {
            let mut rng = StreamId::new(seed, lanes::NAIVE, i).rng();
            let mut z = 1u64;
            let mut over = false;
            for k in 0..n {
                if z == 0 {
                    break;
                }
                match draw_generation(law, z, k, population_cap, &mut rng) {
                    Ok(d) if d.stopped || d.total > population_cap => {
                        over = true;
                        break;
                    }
                    Ok(d) => z = d.total,
                    Err(Error::PopulationOverflow { .. }) => {
                        over = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if over {
                overflow += 1;
                hits += 1;
            } else if z as f64 * scale > x {
                hits += 1;
            }
        }
        Ok((hits, overflow))
    });
    let mut hits = 0;
    let mut overflow = 0;
    for p in parts {
        let (h, o) = p?;
        hits += h;
        overflow += o;
    }
    let p = hits as f64 / replicas as f64;
    let se = (p * (1.0 - p) / replicas as f64).sqrt();
    let mut r = EstimatorResult::from_estimate(p, se, replicas, EstimatorKind::NaiveMc);
    if hits == 0 {
        // rule of three
        r.ci_high = (3.0 / replicas as f64).min(1.0);
    }
    r.overflow_count = overflow;
    if overflow > 0 {
        r.flags.push(format!(
            "{overflow} replicas overflowed and were counted as exceedances"
        ));
    }
    Ok(r)
}

/// Largest distribution vector of [`exact_distribution`].
pub const EXACT_MAX_LEN: u64 = 100_000_000;
/// Largest number of multiply-adds [`exact_distribution`] will attempt.
pub const EXACT_MAX_WORK: f64 = 2e10;

/// The distribution of `Z_n` for a finite-support law, by composing the
/// offspring pmf generation by generation.
pub fn exact_distribution(law: &OffspringLaw, n: usize) -> Result<Vec<f64>> {
    let smax = law
        .support_max()
        .ok_or_else(|| Error::TooLarge(String::from("the exact oracle needs a finite-support law")))?;
    let atoms: Vec<(usize, f64)> = (0..=smax)
        .map(|k| (k as usize, law.pmf(k)))
        .filter(|&(_, p)| p > 0.0)
        .collect();
    let len = (smax as f64).powi(n as i32) + 1.0;
    if len > EXACT_MAX_LEN as f64 {
        return Err(Error::TooLarge(format!("Z_{n} has up to {len:.3e} states")));
    }
    // each generation costs about (reach^2 / 2) · smax · atoms
    let mut work = 0.0;
    let mut reach = 1.0;
    for _ in 0..n {
        work += 0.5 * reach * reach * smax as f64 * atoms.len() as f64;
        reach *= smax as f64;
    }
    if work > EXACT_MAX_WORK {
        return Err(Error::TooLarge(format!(
            "exact composition needs about {work:.3e} operations"
        )));
    }
    let smax = smax as usize;
    let mut dist = vec![0.0, 1.0];
    for _ in 0..n {
        let top = dist.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let mut next = vec![0.0; top * smax + 1];
        // power holds the law of a sum of z offspring counts
        let mut power = vec![1.0];
        next[0] += dist[0];
        for (z, &pz) in dist.iter().enumerate().take(top + 1).skip(1) {
            let mut grown = vec![0.0; power.len() + smax];
            for (s, &ps) in power.iter().enumerate() {
                if ps == 0.0 {
                    continue;
                }
                for &(k, q) in &atoms {
                    grown[s + k] += ps * q;
                }
            }
            power = grown;
            debug_assert_eq!(power.len(), z * smax + 1);
            if pz > 0.0 {
                for (j, &p) in power.iter().enumerate() {
                    next[j] += pz * p;
                }
            }
        }
        dist = next;
    }
    Ok(dist)
}

/// `P{Z_n > threshold}` exactly.
pub fn exact_convolution(law: &OffspringLaw, n: usize, threshold: u64) -> Result<EstimatorResult> {
    let dist = exact_distribution(law, n)?;
    let first = threshold.saturating_add(1);
    let tail: CompensatedSum = dist
        .iter()
        .skip(first.min(dist.len() as u64) as usize)
        .copied()
        .collect();
    Ok(EstimatorResult::from_estimate(
        tail.value(),
        0.0,
        0,
        EstimatorKind::Exact,
    ))
}

/// `P{W_n > x} = P{Z_n > ⌊m^n x⌋}` exactly.
pub fn exact_w_tail(law: &OffspringLaw, n: usize, x: f64) -> Result<EstimatorResult> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::bad("x must be nonnegative and finite"));
    }
    let t = level(law.mean(), n, x);
    let threshold = if t >= u64::MAX as f64 {
        u64::MAX
    } else {
        t.floor() as u64
    };
    exact_convolution(law, n, threshold)
}

/// Budget of the big-jump estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigJumpConfig {
    /// Replicas for each of the two stages of each generation `k`.
    pub replicas_per_k: u64,
    /// Continuations drawn from each weighted prefix path in stage two.
    pub continuations: u64,
    pub seed: u64,
}

impl BigJumpConfig {
    pub fn new(replicas_per_k: u64, seed: u64) -> Self {
        BigJumpConfig {
            replicas_per_k,
            continuations: 1,
            seed,
        }
    }
}

/// Outcome of one prefix `Z_0..Z_k` under `B_k(x)`.
enum Prefix {
    /// `B_k` fails (or the population overflowed, which implies it fails).
    Outside,
    Inside(u64),
}

/// Simulates `Z_0..Z_k`, abandoning the path as soon as `Z_j > m^j x`.
fn prefix<R: RngCore + ?Sized>(law: &OffspringLaw, k: usize, x: f64, rng: &mut R) -> Result<Prefix> {
    let m = law.mean();
    if 1.0 > x {
        return Ok(Prefix::Outside);
    }
    let mut z = 1u64;
    let mut lvl = x;
    for j in 0..k {
        lvl *= m;
        if z == 0 {
            return Ok(Prefix::Inside(0));
        }
        let stop = if lvl >= MAX_POPULATION as f64 {
            MAX_POPULATION
        } else {
            lvl.floor() as u64
        };
        match draw_generation(law, z, j, stop, rng) {
            Ok(d) if d.stopped || d.total as f64 > lvl => return Ok(Prefix::Outside),
            Ok(d) => z = d.total,
            Err(Error::PopulationOverflow { .. }) => return Ok(Prefix::Outside),
            Err(e) => return Err(e),
        }
    }
    Ok(Prefix::Inside(z))
}

/// `1 − (1 − p)^z`, exactly `p` for `z = 1`.
fn any_exceeds(p: f64, z: u64) -> f64 {
    match z {
        0 => 0.0,
        1 => p,
        _ => -(z as f64 * (-p).ln_1p()).exp_m1(),
    }
}

/// Redraws generation `k` of size `z` conditioned on some offspring count
/// exceeding `t`, then runs to generation `n`. Returns whether `Z_n > target`,
/// with `None` on population overflow.
#[allow(clippy::too_many_arguments)]
fn continuation<R: RngCore + ?Sized>(
    law: &OffspringLaw,
    k: usize,
    n: usize,
    z: u64,
    t: f64,
    p: f64,
    target: f64,
    rng: &mut R,
) -> Result<Option<bool>> {
    // index of the first exceedance, truncated geometric on 0..z
    let all = any_exceeds(p, z);
    let u = uniform_open_closed(rng);
    let j = ((-u * all).ln_1p() / (-p).ln_1p()).floor();
    let j = if j.is_finite() && j >= 0.0 {
        (j as u64).min(z - 1)
    } else {
        z - 1
    };
    let mut total: u128 = 0;
    for _ in 0..j {
        total += law.sample_at_most(t, rng) as u128;
    }
    total += law.sample_above(t, rng)? as u128;
    match draw_generation(law, z - 1 - j, k, u64::MAX, rng) {
        Ok(d) => total += d.total as u128,
        Err(Error::PopulationOverflow { .. }) => return Ok(None),
        Err(e) => return Err(e),
    }
    if total > MAX_POPULATION as u128 {
        return Ok(None);
    }
    let mut size = total as u64;
    for g in k + 1..n {
        if size == 0 {
            break;
        }
        match draw_generation(law, size, g, u64::MAX, rng) {
            Ok(d) => size = d.total,
            Err(Error::PopulationOverflow { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(size as f64 > target))
}

/// Sum over `k < n` of `P̂{A_k(x)} · P̂{W_n > x | A_k(x)}`.
///
/// Stage one estimates `P{A_k}` by conditional Monte Carlo: a prefix path
/// satisfying `B_k(x)` contributes `1 − (1 − F̄(t_k))^{Z_k}` with
/// `t_k = m^{k+1}(1+ε)x`, other paths contribute 0. Stage two draws fresh
/// prefix paths with the same weights, forces the jump exactly and continues
/// to generation `n`, giving a weighted ratio estimate of the conditional
/// probability. The stages use independent lanes, and the standard error
/// follows from the delta method.
pub fn big_jump_estimator<E: Executor>(
    law: &OffspringLaw,
    n: usize,
    x: f64,
    eps: f64,
    config: &BigJumpConfig,
    exec: &E,
) -> Result<EstimatorResult> {
    if n < 1 {
        return Err(Error::bad("the big-jump estimator needs n >= 1"));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::bad("x must be positive and finite"));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::bad("eps must be nonnegative"));
    }
    if config.replicas_per_k == 0 || config.continuations == 0 {
        return Err(Error::bad("replicas and continuations must be positive"));
    }
    let m = law.mean();
    let target = level(m, n, x);
    let r = config.replicas_per_k as f64;
    let mut breakdown = Vec::with_capacity(n);
    let mut total = CompensatedSum::new();
    let mut variance = CompensatedSum::new();
    let mut flags = Vec::new();
    if x < 1.0 {
        flags.push(String::from(
            "x < 1: every event A_k requires Z_0 <= x, so the decomposition is empty",
        ));
    }
    let mut overflow = 0;
    for k in 0..n {
        let t = level(m, k + 1, x) * (1.0 + eps);
        let p = law.tail(t);
        if p == 0.0 {
            flags.push(format!(
                "k={k}: jump threshold {t:.6e} is beyond the tail's numeric range"
            ));
            breakdown.push(0.0);
            continue;
        }
        let lane_one = lanes::BIG_JUMP_BASE + 2 * k as u64;
        let lane_two = lane_one + 1;
        let ones = exec.map_chunks(config.replicas_per_k, |range| -> Result<Vec<f64>> {
            let mut weights = Vec::with_capacity((range.end - range.start) as usize);
            for i in range {
                let mut rng = StreamId::new(config.seed, lane_one, i).rng();
                weights.push(match prefix(law, k, x, &mut rng)? {
                    Prefix::Inside(z) => any_exceeds(p, z),
                    Prefix::Outside => 0.0,
                });
            }
            Ok(weights)
        });
        let twos = exec.map_chunks(config.replicas_per_k, |range| -> Result<(Vec<(f64, f64)>, u64)> {
            let mut paths = Vec::new();
            let mut overflow = 0;
            for i in range {
                let mut rng = StreamId::new(config.seed, lane_two, i).rng();
                let Prefix::Inside(z) = prefix(law, k, x, &mut rng)? else {
                    continue;
                };
                let w = any_exceeds(p, z);
                if w == 0.0 {
                    continue;
                }
                let mut hits = 0u64;
                for _ in 0..config.continuations {
                    match continuation(law, k, n, z, t, p, target, &mut rng)? {
                        Some(true) => hits += 1,
                        Some(false) => {}
                        None => {
                            hits += 1;
                            overflow += 1;
                        }
                    }
                }
                paths.push((w, hits as f64 / config.continuations as f64));
            }
            Ok((paths, overflow))
        });
        let mut weights = Vec::with_capacity(config.replicas_per_k as usize);
        for c in ones {
            weights.extend(c?);
        }
        let mut paths = Vec::new();
        for c in twos {
            let (v, o) = c?;
            paths.extend(v);
            overflow += o;
        }
        // centering on the single-individual weight p keeps n = 1 exact
        let pa = p + weights.iter().map(|w| w - p).collect::<CompensatedSum>().value() / r;
        let var_pa = weights
            .iter()
            .map(|w| (w - pa) * (w - pa))
            .collect::<CompensatedSum>()
            .value()
            / (r * r);
        let (q, var_q) = if paths.is_empty() {
            if pa > 0.0 {
                flags.push(format!("k={k}: no weighted paths in the continuation stage"));
            }
            (0.0, 0.0)
        } else {
            let sw: CompensatedSum = paths.iter().map(|&(w, _)| w).collect();
            let swi: CompensatedSum = paths.iter().map(|&(w, i)| w * i).collect();
            let q = swi.value() / sw.value();
            let mean_w = sw.value() / r;
            let spread: CompensatedSum = paths.iter().map(|&(w, i)| (w * (i - q)).powi(2)).collect();
            (q, spread.value() / (r * r * mean_w * mean_w))
        };
        let contribution = pa * q;
        breakdown.push(contribution);
        total.add(contribution);
        variance.add(q * q * var_pa + pa * pa * var_q);
    }
    let estimate = total.value();
    let mut result = EstimatorResult::from_estimate(
        estimate,
        variance.value().max(0.0).sqrt(),
        config.replicas_per_k * n as u64,
        EstimatorKind::BigJump,
    );
    result.breakdown = Some(breakdown);
    result.overflow_count = overflow;
    if overflow > 0 {
        flags.push(format!(
            "{overflow} continuations overflowed and were counted as exceedances"
        ));
    }
    result.flags = flags;
    Ok(result)
}

/// Budget and seed shared by every row of a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonBudget {
    pub replicas: u64,
    pub seed: u64,
    pub eps: f64,
    pub population_cap: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub n: usize,
    pub x: f64,
    pub estimate: EstimatorResult,
    pub approximation: f64,
    /// `estimate / approximation`.
    pub ratio: f64,
}

/// Estimates `P{W_n > x}` over `n_list × x_list` and divides by the
/// approximation `method`.
pub fn compare_to_asymptotics<E: Executor>(
    law: &OffspringLaw,
    n_list: &[usize],
    x_list: &[f64],
    method: Method,
    estimator: EstimatorKind,
    budget: &ComparisonBudget,
    exec: &E,
) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::with_capacity(n_list.len() * x_list.len());
    for &n in n_list {
        for &x in x_list {
            let estimate = match estimator {
                EstimatorKind::NaiveMc => {
                    naive_mc(law, n, x, budget.replicas, budget.seed, budget.population_cap, exec)?
                }
                EstimatorKind::BigJump => big_jump_estimator(
                    law,
                    n,
                    x,
                    budget.eps,
                    &BigJumpConfig::new(budget.replicas, budget.seed),
                    exec,
                )?,
                EstimatorKind::Exact => exact_w_tail(law, n, x)?,
            };
            let approximation =
                asymptotics::approximate(law, method, Horizon::Finite(n), x, &ApproxOptions::default())?.value;
            rows.push(ComparisonRow {
                n,
                x,
                ratio: estimate.estimate / approximation,
                estimate,
                approximation,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::offspring::LawSpec;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn binary() -> &'static OffspringLaw {
        static L: OnceLock<OffspringLaw> = OnceLock::new();
        L.get_or_init(|| OffspringLaw::finite_support(&[(0, 0.25), (2, 0.75)]).unwrap())
    }

    fn pareto() -> &'static OffspringLaw {
        static L: OnceLock<OffspringLaw> = OnceLock::new();
        L.get_or_init(|| {
            "tuned(pareto(alpha=2), m=2)"
                .parse::<LawSpec>()
                .unwrap()
                .build()
                .unwrap()
        })
    }

    /// Brute-force enumeration of every offspring assignment.
    fn enumerate(pmf: &[(u64, f64)], n: usize) -> Vec<f64> {
        let mut dist: std::collections::BTreeMap<u64, f64> = [(1, 1.0)].into();
        for _ in 0..n {
            let mut next = std::collections::BTreeMap::new();
            for (&z, &pz) in &dist {
                let mut sums: std::collections::BTreeMap<u64, f64> = [(0, 1.0)].into();
                for _ in 0..z {
                    let mut grown = std::collections::BTreeMap::new();
                    for (&s, &ps) in &sums {
                        for &(k, q) in pmf {
                            *grown.entry(s + k).or_insert(0.0) += ps * q;
                        }
                    }
                    sums = grown;
                }
                for (s, ps) in sums {
                    *next.entry(s).or_insert(0.0) += pz * ps;
                }
            }
            dist = next;
        }
        let top = *dist.keys().last().unwrap() as usize;
        let mut v = vec![0.0; top + 1];
        for (k, p) in dist {
            v[k as usize] = p;
        }
        v
    }

    #[test]
    fn exact_hand_values() {
        let r = exact_convolution(binary(), 2, 2).unwrap();
        assert!((r.estimate - 27.0 / 64.0).abs() < 1e-15);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(exact_convolution(binary(), 0, 0).unwrap().estimate, 1.0);
        for t in 0..3 {
            assert_eq!(
                exact_convolution(binary(), 1, t).unwrap().estimate,
                binary().tail_int(t)
            );
        }
        assert!(exact_convolution(pareto(), 2, 2).is_err());
        assert!(matches!(exact_convolution(binary(), 40, 2), Err(Error::TooLarge(_))));
    }

    #[test]
    fn exact_matches_enumeration() {
        let pmf = [(0, 0.1), (1, 0.3), (3, 0.6)];
        let law = OffspringLaw::finite_support(&pmf).unwrap();
        for n in 0..4 {
            let got = exact_distribution(&law, n).unwrap();
            let want = enumerate(&pmf, n);
            for (i, w) in want.iter().enumerate() {
                assert!((got[i] - w).abs() < 1e-14, "n={n} i={i}");
            }
            assert!(got[want.len()..].iter().all(|&p| p == 0.0));
        }
    }

    #[test]
    fn naive_against_exact() {
        let r = naive_mc(binary(), 2, 2.0 / 2.25, 1_000_000, 11, MAX_POPULATION, &Sequential).unwrap();
        assert!((r.estimate - 27.0 / 64.0).abs() < 4.0 * r.std_error);
        assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
        let sure = OffspringLaw::finite_support(&[(1, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(
            naive_mc(&sure, 3, 0.0, 1000, 0, MAX_POPULATION, &Sequential)
                .unwrap()
                .estimate,
            1.0
        );
        let none = naive_mc(binary(), 2, 10.0, 1000, 0, MAX_POPULATION, &Sequential).unwrap();
        assert_eq!(none.estimate, 0.0);
        assert_eq!(none.ci_high, 3.0 / 1000.0);
        assert!(naive_mc(binary(), 2, 1.0, 99, 0, MAX_POPULATION, &Sequential).is_err());
        // a cap of 2 turns every Z_2 = 4 path into a counted overflow
        let capped = naive_mc(binary(), 3, 100.0, 1000, 0, 2, &Sequential).unwrap();
        assert!(capped.overflow_count > 0 && capped.estimate > 0.0);
    }

    #[test]
    fn big_jump_one_generation_is_exact() {
        let p = pareto();
        for x in [1.0, 10.0, 1234.5] {
            let r = big_jump_estimator(p, 1, x, 0.0, &BigJumpConfig::new(100, 5), &Sequential).unwrap();
            assert_eq!(r.estimate, p.tail(p.mean() * x));
            assert_eq!(r.std_error, 0.0);
        }
    }

    #[test]
    fn geometric_index_law() {
        // the truncated geometric first-exceedance index
        let p: f64 = 0.3;
        let z = 4;
        let all = any_exceeds(p, z);
        let mut counts = [0u64; 4];
        let mut rng = StreamId::new(1, 99, 0).rng();
        let reps = 400_000;
        for _ in 0..reps {
            let u = uniform_open_closed(&mut rng);
            let j = ((-u * all).ln_1p() / (-p).ln_1p()).floor() as usize;
            counts[j.min(3)] += 1;
        }
        for (j, &c) in counts.iter().enumerate() {
            let want = (1.0 - p).powi(j as i32) * p / all;
            let got = c as f64 / reps as f64;
            assert!((got - want).abs() < 4.0 * (want * (1.0 - want) / reps as f64).sqrt());
        }
    }

    #[test]
    fn big_jump_below_naive_and_deterministic() {
        let p = pareto();
        let (n, x) = (3, 30.0);
        let cfg = BigJumpConfig::new(20_000, 3);
        let a = big_jump_estimator(p, n, x, 0.0, &cfg, &Sequential).unwrap();
        let b = big_jump_estimator(p, n, x, 0.0, &cfg, &Sequential).unwrap();
        assert_eq!(a, b);
        let naive = naive_mc(p, n, x, 200_000, 3, MAX_POPULATION, &Sequential).unwrap();
        let se = (a.std_error.powi(2) + naive.std_error.powi(2)).sqrt();
        assert!(a.estimate <= naive.estimate + 3.0 * se, "{a:?} {naive:?}");
        assert!(a.estimate >= 0.5 * naive.estimate, "{a:?} {naive:?}");
        let sum: f64 = a.breakdown.as_ref().unwrap().iter().sum();
        assert!((sum - a.estimate).abs() < 1e-12 && sum <= 1.0);
    }

    #[test]
    fn comparison_table() {
        let rows = compare_to_asymptotics(
            binary(),
            &[2],
            &[0.5],
            Method::SeriesFinite,
            EstimatorKind::Exact,
            &ComparisonBudget {
                replicas: 100,
                seed: 0,
                eps: 0.0,
                population_cap: MAX_POPULATION,
            },
            &Sequential,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].ratio, rows[0].estimate.estimate / rows[0].approximation);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn naive_unbiased_on_finite_laws(
            w in proptest::collection::vec(0.05f64..1.0, 3),
            top in 2u64..=3,
            n in 1usize..=4,
            xf in 0.1f64..1.5,
            seed in 0u64..1000,
        ) {
            let pmf = [(0, w[0]), (1, w[1]), (top, w[2] * 3.0)];
            let total: f64 = pmf.iter().map(|p| p.1).sum();
            let pmf: Vec<(u64, f64)> = pmf.iter().map(|&(k, p)| (k, p / total)).collect();
            let Ok(law) = OffspringLaw::finite_support(&pmf) else { return Ok(()); };
            let exact = exact_w_tail(&law, n, xf).unwrap().estimate;
            let r = naive_mc(&law, n, xf, 20_000, seed, MAX_POPULATION, &Sequential).unwrap();
            let se = (exact * (1.0 - exact) / 20_000.0).sqrt();
            prop_assert!((r.estimate - exact).abs() <= 4.5 * se + 1e-12);
        }

        #[test]
        fn breakdown_is_a_subprobability(n in 1usize..5, x in 1.0f64..200.0, seed in 0u64..100) {
            let r = big_jump_estimator(pareto(), n, x, 0.1, &BigJumpConfig::new(300, seed), &Sequential).unwrap();
            let b = r.breakdown.unwrap();
            prop_assert_eq!(b.len(), n);
            prop_assert!(b.iter().all(|&v| v >= 0.0));
            prop_assert!(b.iter().sum::<f64>() <= 1.0);
            prop_assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
        }
    }
}
