//! Exact simulation of Galton-Watson trajectories.
//!
//! `Z_0 = 1` and `Z_{k+1}` is the sum of `Z_k` independent offspring counts.
//! Every individual is drawn exactly (no normal or stable approximation), so
//! per-generation maxima are exact and the big-jump events can be tracked
//! online. Generation sizes are 63-bit integers; exceeding `i64::MAX` aborts
//! the run with [`Error::PopulationOverflow`].

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math::Moments;
use crate::offspring::OffspringLaw;
use crate::rng::{lanes, StreamId};

#[allow(unused_imports)]
use num_traits::Float;

/// Individuals are drawn in blocks of this many, with the running sum kept in
/// 128 bits and checked once per block.
pub const BLOCK: u64 = 1 << 16;

/// Largest representable generation size.
pub const MAX_POPULATION: u64 = i64::MAX as u64;

/// Largest horizon for which events can be tracked.
pub const MAX_EVENT_HORIZON: usize = 63;

/// One simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// `Z_0, ..., Z_n`.
    pub sizes: Vec<u64>,
    /// `W_k = Z_k m^{-k}`.
    pub w_values: Vec<f64>,
    /// Largest offspring count in generation `k`, for `k < n` (0 when extinct).
    pub gen_max_offspring: Vec<u64>,
    /// First generation with `Z_k = 0`.
    pub extinct_at: Option<usize>,
    /// Some generation exceeded the population cap.
    pub capped: bool,
    pub stream: StreamId,
    pub forced: Option<ForcedJump>,
}

impl TrajectoryRecord {
    pub fn horizon(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn final_w(&self) -> f64 {
        *self.w_values.last().expect("trajectory has generation 0")
    }
}

/// Details of the conditioned draw in [`simulate_forced_jump`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcedJump {
    pub generation: usize,
    pub threshold: f64,
    /// The conditioned offspring count, `None` if generation `k` was empty.
    pub value: Option<u64>,
}

/// Which big-jump events occurred along a path.
///
/// Bit `k` of `b_k_holds` is `Z_j ≤ m^j x` for all `j ≤ k`; bit `k` of
/// `a_k_fired` is `B_k(x)` together with some offspring count of generation
/// `k` exceeding `m^{k+1} · multiplier · x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventFlags {
    pub b_k_holds: u64,
    pub a_k_fired: u64,
    pub threshold_x: f64,
    pub eps: f64,
    pub multiplier: f64,
}

impl EventFlags {
    pub fn b(&self, k: usize) -> bool {
        self.b_k_holds >> k & 1 == 1
    }

    pub fn a(&self, k: usize) -> bool {
        self.a_k_fired >> k & 1 == 1
    }
}

/// Result of drawing one generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationDraw {
    pub total: u64,
    pub max: u64,
    /// The draw stopped early after `total` exceeded the stop level.
    pub stopped: bool,
}

/// Sums `count` offspring counts; stops as soon as the sum exceeds
/// `stop_above` (pass `u64::MAX` to draw everything).
pub fn draw_generation<R: RngCore + ?Sized>(
    law: &OffspringLaw,
    count: u64,
    generation: usize,
    stop_above: u64,
    rng: &mut R,
) -> Result<GenerationDraw> {
    draw_with(count, generation, stop_above, || law.sample(rng))
}

fn draw_with(
    count: u64,
    generation: usize,
    stop_above: u64,
    mut sample: impl FnMut() -> u64,
) -> Result<GenerationDraw> {
    let mut total: u128 = 0;
    let mut max = 0u64;
    let mut left = count;
    while left > 0 {
        let block = left.min(BLOCK);
        let mut sum: u128 = 0;
        for _ in 0..block {
            let xi = sample();
            sum += xi as u128;
            if xi > max {
                max = xi;
            }
        }
        total += sum;
        left -= block;
        if total > MAX_POPULATION as u128 {
            return Err(Error::PopulationOverflow {
                generation: generation + 1,
            });
        }
        if total > stop_above as u128 && left > 0 {
            return Ok(GenerationDraw {
                total: total as u64,
                max,
                stopped: true,
            });
        }
    }
    Ok(GenerationDraw {
        total: total as u64,
        max,
        stopped: false,
    })
}

struct Builder {
    sizes: Vec<u64>,
    maxima: Vec<u64>,
    extinct_at: Option<usize>,
    capped: bool,
}

impl Builder {
    fn new(n: usize) -> Self {
        let mut sizes = Vec::with_capacity(n + 1);
        sizes.push(1);
        Builder {
            sizes,
            maxima: Vec::with_capacity(n),
            extinct_at: None,
            capped: false,
        }
    }

    fn current(&self) -> u64 {
        *self.sizes.last().unwrap()
    }

    fn push(&mut self, size: u64, max: u64, cap: u64) {
        self.maxima.push(max);
        self.sizes.push(size);
        if size == 0 && self.extinct_at.is_none() {
            self.extinct_at = Some(self.sizes.len() - 1);
        }
        if size > cap {
            self.capped = true;
        }
    }

    fn finish(self, m: f64, stream: StreamId, forced: Option<ForcedJump>) -> TrajectoryRecord {
        let w_values = self
            .sizes
            .iter()
            .enumerate()
            .map(|(k, &z)| z as f64 * m.powi(-(k as i32)))
            .collect();
        TrajectoryRecord {
            sizes: self.sizes,
            w_values,
            gen_max_offspring: self.maxima,
            extinct_at: self.extinct_at,
            capped: self.capped,
            stream,
            forced,
        }
    }
}

fn check_cap(cap: u64) -> Result<()> {
    if cap > MAX_POPULATION {
        return Err(Error::bad("population cap exceeds 2^63 - 1"));
    }
    Ok(())
}

/// Simulates `Z_0..Z_n` on the given stream.
pub fn simulate(law: &OffspringLaw, n: usize, stream: StreamId, population_cap: u64) -> Result<TrajectoryRecord> {
    check_cap(population_cap)?;
    let mut rng = stream.rng();
    let mut b = Builder::new(n);
    for k in 0..n {
        let d = draw_generation(law, b.current(), k, u64::MAX, &mut rng)?;
        b.push(d.total, d.max, population_cap);
    }
    Ok(b.finish(law.mean(), stream, None))
}

/// [`simulate`] with the events `B_k(x)` and `A_k(x)` at threshold
/// multiplier `1 + eps`.
pub fn simulate_with_events(
    law: &OffspringLaw,
    n: usize,
    x: f64,
    eps: f64,
    stream: StreamId,
) -> Result<(TrajectoryRecord, EventFlags)> {
    if !(eps >= 0.0) {
        return Err(Error::bad("eps must be nonnegative"));
    }
    simulate_tracking(law, n, x, 1.0 + eps, stream)
}

/// Event tracking with an arbitrary jump threshold multiplier (for instance
/// `1 - eps`).
pub fn simulate_tracking(
    law: &OffspringLaw,
    n: usize,
    x: f64,
    multiplier: f64,
    stream: StreamId,
) -> Result<(TrajectoryRecord, EventFlags)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::bad("event threshold x must be positive"));
    }
    if !(multiplier > 0.0) {
        return Err(Error::bad("jump threshold multiplier must be positive"));
    }
    if n > MAX_EVENT_HORIZON {
        return Err(Error::bad("event tracking supports at most 63 generations"));
    }
    let m = law.mean();
    let record = simulate(law, n, stream, MAX_POPULATION)?;
    let flags = event_flags(&record, m, x, multiplier);
    Ok((record, flags))
}

/// Computes the event bitmasks of an existing path.
pub fn event_flags(record: &TrajectoryRecord, m: f64, x: f64, multiplier: f64) -> EventFlags {
    let mut b_mask = 0u64;
    let mut a_mask = 0u64;
    let mut level = x;
    for (k, &z) in record.sizes.iter().enumerate() {
        if z as f64 > level {
            break;
        }
        b_mask |= 1 << k;
        level *= m;
        if let Some(&max) = record.gen_max_offspring.get(k) {
            if max as f64 > level * multiplier {
                a_mask |= 1 << k;
            }
        }
    }
    EventFlags {
        b_k_holds: b_mask,
        a_k_fired: a_mask,
        threshold_x: x,
        eps: multiplier - 1.0,
        multiplier,
    }
}

/// Simulates generations `0..=k` normally, forces the first individual of
/// generation `k` to have more than `jump_threshold` children, then
/// continues to generation `n`.
pub fn simulate_forced_jump(
    law: &OffspringLaw,
    n: usize,
    k: usize,
    jump_threshold: f64,
    stream: StreamId,
) -> Result<TrajectoryRecord> {
    if k >= n {
        return Err(Error::bad("forced generation must be below the horizon"));
    }
    if law.tail(jump_threshold) == 0.0 {
        return Err(Error::ConditionalTailEmpty {
            threshold: jump_threshold,
        });
    }
    let mut rng = stream.rng();
    let mut b = Builder::new(n);
    let mut forced = ForcedJump {
        generation: k,
        threshold: jump_threshold,
        value: None,
    };
    for j in 0..n {
        let z = b.current();
        if j == k && z > 0 {
            let big = law.sample_above(jump_threshold, &mut rng)?;
            let rest = draw_generation(law, z - 1, j, u64::MAX, &mut rng)?;
            let total = rest.total as u128 + big as u128;
            if total > MAX_POPULATION as u128 {
                return Err(Error::PopulationOverflow { generation: j + 1 });
            }
            forced.value = Some(big);
            b.push(total as u64, rest.max.max(big), MAX_POPULATION);
        } else {
            let d = draw_generation(law, z, j, u64::MAX, &mut rng)?;
            b.push(d.total, d.max, MAX_POPULATION);
        }
    }
    Ok(b.finish(law.mean(), stream, Some(forced)))
}

/// Per-generation summary of many independent paths.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSummary {
    /// Moments of `W_k` for `k = 0..=n`.
    pub w: Vec<Moments>,
    /// Paths extinct by generation `k`.
    pub extinct: Vec<u64>,
    /// Paths that exceeded the population cap.
    pub capped: u64,
}

/// Simulates `replicas` paths to generation `n` (replica `i` on stream
/// `(seed, SIMULATE, i)`) and accumulates the moments of every `W_k`.
pub fn simulate_summary<E: Executor>(
    law: &OffspringLaw,
    n: usize,
    replicas: u64,
    seed: u64,
    population_cap: u64,
    exec: &E,
) -> Result<GenerationSummary> {
    check_cap(population_cap)?;
    let parts = exec.map_chunks(replicas, |range| -> Result<GenerationSummary> {
        let mut part = GenerationSummary {
            w: vec![Moments::new(); n + 1],
            extinct: vec![0; n + 1],
            capped: 0,
        };
        for i in range {
            let r = simulate(law, n, StreamId::new(seed, lanes::SIMULATE, i), population_cap)?;
            for (k, &w) in r.w_values.iter().enumerate() {
                part.w[k].push(w);
            }
            if let Some(at) = r.extinct_at {
                part.extinct[at..].iter_mut().for_each(|e| *e += 1);
            }
            part.capped += r.capped as u64;
        }
        Ok(part)
    });
    let mut total = GenerationSummary {
        w: vec![Moments::new(); n + 1],
        extinct: vec![0; n + 1],
        capped: 0,
    };
    for part in parts {
        let part = part?;
        for k in 0..=n {
            total.w[k] = total.w[k].merge(&part.w[k]);
            total.extinct[k] += part.extinct[k];
        }
        total.capped += part.capped;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::lanes;
    use std::sync::OnceLock;

    fn binary() -> &'static OffspringLaw {
        static L: OnceLock<OffspringLaw> = OnceLock::new();
        L.get_or_init(|| OffspringLaw::finite_support(&[(0, 0.25), (2, 0.75)]).unwrap())
    }

    fn sid(seed: u64, r: u64) -> StreamId {
        StreamId::new(seed, lanes::SIMULATE, r)
    }

    fn within(count: usize, n: usize, p: f64, z: f64) -> bool {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        (count as f64 / n as f64 - p).abs() <= z * se
    }

    #[test]
    fn horizon_zero_is_the_root() {
        let r = simulate(binary(), 0, sid(1, 0), MAX_POPULATION).unwrap();
        assert_eq!(r.sizes, [1]);
        assert_eq!(r.w_values, [1.0]);
        assert!(r.gen_max_offspring.is_empty());
    }

    #[test]
    fn one_and_two_step_laws() {
        let n = 1_000_000;
        let mut z1 = 0;
        let mut z2 = 0;
        for r in 0..n as u64 {
            let t = simulate(binary(), 2, sid(5, r), MAX_POPULATION).unwrap();
            if t.sizes[1] == 2 {
                z1 += 1;
            }
            if t.sizes[2] > 2 {
                z2 += 1;
            }
        }
        assert!(within(z1, n, 0.75, 4.0));
        assert!(within(z2, n, 27.0 / 64.0, 4.0));
    }

    #[test]
    fn record_invariants() {
        let law = OffspringLaw::pareto_integer(2.0, 3.0).unwrap();
        for r in 0..2000 {
            let t = simulate(&law, 8, sid(9, r), MAX_POPULATION).unwrap();
            let m = law.mean();
            assert_eq!(t.sizes[0], 1);
            for k in 0..8 {
                let (z, next, max) = (t.sizes[k], t.sizes[k + 1], t.gen_max_offspring[k]);
                if z == 0 {
                    assert_eq!(next, 0);
                    assert_eq!(max, 0);
                } else {
                    assert!(max <= next && next <= z * max);
                }
                assert_eq!(t.w_values[k + 1], next as f64 * m.powi(-(k as i32 + 1)));
            }
            if let Some(e) = t.extinct_at {
                assert!(t.sizes[e..].iter().all(|&z| z == 0));
                assert!(t.sizes[..e].iter().all(|&z| z > 0));
            }
        }
    }

    #[test]
    fn reproducible_per_stream() {
        let law = OffspringLaw::pareto_integer(1.5, 2.0).unwrap();
        let a = simulate(&law, 10, sid(3, 17), MAX_POPULATION).unwrap();
        let b = simulate(&law, 10, sid(3, 17), MAX_POPULATION).unwrap();
        let c = simulate(&law, 10, sid(3, 18), MAX_POPULATION).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.sizes, c.sizes);
    }

    #[test]
    fn overflow_is_reported() {
        let err = draw_with(4, 1, u64::MAX, || 1 << 62).unwrap_err();
        assert_eq!(err, Error::PopulationOverflow { generation: 2 });
        let ok = draw_with(1, 1, u64::MAX, || MAX_POPULATION).unwrap();
        assert_eq!(ok.total, MAX_POPULATION);
        let early = draw_with(3 * BLOCK, 0, 10, || 1).unwrap();
        assert!(early.stopped && early.total == BLOCK);
    }

    #[test]
    fn cap_marks_run() {
        let law = OffspringLaw::finite_support(&[(3, 1.0)]).unwrap();
        let t = simulate(&law, 4, sid(0, 0), 20).unwrap();
        assert!(t.capped);
        assert_eq!(t.sizes, [1, 3, 9, 27, 81]);
        assert!(simulate(&law, 1, sid(0, 0), u64::MAX).is_err());
    }

    #[test]
    fn event_flags_match_definitions() {
        let law = OffspringLaw::pareto_integer(2.0, 3.0).unwrap();
        let m = law.mean();
        for r in 0..3000 {
            let (t, f) = simulate_with_events(&law, 6, 5.0, 0.1, sid(2, r)).unwrap();
            for k in 0..=6 {
                let b = (0..=k).all(|j| t.sizes[j] as f64 <= m.powi(j as i32) * 5.0);
                assert_eq!(f.b(k), b);
                if k < 6 {
                    let jump = t.gen_max_offspring[k] as f64 > m.powi(k as i32 + 1) * 1.1 * 5.0;
                    assert_eq!(f.a(k), b && jump);
                }
                if k > 0 && f.b(k) {
                    assert!(f.b(k - 1));
                }
            }
        }
        let (_, f) = simulate_with_events(&law, 4, 1e15, 0.0, sid(2, 0)).unwrap();
        assert_eq!(f.a_k_fired, 0);
        assert_eq!(f.b_k_holds, 0b11111);
        assert!(matches!(
            simulate_with_events(&law, 4, 0.0, 0.0, sid(2, 0)),
            Err(Error::BadParam(_))
        ));
    }

    #[test]
    fn first_generation_jump_probability() {
        let law = OffspringLaw::pareto_integer(2.0, 3.0).unwrap();
        let m = law.mean();
        let x = 5.0;
        let n = 400_000;
        let mut fired = 0;
        for r in 0..n as u64 {
            let (_, f) = simulate_with_events(&law, 1, x, 0.0, sid(4, r)).unwrap();
            if f.a(0) {
                fired += 1;
            }
        }
        // with one ancestor, A_0 is exactly {ξ > m x}
        assert!(within(fired, n, law.tail(m * x), 5.0));
    }

    #[test]
    fn jump_indicator_is_monotone_in_x() {
        let law = OffspringLaw::pareto_integer(2.0, 3.0).unwrap();
        let m = law.mean();
        for r in 0..500 {
            let t = simulate(&law, 6, sid(8, r), MAX_POPULATION).unwrap();
            let lo = event_flags(&t, m, 3.0, 1.0);
            let hi = event_flags(&t, m, 30.0, 1.0);
            for k in 0..6 {
                let jump = |x: f64| t.gen_max_offspring[k] as f64 > m.powi(k as i32 + 1) * x;
                assert!(!jump(30.0) || jump(3.0));
                assert!(!hi.a(k) || hi.b(k));
                assert!(!lo.a(k) || lo.b(k));
            }
        }
    }

    #[test]
    fn forced_jump_draw_follows_conditional_tail() {
        let law = OffspringLaw::pareto_integer(2.0, 3.0).unwrap();
        let t = 20.0;
        let n = 200_000;
        let mut draws = Vec::with_capacity(n);
        for r in 0..n as u64 {
            let rec = simulate_forced_jump(&law, 1, 0, t, sid(6, r)).unwrap();
            let v = rec.forced.unwrap().value.unwrap();
            assert!(v > 20 && rec.sizes[1] == v);
            draws.push(v);
        }
        for s in [1.0, 5.0, 20.0, 100.0] {
            let p = law.tail(t + s) / law.tail(t);
            let c = draws.iter().filter(|&&v| v as f64 > t + s).count();
            assert!(within(c, n, p, 5.0), "s={s}");
        }
        assert!(matches!(
            simulate_forced_jump(binary(), 2, 0, 2.0, sid(0, 0)),
            Err(Error::ConditionalTailEmpty { .. })
        ));
        assert!(matches!(
            simulate_forced_jump(binary(), 2, 2, 0.5, sid(0, 0)),
            Err(Error::BadParam(_))
        ));
    }

    #[test]
    fn forced_jump_last_generation_only() {
        let law = OffspringLaw::pareto_integer(2.0, 3.0).unwrap();
        for r in 0..200 {
            let plain = simulate(&law, 3, sid(7, r), MAX_POPULATION).unwrap();
            let forced = simulate_forced_jump(&law, 3, 2, 50.0, sid(7, r)).unwrap();
            assert_eq!(plain.sizes[..3], forced.sizes[..3]);
            if forced.sizes[2] > 0 {
                assert!(forced.sizes[3] > 50);
            } else {
                assert_eq!(forced.forced.unwrap().value, None);
            }
        }
    }

    #[test]
    fn martingale_mean_and_variance() {
        let law = OffspringLaw::pareto_integer(3.5, 5.0).unwrap();
        let m = law.mean();
        let n_gen = 6;
        let reps = 200_000;
        let mut s = 0.0;
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        for r in 0..reps {
            let w = simulate(&law, n_gen, sid(10, r), MAX_POPULATION).unwrap().final_w();
            s += w;
            s2 += w * w;
            s4 += w.powi(4);
        }
        let nf = reps as f64;
        let mean = s / nf;
        let var = s2 / nf - mean * mean;
        assert!((mean - 1.0).abs() < 5.0 * (var / nf).sqrt());
        let want = law.variance() * (1.0 - m.powi(-(n_gen as i32))) / (m * m - m);
        // standard error of the sample variance from the fourth moment
        let se_var = ((s4 / nf - (s2 / nf).powi(2)) / nf).sqrt();
        assert!((var - want).abs() < 5.0 * se_var, "{var} vs {want}");
    }

    #[test]
    fn summary_matches_paths() {
        let reps = 20_000;
        let sum = simulate_summary(binary(), 5, reps, 4, MAX_POPULATION, &crate::exec::Sequential).unwrap();
        let mut direct = Moments::new();
        for r in 0..reps {
            direct.push(simulate(binary(), 5, sid(4, r), MAX_POPULATION).unwrap().final_w());
        }
        assert_eq!(sum.w[5].count, reps);
        assert!((sum.w[5].mean - direct.mean).abs() < 1e-12);
        assert!((sum.w[5].variance() - direct.variance()).abs() < 1e-10);
        assert_eq!(sum.w[0].variance(), 0.0);
        // P{Z_k = 0} from iterating the pgf f(s) = 1/4 + 3/4 s^2
        let mut q = 0.0;
        for k in 1..=5 {
            q = 0.25 + 0.75 * q * q;
            let p = sum.extinct[k] as f64 / reps as f64;
            assert!((p - q).abs() < 4.0 * (q * (1.0 - q) / reps as f64).sqrt());
        }
    }
}
