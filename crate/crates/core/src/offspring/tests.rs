use std::sync::OnceLock;
use std::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::rng::stream;

fn pareto2() -> &'static OffspringLaw {
    static L: OnceLock<OffspringLaw> = OnceLock::new();
    L.get_or_init(|| OffspringLaw::pareto_integer(2.0, 3.0).unwrap())
}

fn weibull() -> &'static OffspringLaw {
    static L: OnceLock<OffspringLaw> = OnceLock::new();
    L.get_or_init(|| OffspringLaw::discrete_weibull(0.4, 0.3, 1.0).unwrap())
}

fn logcorr() -> &'static OffspringLaw {
    static L: OnceLock<OffspringLaw> = OnceLock::new();
    L.get_or_init(|| OffspringLaw::log_corrected_index_one(2.0, 3).unwrap())
}

fn lognormal() -> &'static OffspringLaw {
    static L: OnceLock<OffspringLaw> = OnceLock::new();
    L.get_or_init(|| OffspringLaw::log_normal_integer(0.5, 1.0).unwrap())
}

fn finite() -> &'static OffspringLaw {
    static L: OnceLock<OffspringLaw> = OnceLock::new();
    L.get_or_init(|| OffspringLaw::finite_support(&[(0, 0.2), (1, 0.1), (3, 0.4), (6, 0.3)]).unwrap())
}

fn all() -> [&'static OffspringLaw; 5] {
    [pareto2(), weibull(), logcorr(), lognormal(), finite()]
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn pareto_table_matches_zeta_tail() {
    let law = pareto2();
    let Family::ParetoInteger { alpha, scale, norm } = *law.family() else {
        unreachable!()
    };
    for k in [0u64, 1, 5, 100, 12345, 1 << 19] {
        // independent oracle: direct sum of the pmf over a long range plus
        // the integral of the remainder
        let end = k + 2_000_000;
        let mut s = 0.0;
        for j in (k + 1..end).rev() {
            s += (j as f64 + scale).powf(-alpha - 1.0);
        }
        let a = end as f64 + scale - 0.5;
        s += a.powf(-alpha) / alpha;
        assert!(rel(law.tail_int(k), s / norm) < 1e-9, "k={k}");
    }
}

#[test]
fn pareto_tail_is_continuous_across_table_edge() {
    let law = pareto2();
    let k = TABLE_LEN as u64;
    let inside = law.tail_int(k - 1);
    let outside = law.tail_int(k);
    let step = law.family().pmf_at(k);
    assert!(rel(inside - outside, step) < 1e-6);
}

#[test]
fn pareto_moments_match_brute_force() {
    let law = OffspringLaw::pareto_integer(3.0, 4.0).unwrap();
    let n = 4_000_000u64;
    let w = |k: u64| (k as f64 + 4.0).powi(-4);
    let tail_end = n as f64 + 3.5;
    let norm: f64 = (0..n).map(w).sum::<f64>() + tail_end.powi(-3) / 3.0;
    let mean: f64 = (0..n).map(|k| k as f64 * w(k)).sum::<f64>() + tail_end.powi(-2) / 2.0;
    assert!(rel(law.mean(), mean / norm) < 1e-9);
    // E ξ² converges like 1/N; add the analytic remainder ∫ u² (u+4)^{-4}
    let second: f64 = (0..n).map(|k| (k * k) as f64 * w(k)).sum::<f64>() + 1.0 / tail_end;
    assert!(rel(law.second_moment(), second / norm) < 1e-6);
    assert!(pareto2().variance().is_infinite());
}

#[test]
fn weibull_and_lognormal_tails_are_closed_form() {
    let law = weibull();
    for k in [1u64, 10, 1000, 5_000_000] {
        let want = (-0.3 * (k as f64).powf(0.4)).exp();
        assert!(rel(law.tail(k as f64), want) < 1e-14);
    }
    assert_eq!(law.tail(0.0), 1.0);
    let ln = lognormal();
    for k in [0u64, 3, 50, 2_000_000] {
        let z = ((k as f64 + 1.0).ln() - 0.5) / 1.0;
        let want = 0.5 * libm::erfc(z / core::f64::consts::SQRT_2);
        assert!(rel(ln.tail(k as f64), want) < 1e-13);
    }
}

#[test]
fn logcorr_tail_and_head() {
    let law = logcorr();
    assert_eq!(law.pmf(0), 0.0);
    assert!((law.pmf(1) - 0.25).abs() < 1e-15);
    assert!((law.tail(1.0) - 0.75).abs() < 1e-15);
    assert!((law.tail(2.0) - 0.5).abs() < 1e-15);
    let c = 0.5 * 2.0 * 2f64.ln().powi(3);
    for k in [10u64, 1000, 1 << 21] {
        let u = k as f64;
        assert!(rel(law.tail(u), c / (u * u.ln().powi(3))) < 1e-14);
    }
    assert!(law.variance().is_infinite());
}

#[test]
fn means_match_direct_tail_sums() {
    // Weibull: direct tail sum is the oracle (the tail is negligible by 1e8).
    let w = weibull();
    let direct: f64 = (0..100_000_000u64)
        .step_by(1)
        .take(3_000_000)
        .map(|k| w.family().tail_at(k))
        .sum::<f64>();
    let rest: f64 = {
        let mut s = 0.0;
        let mut k = 3_000_000u64;
        while k < 400_000_000_000 {
            let t = w.family().tail_at(k);
            s += t * 1000.0;
            k += 1000;
        }
        s
    };
    assert!(rel(w.mean(), direct + rest) < 1e-6, "{} vs {}", w.mean(), direct + rest);
    let f = finite();
    assert!((f.mean() - (0.1 + 1.2 + 1.8)).abs() < 1e-15);
    assert!((f.second_moment() - (0.1 + 3.6 + 10.8)).abs() < 1e-14);
}

#[test]
fn logcorr_mean_has_closed_form_remainder() {
    let law = logcorr();
    let c = 0.5 * 2.0 * 2f64.ln().powi(3);
    let cut = 50_000_000u64;
    let head: f64 = (0..cut).map(|k| law.family().tail_at(k)).sum();
    // ∫_cut^∞ C/(u ln³ u) du = C/(2 ln² cut), with a half-term correction
    let u = cut as f64;
    let rest = c / (2.0 * u.ln().powi(2)) + 0.5 * c / (u * u.ln().powi(3));
    assert!(rel(law.mean(), head + rest) < 1e-9);
}

#[test]
fn pmf_sums_to_one() {
    for law in all() {
        let n = law.table_len() as u64;
        let mut s: CompensatedSum = (0..n).map(|k| law.pmf(k)).collect();
        s.add(law.tail_int(n - 1));
        assert!((s.value() - 1.0).abs() < 1e-13, "{:?}", law.kind());
    }
}

#[test]
fn tail_edge_cases() {
    let law = pareto2();
    assert_eq!(law.tail(-3.0), 1.0);
    assert_eq!(law.tail(2.7), law.tail(2.0));
    assert_eq!(finite().tail(6.0), 0.0);
    assert!(matches!(finite().hazard(6.0), Err(Error::TailZero { .. })));
    assert!(matches!(weibull().hazard(1e300), Err(Error::TailZero { .. })));
    assert!((law.hazard(10.0).unwrap() + law.tail(10.0).ln()).abs() < 1e-15);
}

#[test]
fn constructor_validation() {
    assert!(matches!(
        OffspringLaw::pareto_integer(1.0, 1.0),
        Err(Error::BadParam(_))
    ));
    assert!(matches!(
        OffspringLaw::pareto_integer(2.0, 0.0),
        Err(Error::BadParam(_))
    ));
    assert!(matches!(
        OffspringLaw::discrete_weibull(1.0, 1.0, 1.0),
        Err(Error::BadParam(_))
    ));
    assert!(matches!(
        OffspringLaw::discrete_weibull(0.5, 1.0, 1.5),
        Err(Error::BadParam(_))
    ));
    assert!(matches!(
        OffspringLaw::log_corrected_index_one(1.0, 3),
        Err(Error::BadParam(_))
    ));
    assert!(matches!(
        OffspringLaw::log_normal_integer(0.0, 0.0),
        Err(Error::BadParam(_))
    ));
    assert!(matches!(
        OffspringLaw::finite_support(&[(0, 0.5), (1, 0.4)]),
        Err(Error::BadPmf(_))
    ));
    assert!(matches!(
        OffspringLaw::finite_support(&[(0, 0.5), (0, 0.5)]),
        Err(Error::BadPmf(_))
    ));
    assert!(matches!(
        OffspringLaw::finite_support(&[(0, 0.5), (1, 0.5)]),
        Err(Error::SubcriticalMean { .. })
    ));
    assert!(matches!(
        OffspringLaw::discrete_weibull(0.5, 5.0, 0.5),
        Err(Error::SubcriticalMean { .. })
    ));
}

#[test]
fn inverse_tail_beyond_table() {
    let law = pareto2();
    for u in [1e-7, 1e-9, 1e-12, 3e-15] {
        let k = law.inverse_tail(u);
        assert!(k >= TABLE_LEN as u64 - 1 || law.tail_int(k) < u);
        assert!(law.tail_int(k) < u);
        assert!(k == 0 || law.tail_int(k - 1) >= u);
    }
}

#[test]
fn sample_frequencies_match_pmf() {
    let law = finite();
    let mut rng = stream(7, 0, 0);
    let n = 400_000;
    let mut counts = [0usize; 7];
    for _ in 0..n {
        counts[law.sample(&mut rng) as usize] += 1;
    }
    for k in 0..7u64 {
        let p = law.pmf(k);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let phat = counts[k as usize] as f64 / n as f64;
        assert!((phat - p).abs() <= 5.0 * se + 1e-12, "k={k}: {phat} vs {p}");
    }
}

#[test]
fn sampled_tails_match_for_unbounded_laws() {
    let n = 200_000;
    for (i, law) in [pareto2(), weibull(), logcorr(), lognormal()].into_iter().enumerate() {
        let mut rng = stream(11, i as u64, 0);
        let draws: Vec<u64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        for k in [0u64, 1, 3, 10, 100] {
            let p = law.tail_int(k);
            let phat = draws.iter().filter(|&&d| d > k).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((phat - p).abs() <= 5.0 * se + 1e-9, "{:?} k={k}", law.kind());
        }
    }
}

#[test]
fn conditional_sampling_respects_threshold() {
    let law = pareto2();
    let mut rng = stream(3, 0, 0);
    let n = 100_000;
    let t = 50.0;
    let mut above_100 = 0;
    for _ in 0..n {
        let a = law.sample_above(t, &mut rng).unwrap();
        assert!(a > 50);
        if a > 100 {
            above_100 += 1;
        }
        assert!(law.sample_at_most(t, &mut rng) <= 50);
    }
    let p = law.tail(100.0) / law.tail(50.0);
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((above_100 as f64 / n as f64 - p).abs() < 5.0 * se);
    assert!(matches!(
        finite().sample_above(6.0, &mut rng),
        Err(Error::ConditionalTailEmpty { .. })
    ));
}

#[test]
fn truncated_moments() {
    let f = finite();
    assert!((f.truncated_moment(1.0, 3.0).unwrap() - 1.3).abs() < 1e-15);
    assert!((f.truncated_moment(2.0, 5.5).unwrap() - 3.7).abs() < 1e-14);
    assert_eq!(f.truncated_moment(1.0, -1.0).unwrap(), 0.0);
    let p = pareto2();
    assert!(p.truncated_moment(2.0, f64::INFINITY).unwrap().is_infinite());
    assert!(p.truncated_moment(2.5, f64::INFINITY).unwrap().is_infinite());
    // E{ξ; ξ ≤ c} increases to the mean
    let below = p.truncated_moment(1.0, 3.0e6).unwrap();
    assert!(below < p.mean());
    let Family::ParetoInteger { norm, .. } = *p.family() else {
        unreachable!()
    };
    // tail of the mean beyond c ≈ ∫_c^∞ u (u+s)^{-3} du / norm ≈ 1/(c norm)
    assert!(rel(p.mean() - below, 1.0 / (3.0e6 * norm)) < 1e-3);
    // E ξ^{1.5} for α = 2 from a long direct sum plus remainder ∫ u^{1.5} u^{-3}
    let direct = p.truncated_moment(1.5, 1000.0).unwrap();
    let brute: f64 = (1..=1000u64).map(|k| (k as f64).powf(1.5) * p.pmf(k)).sum();
    assert!(rel(direct, brute) < 1e-13);
    let full = p.truncated_moment(1.5, f64::INFINITY).unwrap();
    let partial = p.truncated_moment(1.5, 1.0e9).unwrap();
    let remainder = 2.0 * (1.0e9f64).powf(-0.5) / norm;
    assert!(rel(full - partial, remainder) < 1e-3);
}

#[test]
fn x_log_x_moment_matches_direct_sum() {
    let w = weibull();
    let direct: f64 = (1..3_000_000u64).map(|k| (k as f64) * (k as f64).ln() * w.pmf(k)).sum();
    let approx = w.x_log_x_moment().unwrap();
    assert!(approx >= direct && rel(approx, direct) < 1e-3);
    let f = finite();
    let want = 3.0 * 3f64.ln() * 0.4 + 6.0 * 6f64.ln() * 0.3;
    assert!((f.x_log_x_moment().unwrap() - want).abs() < 1e-14);
    let lc = logcorr().x_log_x_moment().unwrap();
    assert!(lc.is_finite() && lc > 0.0);
}

#[test]
fn integrated_tail_matches_step_sums() {
    let f = finite();
    // ∫_0^∞ F̄ = mean
    assert!((f.integrated_tail(0.0, f64::INFINITY).unwrap() - f.mean()).abs() < 1e-14);
    let want = 0.5 * f.tail(1.5) + f.tail(2.0) + f.tail(3.0) + 0.25 * f.tail(4.0);
    assert!((f.integrated_tail(1.5, 4.25).unwrap() - want).abs() < 1e-15);
    let p = pareto2();
    assert!(rel(p.integrated_tail(0.0, f64::INFINITY).unwrap(), p.mean()) < 1e-10);
    let a = p.integrated_tail(10.0, 3.0e6).unwrap();
    let brute: f64 = (10..3_000_000u64).map(|k| p.tail_int(k)).sum();
    assert!(rel(a, brute) < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn inverse_tail_is_generalized_inverse(bits in 1u64..(1u64 << 53), which in 0usize..5) {
        let u = bits as f64 / (1u64 << 53) as f64;
        let law = all()[which];
        let k = law.inverse_tail(u);
        prop_assert!(law.tail_int(k) < u);
        prop_assert!(k == 0 || law.tail_int(k - 1) >= u);
    }

    #[test]
    fn tail_is_monotone(x in 0.0f64..1e9, dx in 0.0f64..1e6, which in 0usize..5) {
        let law = all()[which];
        let a = law.tail(x);
        let b = law.tail(x + dx);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
    }
}
