//! Closed-form approximations of `P{W_n > x}`.
//!
//! Asymptotic equivalences are evaluated with every `o(1)` term set to zero
//! and every `1 + o(1)` factor set to one; the result carries a method tag so
//! callers can attach regime-appropriate tolerances.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::classes::{self, ClassReport};
use crate::error::{Error, Result};
use crate::math::CompensatedSum;
use crate::offspring::OffspringLaw;

#[allow(unused_imports)]
use num_traits::Float;

/// A horizon `n`, possibly infinite (the martingale limit `W`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(n) => write!(f, "{n}"),
            Horizon::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Horizon::Infinite);
        }
        s.parse()
            .map(Horizon::Finite)
            .map_err(|_| Error::bad(alloc::format!("horizon must be an integer or `inf`, got `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    SeriesFinite,
    SeriesInfinite,
    WeibullPrincipal,
    WeibullCorrectedLower,
    IndexOneIntegral,
    IndexOneIntegralInfinite,
    Lemma32Lower,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::SeriesFinite => "series",
            Method::SeriesInfinite => "series_inf",
            Method::WeibullPrincipal => "weibull",
            Method::WeibullCorrectedLower => "weibull_corrected",
            Method::IndexOneIntegral => "index_one",
            Method::IndexOneIntegralInfinite => "index_one_inf",
            Method::Lemma32Lower => "variance_lower",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "series" => Method::SeriesFinite,
            "series_inf" => Method::SeriesInfinite,
            "weibull" => Method::WeibullPrincipal,
            "weibull_corrected" => Method::WeibullCorrectedLower,
            "index_one" => Method::IndexOneIntegral,
            "index_one_inf" => Method::IndexOneIntegralInfinite,
            "variance_lower" => Method::Lemma32Lower,
            _ => return Err(Error::bad(alloc::format!("unknown approximation method `{s}`"))),
        })
    }
}

/// An approximation value with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TailApproximation {
    pub value: f64,
    pub method: Method,
    /// Number of series terms or quadrature panels used.
    pub truncation_terms: usize,
    /// Bound on the neglected series tail; `NaN` when none is available.
    pub truncation_bound: f64,
    pub quadrature_error: f64,
    /// The series was truncated by the heuristic small-terms rule.
    pub heuristic: bool,
    /// The bound is vacuous (nonpositive prefactor) and the value was set to 0.
    pub vacuous: bool,
}

impl TailApproximation {
    fn new(value: f64, method: Method) -> Self {
        TailApproximation {
            value,
            method,
            truncation_terms: 0,
            truncation_bound: 0.0,
            quadrature_error: 0.0,
            heuristic: false,
            vacuous: false,
        }
    }
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::bad("x must be positive and finite"));
    }
    Ok(())
}

/// `sum_{i<n} m^i F̄(m^{i+1} x)`.
pub fn series_tail(law: &OffspringLaw, n: usize, x: f64) -> Result<TailApproximation> {
    if n < 1 {
        return Err(Error::bad("series needs n >= 1"));
    }
    check_x(x)?;
    let m = law.mean();
    let mut s = CompensatedSum::new();
    let mut mi = 1.0;
    for _ in 0..n {
        s.add(mi * law.tail(mi * m * x));
        mi *= m;
    }
    let mut a = TailApproximation::new(s.value(), Method::SeriesFinite);
    a.truncation_terms = n;
    Ok(a)
}

/// Largest number of series terms before giving up.
pub const MAX_SERIES_TERMS: usize = 10_000;

/// `sum_{i≥0} m^i F̄(m^{i+1} x)`.
///
/// With `mat_params = Some((δ, c))` the sum stops once the remainder bound
/// `c F̄(mx) sum_{j≥J} m^{-δ j}`, valid under `F̄(xy) ≤ c F̄(x) y^{-1-δ}`,
/// drops below `rel_tol` times the partial sum. Without them it stops after
/// ten consecutive terms each below `rel_tol/10` of the partial sum, and the
/// result is flagged heuristic.
pub fn series_tail_infinite(
    law: &OffspringLaw,
    x: f64,
    rel_tol: f64,
    mat_params: Option<(f64, f64)>,
) -> Result<TailApproximation> {
    check_x(x)?;
    if !(rel_tol > 0.0) {
        return Err(Error::bad("rel_tol must be positive"));
    }
    if let Some((delta, c)) = mat_params {
        if !(delta > 0.0) || !(c >= 1.0) {
            return Err(Error::bad("Matuszewska parameters need delta > 0 and c >= 1"));
        }
    }
    let m = law.mean();
    let first = law.tail(m * x);
    let mut s = CompensatedSum::new();
    let mut mi = 1.0;
    let mut quiet = 0;
    for j in 0..MAX_SERIES_TERMS {
        let term = mi * law.tail(mi * m * x);
        s.add(term);
        mi *= m;
        let partial = s.value();
        let terms = j + 1;
        match mat_params {
            Some((delta, c)) => {
                let q = m.powf(-delta);
                let bound = c * first * q.powi(terms as i32) / (1.0 - q);
                if bound <= rel_tol * partial || partial == 0.0 {
                    let mut a = TailApproximation::new(partial, Method::SeriesInfinite);
                    a.truncation_terms = terms;
                    a.truncation_bound = bound;
                    return Ok(a);
                }
            }
            None => {
                if term <= rel_tol * partial / 10.0 {
                    quiet += 1;
                } else {
                    quiet = 0;
                }
                if quiet >= 10 || partial == 0.0 {
                    let mut a = TailApproximation::new(partial, Method::SeriesInfinite);
                    a.truncation_terms = terms;
                    a.truncation_bound = f64::NAN;
                    a.heuristic = true;
                    return Ok(a);
                }
            }
        }
        if !mi.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        terms: MAX_SERIES_TERMS,
    })
}

/// `F̄(mx)`, the rapidly varying limit of the series.
pub fn weibull_tail(law: &OffspringLaw, x: f64) -> Result<TailApproximation> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::bad("x must be nonnegative and finite"));
    }
    let mut a = TailApproximation::new(law.tail(law.mean() * x), Method::WeibullPrincipal);
    a.truncation_terms = 1;
    Ok(a)
}

/// `exp{−(mx)^β + (β² σ²/2)(mx)^{2β−1}}` for hazard `R(x) = x^β`, with the
/// `o(1)` in the correction exponent set to 0. `sigma_sq` is `Var W` (or
/// `Var W_n` for a finite horizon, see [`var_wn`]).
pub fn weibull_corrected_lower(beta: f64, m: f64, sigma_sq: f64, x: f64) -> Result<TailApproximation> {
    if !(beta > 0.5 && beta < 1.0) {
        return Err(Error::bad("the corrected exponent is stated for beta in (1/2, 1)"));
    }
    if !(m > 1.0) {
        return Err(Error::SubcriticalMean { mean: m });
    }
    if !(sigma_sq >= 0.0) {
        return Err(Error::bad("sigma_sq must be nonnegative"));
    }
    check_x(x)?;
    let mx = m * x;
    let value = (-mx.powf(beta) + 0.5 * beta * beta * sigma_sq * mx.powf(2.0 * beta - 1.0)).exp();
    Ok(TailApproximation::new(value, Method::WeibullCorrectedLower))
}

/// `(m log m)^{-1} x^{-1} ∫_x^{m^n x} F̄(u) du`, with `n = ∞` integrating to
/// infinity. The tail is a step function, so the integral is evaluated as an
/// exact sum over the table plus an Euler-Maclaurin tail beyond it.
pub fn index_one_tail(law: &OffspringLaw, n: Horizon, x: f64) -> Result<TailApproximation> {
    check_x(x)?;
    if law.tail(x) == 0.0 {
        return Err(Error::TailZero { x });
    }
    let m = law.mean();
    let (upper, method) = match n {
        Horizon::Finite(n) => {
            let u = m.powi(n as i32) * x;
            let u = if u.is_finite() && u < 1e300 { u } else { f64::INFINITY };
            (u, Method::IndexOneIntegral)
        }
        Horizon::Infinite => (f64::INFINITY, Method::IndexOneIntegralInfinite),
    };
    let integral = law.integrated_tail(x, upper)?;
    if !integral.is_finite() {
        return Err(Error::NonIntegrableTail);
    }
    let mut a = TailApproximation::new(integral / (m * m.ln() * x), method);
    a.truncation_terms = 1;
    Ok(a)
}

/// `Var W_n = σ² (1 − m^{−n}) / (m² − m)`, increasing to `σ²/(m² − m)`.
pub fn var_wn(sigma_xi_sq: f64, m: f64, n: Horizon) -> Result<f64> {
    if !(m > 1.0) {
        return Err(Error::SubcriticalMean { mean: m });
    }
    if !(sigma_xi_sq >= 0.0) {
        return Err(Error::bad("variance must be nonnegative"));
    }
    let factor = match n {
        Horizon::Finite(n) => -(-(n as f64) * m.ln()).exp_m1(),
        Horizon::Infinite => 1.0,
    };
    Ok(sigma_xi_sq * factor / (m * m - m))
}

/// Law of the generation that produced the big jump:
/// `w_k ∝ r^k`, `r = m^{−(α−1)}`, over `k < n` (geometric for `n = ∞`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationWeights {
    pub ratio: f64,
    pub horizon: Horizon,
    log_ratio: f64,
    log_norm: f64,
}

impl GenerationWeights {
    /// `w_k`; zero for `k` beyond a finite horizon.
    pub fn weight(&self, k: usize) -> f64 {
        if let Horizon::Finite(n) = self.horizon {
            if k >= n {
                return 0.0;
            }
        }
        (k as f64 * self.log_ratio - self.log_norm).exp()
    }

    /// `w_0..w_{n−1}`, or the first `count` weights when `n = ∞`.
    pub fn to_vec(&self, count: usize) -> Vec<f64> {
        let len = match self.horizon {
            Horizon::Finite(n) => n,
            Horizon::Infinite => count,
        };
        (0..len).map(|k| self.weight(k)).collect()
    }
}

pub fn productive_generation_law(alpha: f64, m: f64, n: Horizon) -> Result<GenerationWeights> {
    if !(alpha > 1.0) {
        return Err(Error::bad("alpha must exceed 1"));
    }
    if !(m > 1.0) {
        return Err(Error::SubcriticalMean { mean: m });
    }
    if n == Horizon::Finite(0) {
        return Err(Error::bad("horizon must be at least 1"));
    }
    let log_ratio = -(alpha - 1.0) * m.ln();
    // normalizer (1 − r^n)/(1 − r), in logs
    let log_norm = match n {
        Horizon::Finite(n) => (-(n as f64 * log_ratio).exp_m1()).ln() - (-log_ratio.exp_m1()).ln(),
        Horizon::Infinite => -(-log_ratio.exp_m1()).ln(),
    };
    Ok(GenerationWeights {
        ratio: log_ratio.exp(),
        horizon: n,
        log_ratio,
        log_norm,
    })
}

/// Relation between horizon and threshold for index-one tails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `n / log x → ∞`: same asymptotics as the limit `W`.
    SuperLog,
    /// `n / log x → t ∈ (0, ∞)`.
    ProportionalLog,
    /// `n / log x → 0`: `n F̄(mx)`.
    SubLog,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::SuperLog => "super_log",
            Regime::ProportionalLog => "proportional_log",
            Regime::SubLog => "sub_log",
        }
    }
}

/// Cut points on `n / log x` separating the three regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeCuts {
    pub upper: f64,
    pub lower: f64,
}

impl Default for RegimeCuts {
    fn default() -> Self {
        RegimeCuts {
            upper: 4.0,
            lower: 0.25,
        }
    }
}

/// Index-one asymptotics for `F̄(x) = x^{-1} log^{-p-1} x` (unit slowly
/// varying factor), classified by `t = n / log x`:
/// `x^{-1}L(x)/(m log m)` with `L(x) = log^{-p}(x)/p`; the same times
/// `1 − (1 + t log m)^{-p}`; or `n F̄(mx)`.
pub fn example1_regime(p: f64, m: f64, n: usize, x: f64, cuts: RegimeCuts) -> Result<(Regime, TailApproximation)> {
    if !(p > 1.0) {
        return Err(Error::bad("p must exceed 1"));
    }
    if !(m > 1.0) {
        return Err(Error::SubcriticalMean { mean: m });
    }
    if !(x > 1.0) || !x.is_finite() {
        return Err(Error::bad("x must exceed 1"));
    }
    if !(cuts.lower > 0.0 && cuts.upper > cuts.lower) {
        return Err(Error::bad("regime cut points must satisfy 0 < lower < upper"));
    }
    let lx = x.ln();
    let t = n as f64 / lx;
    let lead = lx.powf(-p) / (p * m * m.ln() * x);
    let (regime, value) = if t >= cuts.upper {
        (Regime::SuperLog, lead)
    } else if t > cuts.lower {
        (Regime::ProportionalLog, lead * -(-p * (t * m.ln()).ln_1p()).exp_m1())
    } else {
        let mx = m * x;
        (Regime::SubLog, n as f64 / (mx * mx.ln().powf(p + 1.0)))
    };
    let mut a = TailApproximation::new(value, Method::IndexOneIntegral);
    a.truncation_terms = 1;
    Ok((regime, a))
}

/// `(1 − σ²/((m² − m) A²)) sum_{i<n} m^i F̄(m^{i+1}x + A (m^{i+1}x)^{1/2})`
/// with `σ² = Var ξ` and the `o(1)` in the prefactor set to 0. A nonpositive
/// prefactor makes the bound vacuous: the value is 0 and `vacuous` is set.
pub fn lemma32_lower(law: &OffspringLaw, n: usize, x: f64, a: f64) -> Result<TailApproximation> {
    if n < 1 {
        return Err(Error::bad("n must be at least 1"));
    }
    check_x(x)?;
    if !(a > 0.0) {
        return Err(Error::bad("A must be positive"));
    }
    let m = law.mean();
    let prefactor = 1.0 - law.variance() / ((m * m - m) * a * a);
    let mut out = TailApproximation::new(0.0, Method::Lemma32Lower);
    out.truncation_terms = n;
    if !(prefactor > 0.0) {
        out.vacuous = true;
        return Ok(out);
    }
    let mut s = CompensatedSum::new();
    let mut mi = 1.0;
    for _ in 0..n {
        let level = mi * m * x;
        s.add(mi * law.tail(level + a * level.sqrt()));
        mi *= m;
    }
    out.value = prefactor * s.value();
    Ok(out)
}

/// Tuning knobs for [`approximate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxOptions {
    /// Relative truncation tolerance of the infinite series.
    pub rel_tol: f64,
    /// Matuszewska parameters `(δ, c)` for a rigorous series remainder.
    pub mat_params: Option<(f64, f64)>,
    /// The constant `A` of the variance lower bound.
    pub lower_a: f64,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            rel_tol: 1e-10,
            mat_params: None,
            lower_a: 10.0,
        }
    }
}

/// Evaluates `method` at `(n, x)`. Methods stated for the limit ignore a
/// finite `n`; the variance lower bound requires one. The corrected Weibull
/// form reads `β` from a Weibull law and uses `Var W_n`.
pub fn approximate(
    law: &OffspringLaw,
    method: Method,
    n: Horizon,
    x: f64,
    opts: &ApproxOptions,
) -> Result<TailApproximation> {
    let finite = || match n {
        Horizon::Finite(n) => Ok(n),
        Horizon::Infinite => Err(Error::bad(alloc::format!(
            "method `{}` needs a finite horizon",
            method.as_str()
        ))),
    };
    match method {
        Method::SeriesFinite => match n {
            Horizon::Finite(n) => series_tail(law, n, x),
            Horizon::Infinite => series_tail_infinite(law, x, opts.rel_tol, opts.mat_params),
        },
        Method::SeriesInfinite => series_tail_infinite(law, x, opts.rel_tol, opts.mat_params),
        Method::WeibullPrincipal => weibull_tail(law, x),
        Method::WeibullCorrectedLower => {
            // the correction is stated for F̄(x) ~ exp(−x^β) only
            let beta = match *law.family() {
                crate::offspring::Family::DiscreteWeibull { beta, c, q } if c == 1.0 && q == 1.0 => beta,
                _ => {
                    return Err(Error::bad(
                        "the corrected Weibull form needs a weibull law with c = 1 and q = 1",
                    ))
                }
            };
            let sigma_sq = var_wn(law.variance(), law.mean(), n)?;
            weibull_corrected_lower(beta, law.mean(), sigma_sq, x)
        }
        Method::IndexOneIntegral => index_one_tail(law, n, x),
        Method::IndexOneIntegralInfinite => index_one_tail(law, Horizon::Infinite, x),
        Method::Lemma32Lower => lemma32_lower(law, finite()?, x, opts.lower_a),
    }
}

/// Which theorem's approximation applies to a law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeKind {
    IrvSeries,
    SqrtInsensitiveSeries,
    WeibullPrincipal,
    WeibullCorrectedNeeded,
    IndexOneIntegral,
    Unclassified,
}

impl RegimeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeKind::IrvSeries => "irv_series",
            RegimeKind::SqrtInsensitiveSeries => "sqrt_insensitive_series",
            RegimeKind::WeibullPrincipal => "weibull_principal",
            RegimeKind::WeibullCorrectedNeeded => "weibull_corrected_needed",
            RegimeKind::IndexOneIntegral => "index_one_integral",
            RegimeKind::Unclassified => "unclassified",
        }
    }

    /// The approximation method matching the regime.
    pub fn method(&self) -> Option<Method> {
        match self {
            RegimeKind::IrvSeries | RegimeKind::SqrtInsensitiveSeries => Some(Method::SeriesFinite),
            RegimeKind::WeibullPrincipal => Some(Method::WeibullPrincipal),
            RegimeKind::WeibullCorrectedNeeded => Some(Method::WeibullCorrectedLower),
            RegimeKind::IndexOneIntegral => Some(Method::IndexOneIntegral),
            RegimeKind::Unclassified => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeTag {
    pub regime: RegimeKind,
    /// The class reports the classification rests on; all consistent unless
    /// the regime is `Unclassified`.
    pub justification: Vec<ClassReport>,
}

/// Half-width of the band around 1 in which the local tail index at the top
/// of the grid marks a law as index-one.
pub const INDEX_ONE_BAND: f64 = 0.35;

/// Local tail index `log(F̄(x/2)/F̄(x)) / log 2` at `x`.
fn local_index(law: &OffspringLaw, x: f64) -> f64 {
    (law.tail(x / 2.0) / law.tail(x)).ln() / 2f64.ln()
}

/// Classifies a law on the default grid.
///
/// Rapidly varying S* laws are Weibull-type (principal term if also
/// √x-insensitive); dominated varying laws with local index near 1 are
/// index-one; dominated varying laws satisfying a Matuszewska bound are
/// series laws, IRV when `x^{0.9}`-insensitive and √x-insensitive otherwise
/// when the variance is finite.
pub fn classify(law: &OffspringLaw) -> Result<RegimeTag> {
    let grid = classes::default_grid();
    let rapid = classes::check_rapid_variation(law, 0.5, &grid)?;
    if rapid.is_consistent() {
        let sstar = classes::check_sstar(law, &grid)?;
        if sstar.is_consistent() {
            let sqrt = classes::check_insensitive(law, 0.5, &grid)?;
            let regime = if sqrt.is_consistent() {
                RegimeKind::WeibullPrincipal
            } else {
                RegimeKind::WeibullCorrectedNeeded
            };
            let mut justification = alloc::vec![rapid, sstar];
            if sqrt.is_consistent() {
                justification.push(sqrt);
            }
            return Ok(RegimeTag { regime, justification });
        }
        return Ok(unclassified(alloc::vec![rapid, sstar]));
    }
    let top = *grid.last().unwrap();
    let dominated = classes::check_dominated_varying(law, top)?;
    if !dominated.is_consistent() {
        return Ok(unclassified(alloc::vec![rapid, dominated]));
    }
    // log corrections keep the local index well above 1 on any practical grid
    if (local_index(law, top) - 1.0).abs() < INDEX_ONE_BAND {
        return Ok(RegimeTag {
            regime: RegimeKind::IndexOneIntegral,
            justification: alloc::vec![dominated],
        });
    }
    let delta = (0.5 * (local_index(law, top) - 1.0)).max(0.05);
    let mat = classes::check_matuszewska(law, delta, 10.0, &grid)?;
    if !mat.is_consistent() {
        return Ok(unclassified(alloc::vec![dominated, mat]));
    }
    let irv = classes::check_insensitive(law, 0.9, &grid)?;
    if irv.is_consistent() {
        return Ok(RegimeTag {
            regime: RegimeKind::IrvSeries,
            justification: alloc::vec![dominated, mat, irv],
        });
    }
    let sqrt = classes::check_insensitive(law, 0.5, &grid)?;
    if law.has_finite_variance() && sqrt.is_consistent() {
        return Ok(RegimeTag {
            regime: RegimeKind::SqrtInsensitiveSeries,
            justification: alloc::vec![dominated, mat, sqrt],
        });
    }
    Ok(unclassified(alloc::vec![dominated, mat, irv, sqrt]))
}

fn unclassified(justification: Vec<ClassReport>) -> RegimeTag {
    RegimeTag {
        regime: RegimeKind::Unclassified,
        justification,
    }
}

/// A warning when `method` is applied outside the regime it is stated for.
pub fn regime_warning(law: &OffspringLaw, method: Method) -> Result<Option<String>> {
    let tag = classify(law)?;
    let fits = match method {
        Method::SeriesFinite | Method::SeriesInfinite | Method::Lemma32Lower => matches!(
            tag.regime,
            RegimeKind::IrvSeries | RegimeKind::SqrtInsensitiveSeries | RegimeKind::WeibullPrincipal
        ),
        Method::WeibullPrincipal | Method::WeibullCorrectedLower => matches!(
            tag.regime,
            RegimeKind::WeibullPrincipal | RegimeKind::WeibullCorrectedNeeded
        ),
        Method::IndexOneIntegral | Method::IndexOneIntegralInfinite => tag.regime == RegimeKind::IndexOneIntegral,
    };
    Ok((!fits).then(|| {
        alloc::format!(
            "method `{}` applied to a law classified as `{}`",
            method.as_str(),
            tag.regime.as_str()
        )
    }))
}
