//! Textual law specifications.
//!
//! ```text
//! pareto(alpha=2, scale=1)
//! weibull(beta=0.5, c=1, q=1)
//! logcorr(p=2, x0=3, mass=0.5)
//! lognormal(mu=0, sigma=1)
//! finite(0:0.25, 2:0.75)
//! tuned(pareto(alpha=2), m=2)
//! ```
//!
//! Named arguments may appear in any order; omitted ones take the defaults
//! shown above, except the shape parameters (`alpha`, `beta`, `p`, `sigma`)
//! and the target mean of `tuned`, which are required.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;

use super::{Family, OffspringLaw};
use crate::error::{Error, Result};

pub(super) const DEFAULT_LOGCORR_MASS: f64 = 0.5;

/// Parsed description of an offspring law.
#[derive(Debug, Clone, PartialEq)]
pub enum LawSpec {
    Pareto {
        alpha: f64,
        scale: f64,
    },
    Weibull {
        beta: f64,
        c: f64,
        q: f64,
    },
    LogCorr {
        p: f64,
        x0: u64,
        mass: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    Finite(Vec<(u64, f64)>),
    /// Inner law with its free parameter adjusted so that `E ξ = mean`.
    Tuned {
        inner: Box<LawSpec>,
        mean: f64,
    },
}

impl LawSpec {
    /// Family parameters; `Tuned` is resolved by tuning first.
    pub fn family(&self) -> Result<Family> {
        match self {
            LawSpec::Pareto { alpha, scale } => Family::pareto(*alpha, *scale),
            LawSpec::Weibull { beta, c, q } => Family::weibull(*beta, *c, *q),
            LawSpec::LogCorr { p, x0, mass } => Family::log_corrected(*p, *x0, *mass),
            LawSpec::LogNormal { mu, sigma } => Family::log_normal(*mu, *sigma),
            LawSpec::Finite(pmf) => Family::finite(pmf),
            LawSpec::Tuned { inner, mean } => tune_to_mean(inner, *mean)?.family(),
        }
    }

    pub fn build(&self) -> Result<OffspringLaw> {
        OffspringLaw::from_family(self.family()?)
    }

    /// The spec with any `tuned(..)` wrapper replaced by the tuned parameters.
    pub fn resolved(&self) -> Result<LawSpec> {
        match self {
            LawSpec::Tuned { inner, mean } => tune_to_mean(inner, *mean),
            other => Ok(other.clone()),
        }
    }
}

impl fmt::Display for LawSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawSpec::Pareto { alpha, scale } => write!(f, "pareto(alpha={alpha:?}, scale={scale:?})"),
            LawSpec::Weibull { beta, c, q } => write!(f, "weibull(beta={beta:?}, c={c:?}, q={q:?})"),
            LawSpec::LogCorr { p, x0, mass } => write!(f, "logcorr(p={p:?}, x0={x0}, mass={mass:?})"),
            LawSpec::LogNormal { mu, sigma } => write!(f, "lognormal(mu={mu:?}, sigma={sigma:?})"),
            LawSpec::Finite(pmf) => {
                f.write_str("finite(")?;
                for (i, (k, p)) in pmf.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}:{p:?}")?;
                }
                f.write_str(")")
            }
            LawSpec::Tuned { inner, mean } => write!(f, "tuned({inner}, m={mean:?})"),
        }
    }
}

impl FromStr for LawSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens = tokenize(s)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            end: s.len() + 1,
        };
        let spec = p.law()?;
        if let Some(t) = p.peek() {
            return Err(t.error("trailing input after law"));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Ident(String),
    Number(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    column: usize,
}

impl Token {
    fn text(&self) -> String {
        match &self.kind {
            Kind::Ident(s) | Kind::Number(s) => s.clone(),
            Kind::Punct(c) => c.to_string(),
        }
    }

    fn error(&self, message: &str) -> Error {
        Error::Parse {
            column: self.column,
            token: self.text(),
            message: message.into(),
        }
    }
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        let column = at + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().map(|p| p.1).collect();
            out.push(Token {
                kind: Kind::Ident(text),
                column,
            });
        } else if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i].1;
                let after_exp = matches!(chars[i - 1].1, 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || ((d == '-' || d == '+') && after_exp) {
                    i += 1;
                } else {
                    break;
                }
            }
            let text: String = chars[start..i].iter().map(|p| p.1).collect();
            out.push(Token {
                kind: Kind::Number(text),
                column,
            });
        } else if matches!(c, '(' | ')' | ',' | '=' | ':') {
            out.push(Token {
                kind: Kind::Punct(c),
                column,
            });
            i += 1;
        } else {
            return Err(Error::Parse {
                column,
                token: c.to_string(),
                message: "unexpected character".into(),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self, expected: &str) -> Result<Token> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(Error::Parse {
                column: self.end,
                token: String::new(),
                message: format!("unexpected end of input, expected {expected}"),
            }),
        }
    }

    fn punct(&mut self, c: char) -> Result<()> {
        let t = self.next(&format!("`{c}`"))?;
        if t.kind == Kind::Punct(c) {
            Ok(())
        } else {
            Err(t.error(&format!("expected `{c}`")))
        }
    }

    fn at_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { kind: Kind::Punct(p), .. }) if *p == c)
    }

    fn number(&mut self) -> Result<(f64, Token)> {
        let t = self.next("a number")?;
        match &t.kind {
            Kind::Number(s) => match s.parse::<f64>() {
                Ok(v) => Ok((v, t)),
                Err(_) => Err(t.error("malformed number")),
            },
            _ => Err(t.error("expected a number")),
        }
    }

    fn integer(&mut self) -> Result<u64> {
        let t = self.next("an integer")?;
        match &t.kind {
            Kind::Number(s) => s.parse::<u64>().map_err(|_| t.error("expected a nonnegative integer")),
            _ => Err(t.error("expected a nonnegative integer")),
        }
    }

    fn law(&mut self) -> Result<LawSpec> {
        let name = self.next("a law name")?;
        let ident = match &name.kind {
            Kind::Ident(s) => s.clone(),
            _ => return Err(name.error("expected a law name")),
        };
        self.punct('(')?;
        let spec = match ident.as_str() {
            "finite" => self.finite()?,
            "tuned" => {
                let inner = self.law()?;
                self.punct(',')?;
                let args = self.named_args(&["m"])?;
                let mean = args.required(0, &name)?;
                return Ok(LawSpec::Tuned {
                    inner: Box::new(inner),
                    mean,
                });
            }
            "pareto" => {
                let a = self.named_args(&["alpha", "scale"])?;
                LawSpec::Pareto {
                    alpha: a.required(0, &name)?,
                    scale: a.get(1).unwrap_or(1.0),
                }
            }
            "weibull" => {
                let a = self.named_args(&["beta", "c", "q"])?;
                LawSpec::Weibull {
                    beta: a.required(0, &name)?,
                    c: a.get(1).unwrap_or(1.0),
                    q: a.get(2).unwrap_or(1.0),
                }
            }
            "logcorr" => {
                let a = self.named_args(&["p", "x0", "mass"])?;
                let x0 = match a.get(1) {
                    None => 3,
                    Some(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e18 => v as u64,
                    Some(_) => return Err(a.tokens[1].as_ref().unwrap().error("x0 must be an integer")),
                };
                LawSpec::LogCorr {
                    p: a.required(0, &name)?,
                    x0,
                    mass: a.get(2).unwrap_or(DEFAULT_LOGCORR_MASS),
                }
            }
            "lognormal" => {
                let a = self.named_args(&["mu", "sigma"])?;
                LawSpec::LogNormal {
                    mu: a.get(0).unwrap_or(0.0),
                    sigma: a.required(1, &name)?,
                }
            }
            _ => return Err(name.error("unknown law")),
        };
        Ok(spec)
    }

    /// Parses `name=value, ...` up to and including the closing parenthesis.
    fn named_args(&mut self, names: &[&'static str]) -> Result<Args> {
        let mut args = Args {
            names: names.to_vec(),
            values: alloc::vec![None; names.len()],
            tokens: alloc::vec![None; names.len()],
        };
        if self.at_punct(')') {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            let key = self.next("an argument name")?;
            let idx = match &key.kind {
                Kind::Ident(s) => names
                    .iter()
                    .position(|n| n == s)
                    .ok_or_else(|| key.error("unknown argument"))?,
                _ => return Err(key.error("expected an argument name")),
            };
            if args.values[idx].is_some() {
                return Err(key.error("duplicate argument"));
            }
            self.punct('=')?;
            let (v, t) = self.number()?;
            args.values[idx] = Some(v);
            args.tokens[idx] = Some(t);
            let sep = self.next("`,` or `)`")?;
            match sep.kind {
                Kind::Punct(',') => continue,
                Kind::Punct(')') => return Ok(args),
                _ => return Err(sep.error("expected `,` or `)`")),
            }
        }
    }

    fn finite(&mut self) -> Result<LawSpec> {
        let mut pmf = Vec::new();
        loop {
            let k = self.integer()?;
            self.punct(':')?;
            let (p, _) = self.number()?;
            pmf.push((k, p));
            let sep = self.next("`,` or `)`")?;
            match sep.kind {
                Kind::Punct(',') => continue,
                Kind::Punct(')') => return Ok(LawSpec::Finite(pmf)),
                _ => return Err(sep.error("expected `,` or `)`")),
            }
        }
    }
}

struct Args {
    names: Vec<&'static str>,
    values: Vec<Option<f64>>,
    tokens: Vec<Option<Token>>,
}

impl Args {
    fn get(&self, i: usize) -> Option<f64> {
        self.values[i]
    }

    fn required(&self, i: usize, law: &Token) -> Result<f64> {
        self.values[i].ok_or_else(|| law.error(&format!("missing required argument `{}`", self.names[i])))
    }
}

/// Adjusts the free parameter of `spec` so that the law has mean `target`.
///
/// The free parameter is the scale for Pareto laws, `c` for Weibull laws,
/// the tail mass for index-one laws and `mu` for log-normal laws.
pub fn tune_to_mean(spec: &LawSpec, target: f64) -> Result<LawSpec> {
    let fail = |reason: &str| Error::TuningFailed {
        target,
        reason: reason.into(),
    };
    if !(target > 1.0) || !target.is_finite() {
        return Err(Error::bad(format!("target mean must exceed 1, got {target}")));
    }
    type Rebuild = Box<dyn Fn(f64) -> LawSpec>;
    let (lo, hi, log_scale, increasing, make): (f64, f64, bool, bool, Rebuild) = match spec {
        LawSpec::Pareto { alpha, .. } => {
            let alpha = *alpha;
            Family::pareto(alpha, 1.0)?;
            (
                1e-8,
                1.0,
                true,
                true,
                Box::new(move |s| LawSpec::Pareto { alpha, scale: s }),
            )
        }
        LawSpec::Weibull { beta, q, .. } => {
            let (beta, q) = (*beta, *q);
            Family::weibull(beta, 1.0, q)?;
            (
                1e-3,
                1.0,
                true,
                false,
                Box::new(move |c| LawSpec::Weibull { beta, c, q }),
            )
        }
        LawSpec::LogCorr { p, x0, .. } => {
            let (p, x0) = (*p, *x0);
            Family::log_corrected(p, x0, 0.5)?;
            (
                1e-9,
                1.0 - 1e-9,
                false,
                true,
                Box::new(move |w| LawSpec::LogCorr { p, x0, mass: w }),
            )
        }
        LawSpec::LogNormal { sigma, .. } => {
            let sigma = *sigma;
            Family::log_normal(0.0, sigma)?;
            (
                -10.0,
                10.0,
                false,
                true,
                Box::new(move |mu| LawSpec::LogNormal { mu, sigma }),
            )
        }
        LawSpec::Finite(_) => return Err(fail("finite laws have no free parameter")),
        LawSpec::Tuned { inner, .. } => return tune_to_mean(inner, target),
    };
    let mean_at = |v: f64| -> Result<f64> { make(v).family()?.mean() };
    let fixed_range = matches!(spec, LawSpec::LogCorr { .. });
    let (mut lo, mut hi) = (lo, hi);
    // widen until the target is bracketed
    let below = |m: f64| if increasing { m < target } else { m > target };
    let mut tries = 0;
    while !fixed_range && !below(mean_at(lo)?) {
        lo = if log_scale { lo / 16.0 } else { lo - 2.0 * (hi - lo) };
        tries += 1;
        if tries > 40 {
            return Err(fail("could not bracket the target from below"));
        }
    }
    tries = 0;
    while below(mean_at(hi)?) {
        if fixed_range {
            return Err(fail("target outside the reachable range"));
        }
        hi = if log_scale { hi * 16.0 } else { hi + 2.0 * (hi - lo) };
        tries += 1;
        if tries > 40 {
            return Err(fail("could not bracket the target from above"));
        }
    }
    if fixed_range && !below(mean_at(lo)?) {
        return Err(fail("target outside the reachable range"));
    }
    for _ in 0..200 {
        let mid = if log_scale { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if below(mean_at(mid)?) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-14 * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
    }
    let v = 0.5 * (lo + hi);
    let m = mean_at(v)?;
    if ((m - target) / target).abs() > 1e-9 {
        return Err(fail(&format!("bisection stalled at mean {m}")));
    }
    Ok(make(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_family() {
        let cases = [
            ("pareto(alpha=2.5)", LawSpec::Pareto { alpha: 2.5, scale: 1.0 }),
            (
                "weibull(c=2, beta=0.3)",
                LawSpec::Weibull {
                    beta: 0.3,
                    c: 2.0,
                    q: 1.0,
                },
            ),
            (
                "logcorr(p=2, x0=5)",
                LawSpec::LogCorr {
                    p: 2.0,
                    x0: 5,
                    mass: 0.5,
                },
            ),
            (
                "lognormal(sigma=1.5, mu=-0.5)",
                LawSpec::LogNormal { mu: -0.5, sigma: 1.5 },
            ),
            (
                "finite(0:0.25, 2:0.75)",
                LawSpec::Finite(alloc::vec![(0, 0.25), (2, 0.75)]),
            ),
        ];
        for (text, want) in cases {
            assert_eq!(text.parse::<LawSpec>().unwrap(), want, "{text}");
        }
        let tuned: LawSpec = "tuned(pareto(alpha=2), m=2)".parse().unwrap();
        assert_eq!(
            tuned,
            LawSpec::Tuned {
                inner: Box::new(LawSpec::Pareto { alpha: 2.0, scale: 1.0 }),
                mean: 2.0
            }
        );
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "pareto(alpha=2.25, scale=0.125)",
            "weibull(beta=0.3, c=1e-3, q=0.9)",
            "logcorr(p=1.5, x0=10, mass=0.3)",
            "lognormal(mu=0.1, sigma=2)",
            "finite(0:0.1, 1:0.2, 7:0.7)",
            "tuned(weibull(beta=0.5), m=3)",
        ] {
            let spec: LawSpec = text.parse().unwrap();
            let again: LawSpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, again);
        }
    }

    #[test]
    fn parse_errors_carry_column_and_token() {
        match "pareto(alpah=2)".parse::<LawSpec>() {
            Err(Error::Parse { column, token, .. }) => {
                assert_eq!(column, 8);
                assert_eq!(token, "alpah");
            }
            other => panic!("unexpected {other:?}"),
        }
        match "cauchy(a=1)".parse::<LawSpec>() {
            Err(Error::Parse { column, token, .. }) => {
                assert_eq!(column, 1);
                assert_eq!(token, "cauchy");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!("pareto(alpha=2".parse::<LawSpec>(), Err(Error::Parse { .. })));
        assert!(matches!("pareto(scale=2)".parse::<LawSpec>(), Err(Error::Parse { .. })));
        assert!(matches!(
            "pareto(alpha=2, alpha=3)".parse::<LawSpec>(),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            "pareto(alpha=2) x".parse::<LawSpec>(),
            Err(Error::Parse { .. })
        ));
        assert!(matches!("finite(0.5:1)".parse::<LawSpec>(), Err(Error::Parse { .. })));
    }

    #[test]
    fn tuning_hits_target_mean() {
        for spec in [
            LawSpec::Pareto { alpha: 2.0, scale: 1.0 },
            LawSpec::Pareto { alpha: 1.5, scale: 1.0 },
            LawSpec::Weibull {
                beta: 0.3,
                c: 1.0,
                q: 1.0,
            },
            LawSpec::Weibull {
                beta: 0.5,
                c: 1.0,
                q: 0.8,
            },
            LawSpec::LogCorr {
                p: 2.0,
                x0: 3,
                mass: 0.5,
            },
            LawSpec::LogNormal { mu: 0.0, sigma: 1.0 },
        ] {
            let tuned = tune_to_mean(&spec, 2.0).unwrap();
            let m = tuned.family().unwrap().mean().unwrap();
            assert!((m - 2.0).abs() < 2e-9, "{tuned}: {m}");
        }
        assert!(matches!(
            tune_to_mean(&LawSpec::Finite(alloc::vec![(0, 0.5), (3, 0.5)]), 2.0),
            Err(Error::TuningFailed { .. })
        ));
    }
}
