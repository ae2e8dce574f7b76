//! Rate functions, the minimizer of `J` and tail-exponent prediction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::model::{LnCritical, ModelParams};
use crate::sequence::{check_hypotheses, classify_regime, AcNpRegime, HypothesisCheck, Regime, SequenceSpec, Verdict};
use crate::trend::{classify, Trend, TrendConfig};

/// `H(x) = 1 - x + x ln x`, `H(0) = 1`, `+∞` on the negatives.
pub fn entropy_h(x: ExtReal) -> ExtReal {
    match x {
        ExtReal::PosInf => ExtReal::PosInf,
        ExtReal::Finite(x) if x < 0.0 || x.is_nan() => ExtReal::PosInf,
        ExtReal::Finite(0.0) => ExtReal::Finite(1.0),
        ExtReal::Finite(x) => ExtReal::Finite(1.0 - x + x * x.ln()),
    }
}

fn check_alpha_r(alpha: f64, r: u32) -> Result<()> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha = {alpha} must exceed 1")));
    }
    if r < 2 {
        return Err(Error::invalid(format!("threshold r = {r} must be at least 2")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub x: f64,
    /// `H(x / h(x))`, the entropy factor inside `J`.
    #[serde(rename = "H_val")]
    pub h_entropy: ExtReal,
    pub h_val: f64,
    #[serde(rename = "J_val")]
    pub j_val: ExtReal,
}

fn h_of(x: f64, alpha: f64, r: u32) -> f64 {
    let rf = r as f64;
    (alpha * (1.0 - 1.0 / rf) + x).powi(r as i32) / rf
}

fn j_of(x: f64, h: f64, r: u32) -> f64 {
    let rf = r as f64;
    let inner = if x == 0.0 { h } else { h - x + x * (x / h).ln() };
    rf / (rf - 1.0) * inner
}

/// `(h(x), J(x))` for `x ≥ 0`.
pub fn rate_j(x: f64, alpha: f64, r: u32) -> Result<(f64, f64)> {
    check_alpha_r(alpha, r)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("x = {x} must be a finite nonnegative number")));
    }
    let h = h_of(x, alpha, r);
    Ok((h, j_of(x, h, r)))
}

pub fn rate_point(x: f64, alpha: f64, r: u32) -> Result<RatePoint> {
    let (h, j) = rate_j(x, alpha, r)?;
    Ok(RatePoint { x, h_entropy: entropy_h(ExtReal::Finite(x / h)), h_val: h, j_val: ExtReal::Finite(j) })
}

/// `J'(x)` for `x > 0`.
fn j_prime(x: f64, alpha: f64, r: u32) -> f64 {
    let rf = r as f64;
    let base = alpha * (1.0 - 1.0 / rf) + x;
    let h = base.powi(r as i32) / rf;
    let dh = base.powi(r as i32 - 1);
    rf / (rf - 1.0) * (dh * (1.0 - x / h) + (x / h).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMinimum {
    pub x0: f64,
    pub j_x0: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Unique minimizer of `J` on `[0, ∞)`.
///
/// Golden-section search on `[tol, α/r]` narrows the bracket, then
/// bisection on the sign of `J'` polishes `x0` to machine precision.
pub fn minimize_rate(alpha: f64, r: u32, tol: f64) -> Result<RateMinimum> {
    check_alpha_r(alpha, r)?;
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::invalid(format!("tol = {tol} must lie in (0, 1e-3]")));
    }
    let j = |x: f64| j_of(x, h_of(x, alpha, r), r);
    let hi0 = alpha / r as f64;
    let (mut a, mut b) = (tol.min(hi0 / 2.0), hi0);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut jc, mut jd) = (j(c), j(d));
    while b - a > tol {
        if jc < jd {
            b = d;
            d = c;
            jd = jc;
            c = b - INV_PHI * (b - a);
            jc = j(c);
        } else {
            a = c;
            c = d;
            jc = jd;
            d = a + INV_PHI * (b - a);
            jd = j(d);
        }
    }
    let (mut lo, mut hi) = ((a - tol).max(0.0), (b + tol).min(hi0));
    if lo == 0.0 || j_prime(lo, alpha, r) > 0.0 {
        lo = f64::MIN_POSITIVE;
    }
    if j_prime(hi, alpha, r) < 0.0 {
        hi = hi0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if j_prime(mid, alpha, r) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x0 = 0.5 * (lo + hi);
    Ok(RateMinimum { x0, j_x0: j(x0) })
}

/// `J(x0)` at full precision.
pub fn j_min(alpha: f64, r: u32) -> Result<f64> {
    Ok(minimize_rate(alpha, r, 1e-6)?.j_x0)
}

/// `⌈y⌉`, except that values within `1e-9` of an integer round to it.
pub fn ceil_tie(y: f64) -> f64 {
    let near = y.round();
    if (y - near).abs() <= 1e-9 {
        near
    } else {
        y.ceil()
    }
}

/// Growth function `g` in `f₁(n) = 1 ∨ g(n) a_c / (n p_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "g", rename_all = "snake_case")]
pub enum GRule {
    /// `(ln n)^k`
    LogPow { k: f64 },
    /// `n^β`
    Pow { beta: f64 },
}

impl Default for GRule {
    fn default() -> Self {
        GRule::LogPow { k: 1.0 }
    }
}

/// Scaling sequences `f(n)` that are not tied to a critical quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FRule {
    /// `c n^β`
    Pow { c: f64, beta: f64 },
    /// `c (ln n)^k`
    LogPow { c: f64, k: f64 },
    /// `c n`
    Lin { c: f64 },
    /// `1 ∨ g(n) a_c / (n p_n)`
    F1 {
        #[serde(default)]
        g: GRule,
    },
}

impl FRule {
    pub(crate) fn ln_value(&self, n: f64, ln_a_c_over_np: f64) -> f64 {
        let ln_n = n.ln();
        match *self {
            FRule::Pow { c, beta } => c.ln() + beta * ln_n,
            FRule::LogPow { c, k } => c.ln() + k * ln_n.ln(),
            FRule::Lin { c } => c.ln() + ln_n,
            FRule::F1 { g } => {
                let ln_g = match g {
                    GRule::LogPow { k } => k * ln_n.ln(),
                    GRule::Pow { beta } => beta * ln_n,
                };
                (ln_g + ln_a_c_over_np).max(0.0)
            }
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = match *self {
            FRule::Pow { c, beta } => c > 0.0 && (0.0..=1.0).contains(&beta),
            FRule::LogPow { c, k } => c > 0.0 && k.is_finite(),
            FRule::Lin { c } => c > 0.0 && c.is_finite(),
            FRule::F1 { g: GRule::LogPow { k } } => k > 0.0,
            FRule::F1 { g: GRule::Pow { beta } } => beta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid scaling rule {self}")))
        }
    }

    /// `lim f(n)/n` when it is determined by the rule alone.
    fn ell1(&self) -> Option<f64> {
        match *self {
            FRule::Lin { c } => Some(c),
            FRule::Pow { c, beta } if beta == 1.0 => Some(c),
            FRule::Pow { .. } | FRule::LogPow { .. } => Some(0.0),
            FRule::F1 { .. } => None,
        }
    }
}

impl fmt::Display for FRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FRule::Pow { c, beta } => write!(f, "pow/{c}/{beta}"),
            FRule::LogPow { c, k } => write!(f, "logpow/{c}/{k}"),
            FRule::Lin { c } => write!(f, "lin/{c}"),
            FRule::F1 { g: GRule::LogPow { k } } if k == 1.0 => f.write_str("f1"),
            FRule::F1 { g: GRule::LogPow { k } } => write!(f, "f1/logpow/{k}"),
            FRule::F1 { g: GRule::Pow { beta } } => write!(f, "f1/pow/{beta}"),
        }
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::invalid(format!("not a number: {s:?}")))
}

impl FromStr for FRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        let rule = match parts.as_slice() {
            ["pow", c, beta] => FRule::Pow { c: parse_num(c)?, beta: parse_num(beta)? },
            ["logpow", c, k] => FRule::LogPow { c: parse_num(c)?, k: parse_num(k)? },
            ["lin", c] => FRule::Lin { c: parse_num(c)? },
            ["f1"] => FRule::F1 { g: GRule::default() },
            ["f1", "logpow", k] => FRule::F1 { g: GRule::LogPow { k: parse_num(k)? } },
            ["f1", "pow", beta] => FRule::F1 { g: GRule::Pow { beta: parse_num(beta)? } },
            _ => return Err(Error::invalid(format!("unknown scaling rule {s:?}"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

/// How the observation scale `f(n)` sits relative to `b_c`, `a_c/(n p)` and `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalingFamily {
    /// `f(n) = ℓ`
    Const { ell: f64 },
    /// `f(n) = ℓ b_c`
    AsymBc { ell: f64 },
    /// `b_c ≪ f(n) ≪ a_c / (n p)`
    BetweenBcAndAcNp { f: FRule },
    /// `f(n) = ℓ a_c / (n p)`
    AsymAcNp { ell: f64 },
    /// `a_c / (n p) ≪ f(n) ≲ n` with `f(n)/n → ℓ₁`
    BetweenAcNpAndN { f: FRule, ell1: f64 },
}

impl ScalingFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalingFamily::Const { ell } | ScalingFamily::AsymBc { ell } | ScalingFamily::AsymAcNp { ell } => {
                if ell > 0.0 && ell.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("scaling constant {ell} must be positive and finite")))
                }
            }
            ScalingFamily::BetweenBcAndAcNp { f } => f.validate(),
            ScalingFamily::BetweenAcNpAndN { f, ell1 } => {
                f.validate()?;
                if !(ell1 >= 0.0 && ell1.is_finite()) {
                    return Err(Error::invalid(format!("ell1 = {ell1} must be finite and nonnegative")));
                }
                match f.ell1() {
                    Some(l) if (l - ell1).abs() > 1e-12 * l.max(1.0) => {
                        Err(Error::invalid(format!("rule {f} has f(n)/n -> {l}, not ell1 = {ell1}")))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    /// `ln f(n)` for the sequence `spec` at real `n`.
    pub fn ln_f(&self, spec: &SequenceSpec, n: f64) -> Result<f64> {
        Ok(self.ln_f_at(n, spec.ln_p(n)?, spec.r))
    }

    /// `ln f` for a single instance, with the critical quantities taken
    /// from `(n, p, r)` itself.
    pub fn ln_f_params(&self, params: &ModelParams) -> Result<f64> {
        params.validate()?;
        if params.p > 0.0 {
            return Ok(self.ln_f_at(params.n as f64, params.p.ln(), params.r));
        }
        // at p = 0 only rules that ignore the critical quantities make sense
        let n = params.n as f64;
        match *self {
            ScalingFamily::Const { ell } => Ok(ell.ln()),
            ScalingFamily::BetweenBcAndAcNp { f } | ScalingFamily::BetweenAcNpAndN { f, .. }
                if !matches!(f, FRule::F1 { .. }) =>
            {
                Ok(f.ln_value(n, f64::NAN))
            }
            _ => Err(Error::invalid(format!("family {self} needs p > 0"))),
        }
    }

    fn ln_f_at(&self, n: f64, lp: f64, r: u32) -> f64 {
        let crit = LnCritical::at(n, lp, r);
        let ln_acnp = crit.ln_a_c - n.ln() - lp;
        match *self {
            ScalingFamily::Const { ell } => ell.ln(),
            ScalingFamily::AsymBc { ell } => ell.ln() + crit.ln_b_c,
            ScalingFamily::AsymAcNp { ell } => ell.ln() + ln_acnp,
            ScalingFamily::BetweenBcAndAcNp { f } | ScalingFamily::BetweenAcNpAndN { f, .. } => f.ln_value(n, ln_acnp),
        }
    }

    pub fn f(&self, spec: &SequenceSpec, n: f64) -> Result<f64> {
        Ok(self.ln_f(spec, n)?.exp())
    }
}

impl fmt::Display for ScalingFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalingFamily::Const { ell } => write!(f, "const:{ell}"),
            ScalingFamily::AsymBc { ell } => write!(f, "asym_bc:{ell}"),
            ScalingFamily::AsymAcNp { ell } => write!(f, "asym_acnp:{ell}"),
            ScalingFamily::BetweenBcAndAcNp { f: rule } => write!(f, "between_bc_acnp:{rule}"),
            ScalingFamily::BetweenAcNpAndN { f: rule, ell1 } => write!(f, "between_acnp_n:{rule}:{ell1}"),
        }
    }
}

/// Parses `const:L`, `asym_bc:L`, `asym_acnp:L`, `between_bc_acnp:RULE` and
/// `between_acnp_n:RULE[:ELL1]`, with `RULE` one of `pow/c/beta`,
/// `logpow/c/k`, `lin/c`, `f1`, `f1/logpow/k`, `f1/pow/beta`.
impl FromStr for ScalingFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, rest) =
            s.split_once(':').ok_or_else(|| Error::invalid(format!("family {s:?} needs tag:constants")))?;
        let fam = match tag {
            "const" => ScalingFamily::Const { ell: parse_num(rest)? },
            "asym_bc" => ScalingFamily::AsymBc { ell: parse_num(rest)? },
            "asym_acnp" => ScalingFamily::AsymAcNp { ell: parse_num(rest)? },
            "between_bc_acnp" => ScalingFamily::BetweenBcAndAcNp { f: rest.parse()? },
            "between_acnp_n" => {
                let (rule, ell1) = match rest.rsplit_once(':') {
                    Some((rule, l)) => (rule.parse::<FRule>()?, Some(parse_num(l)?)),
                    None => (rest.parse::<FRule>()?, None),
                };
                let ell1 = ell1.or(rule.ell1()).unwrap_or(0.0);
                ScalingFamily::BetweenAcNpAndN { f: rule, ell1 }
            }
            _ => return Err(Error::invalid(format!("unknown family tag {tag:?}"))),
        };
        fam.validate()?;
        Ok(fam)
    }
}

/// Value at `x` of the rate function governing `(n - A*)/f(n)` for the
/// given regime and scaling family.
pub fn ldp_rate_value(regime: Regime, family: &ScalingFamily, x: ExtReal, alpha: f64, r: u32) -> Result<ExtReal> {
    check_alpha_r(alpha, r)?;
    family.validate()?;
    let unsupported = || {
        Err(Error::UnsupportedCombination(format!(
            "no large-deviation rate for family {family} in regime {}",
            regime.label()
        )))
    };
    let negative = matches!(x, ExtReal::Finite(v) if v < 0.0);
    // I₁: two-point rate, 0 at 0 and J(x0) at 1/ℓ₁
    let two_point = |ell1: f64| -> Result<ExtReal> {
        let at_far = if ell1 == 0.0 {
            x.is_infinite()
        } else {
            matches!(x, ExtReal::Finite(v) if (v - 1.0 / ell1).abs() <= 1e-9 * (1.0 / ell1))
        };
        if x == ExtReal::ZERO {
            Ok(ExtReal::ZERO)
        } else if at_far {
            Ok(ExtReal::Finite(j_min(alpha, r)?))
        } else {
            Ok(ExtReal::PosInf)
        }
    };
    let linear = |slope: f64| -> ExtReal {
        match x {
            _ if negative => ExtReal::PosInf,
            ExtReal::Finite(v) => ExtReal::Finite(slope * v),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    };
    match (*family, regime) {
        (ScalingFamily::BetweenAcNpAndN { ell1, .. }, _) => two_point(ell1),
        (ScalingFamily::AsymBc { ell }, Regime::BcDiverges) => Ok(match x {
            ExtReal::Finite(v) => entropy_h(ExtReal::Finite(ell * v)),
            ExtReal::PosInf => ExtReal::PosInf,
        }),
        (ScalingFamily::BetweenBcAndAcNp { .. }, Regime::BcDiverges)
        | (ScalingFamily::BetweenBcAndAcNp { .. }, Regime::BcFinite(_))
        | (ScalingFamily::BetweenBcAndAcNp { .. }, Regime::BcVanishes(AcNpRegime::AcNpDiverges)) => Ok(linear(1.0)),
        (ScalingFamily::AsymAcNp { ell }, Regime::BcDiverges)
        | (ScalingFamily::AsymAcNp { ell }, Regime::BcFinite(_))
        | (ScalingFamily::AsymAcNp { ell }, Regime::BcVanishes(AcNpRegime::AcNpDiverges)) => match x {
            ExtReal::PosInf => Ok(ExtReal::Finite(j_min(alpha, r)?)),
            _ => Ok(linear(ell)),
        },
        (ScalingFamily::Const { ell }, Regime::BcVanishes(AcNpRegime::AcNpDiverges)) => Ok(match x {
            _ if negative => ExtReal::PosInf,
            ExtReal::Finite(v) => ExtReal::Finite(ceil_tie(ell * v)),
            ExtReal::PosInf => ExtReal::PosInf,
        }),
        (ScalingFamily::Const { ell }, Regime::BcVanishes(AcNpRegime::AcNpFinite(gamma))) => match x {
            _ if negative => Ok(ExtReal::PosInf),
            ExtReal::Finite(v) => Ok(ExtReal::Finite(ceil_tie(ell * v) / gamma)),
            ExtReal::PosInf => Ok(ExtReal::Finite(j_min(alpha, r)?)),
        },
        (ScalingFamily::Const { ell }, Regime::BcVanishes(AcNpRegime::AcNpVanishes)) if ell >= 1.0 => two_point(0.0),
        _ => unsupported(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExponent {
    pub n: f64,
    pub eps: f64,
    pub regime: Regime,
    pub family: ScalingFamily,
    pub f_at_n: f64,
    pub speed_at_n: f64,
    pub rate_at_eps: ExtReal,
    pub log_prob_prediction: f64,
    pub table_row: String,
    pub x0: f64,
    pub j_x0: f64,
}

struct Cell {
    speed: Speed,
    rate: CellRate,
}

enum Speed {
    Bc,
    NegLogBc,
    FLogFOverBc,
    Ac,
}

enum CellRate {
    H(f64),
    Eps,
    CeilEll(f64),
    JMinEll(f64),
    JMinCeil { ell: f64, gamma: f64 },
    J,
}

fn lookup(regime: Regime, family: &ScalingFamily) -> Option<Cell> {
    use AcNpRegime::*;
    use ScalingFamily::*;
    let cell = |speed, rate| Some(Cell { speed, rate });
    match (regime, *family) {
        (Regime::BcDiverges, AsymBc { ell }) => cell(Speed::Bc, CellRate::H(ell)),
        (Regime::BcDiverges, BetweenBcAndAcNp { .. }) => cell(Speed::FLogFOverBc, CellRate::Eps),
        (Regime::BcDiverges, AsymAcNp { ell }) => cell(Speed::Ac, CellRate::JMinEll(ell)),
        (Regime::BcDiverges, BetweenAcNpAndN { .. }) => cell(Speed::Ac, CellRate::J),
        (Regime::BcFinite(_), BetweenBcAndAcNp { .. }) => cell(Speed::FLogFOverBc, CellRate::Eps),
        (Regime::BcFinite(_), AsymAcNp { ell }) => cell(Speed::Ac, CellRate::JMinEll(ell)),
        (Regime::BcFinite(_), BetweenAcNpAndN { .. }) => cell(Speed::Ac, CellRate::J),
        (Regime::BcVanishes(AcNpDiverges), Const { ell }) => cell(Speed::NegLogBc, CellRate::CeilEll(ell)),
        (Regime::BcVanishes(AcNpDiverges), BetweenBcAndAcNp { .. }) => cell(Speed::FLogFOverBc, CellRate::Eps),
        (Regime::BcVanishes(AcNpDiverges), AsymAcNp { ell }) => cell(Speed::Ac, CellRate::JMinEll(ell)),
        (Regime::BcVanishes(AcNpDiverges), BetweenAcNpAndN { .. }) => cell(Speed::Ac, CellRate::J),
        (Regime::BcVanishes(AcNpFinite(gamma)), Const { ell }) => cell(Speed::Ac, CellRate::JMinCeil { ell, gamma }),
        (Regime::BcVanishes(AcNpFinite(_)), BetweenAcNpAndN { .. }) => cell(Speed::Ac, CellRate::J),
        (Regime::BcVanishes(AcNpVanishes), Const { ell }) if ell >= 1.0 => cell(Speed::Ac, CellRate::J),
        (Regime::BcVanishes(AcNpVanishes), BetweenAcNpAndN { .. }) => cell(Speed::Ac, CellRate::J),
        _ => None,
    }
}

/// `regime/family` key of a prediction cell, e.g. `bc_diverges/asym_bc`.
fn cell_label(regime: Regime, family: &ScalingFamily) -> String {
    let r = match regime {
        Regime::BcDiverges => "bc_diverges",
        Regime::BcFinite(_) => "bc_finite",
        Regime::BcVanishes(AcNpRegime::AcNpDiverges) => "bc_vanishes.acnp_diverges",
        Regime::BcVanishes(AcNpRegime::AcNpFinite(_)) => "bc_vanishes.acnp_finite",
        Regime::BcVanishes(AcNpRegime::AcNpVanishes) => "bc_vanishes.acnp_vanishes",
    };
    let f = match family {
        ScalingFamily::Const { .. } => "const",
        ScalingFamily::AsymBc { .. } => "asym_bc",
        ScalingFamily::BetweenBcAndAcNp { .. } => "between_bc_acnp",
        ScalingFamily::AsymAcNp { .. } => "asym_acnp",
        ScalingFamily::BetweenAcNpAndN { .. } => "between_acnp_n",
    };
    format!("{r}/{f}")
}

/// Predicted `(v(n), 𝓘(ε))` for `P((n - A*)/f(n) > ε)` in a known regime.
pub fn tail_exponent_in(
    regime: Regime,
    spec: &SequenceSpec,
    n: f64,
    family: &ScalingFamily,
    eps: f64,
) -> Result<TailExponent> {
    check_alpha_r(spec.alpha, spec.r)?;
    family.validate()?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("eps = {eps} must be positive")));
    }
    let cell = lookup(regime, family).ok_or_else(|| {
        Error::UnsupportedCombination(format!("no prediction for family {family} in regime {}", regime.label()))
    })?;
    match *family {
        ScalingFamily::AsymBc { ell } if eps <= 1.0 / ell => {
            return Err(Error::EpsOutOfRange { eps, range: format!("({}, inf)", 1.0 / ell) });
        }
        ScalingFamily::BetweenAcNpAndN { ell1, .. } if ell1 > 0.0 && eps >= 1.0 / ell1 => {
            return Err(Error::EpsOutOfRange { eps, range: format!("(0, {})", 1.0 / ell1) });
        }
        _ => {}
    }
    let RateMinimum { x0, j_x0 } = minimize_rate(spec.alpha, spec.r, 1e-6)?;
    let crit = spec.critical_ln(n)?;
    let ln_f = family.ln_f(spec, n)?;
    let speed = match cell.speed {
        Speed::Bc => crit.ln_b_c.exp(),
        Speed::NegLogBc => -crit.ln_b_c,
        Speed::FLogFOverBc => ln_f.exp() * (ln_f - crit.ln_b_c),
        Speed::Ac => crit.ln_a_c.exp(),
    };
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(Error::NumericalDegeneracy(format!("speed v(n) = {speed} at n = {n} is not positive and finite")));
    }
    let rate = match cell.rate {
        CellRate::H(ell) => entropy_h(ExtReal::Finite(ell * eps)).to_f64(),
        CellRate::Eps => eps,
        CellRate::CeilEll(ell) => ceil_tie(ell * eps),
        CellRate::JMinEll(ell) => j_x0.min(ell * eps),
        CellRate::JMinCeil { ell, gamma } => j_x0.min(ceil_tie(ell * eps) / gamma),
        CellRate::J => j_x0,
    };
    Ok(TailExponent {
        n,
        eps,
        regime,
        family: *family,
        f_at_n: ln_f.exp(),
        speed_at_n: speed,
        rate_at_eps: ExtReal::from(rate),
        log_prob_prediction: -rate * speed,
        table_row: cell_label(regime, family),
        x0,
        j_x0,
    })
}

/// Trend checks that the family's defining asymptotics hold along `ladder`.
pub fn check_family(
    spec: &SequenceSpec,
    regime: Regime,
    family: &ScalingFamily,
    ladder: &[f64],
    cfg: &TrendConfig,
) -> Result<Vec<HypothesisCheck>> {
    let mut checks = Vec::new();
    let mut push = |name: &str, ln_values: Vec<f64>, want: Want| {
        let values: Vec<f64> = ln_values.iter().map(|l| l.exp()).collect();
        let trend = classify(&values, cfg);
        let verdict = match (want, trend) {
            (Want::Zero, Trend::Vanishes) | (Want::Infinity, Trend::DivergesUp) => Verdict::Satisfied,
            (Want::Limit, Trend::Vanishes | Trend::Stabilizes(_) | Trend::DivergesUp) => Verdict::Satisfied,
            (Want::Zero, Trend::DivergesUp | Trend::Increasing | Trend::Stabilizes(_)) => Verdict::Violated,
            (Want::Infinity, Trend::Vanishes | Trend::Decreasing | Trend::Stabilizes(_)) => Verdict::Violated,
            (Want::Limit, Trend::Inconclusive) => Verdict::Violated,
            _ => Verdict::Inconclusive,
        };
        checks.push(HypothesisCheck { name: name.into(), values, trend, verdict });
    };
    let mut ln_f = Vec::new();
    let mut f_np_over_ac = Vec::new();
    let mut f_over_bc = Vec::new();
    let mut p_f = Vec::new();
    for &n in ladder {
        let lp = spec.ln_p(n)?;
        let crit = spec.critical_ln(n)?;
        let lf = family.ln_f(spec, n)?;
        ln_f.push(lf);
        f_np_over_ac.push(lf + n.ln() + lp - crit.ln_a_c);
        f_over_bc.push(lf - crit.ln_b_c);
        p_f.push(lp + lf);
    }
    match family {
        ScalingFamily::BetweenBcAndAcNp { .. } => {
            push("f n p_n / a_c -> 0", f_np_over_ac, Want::Zero);
            if matches!(regime, Regime::BcDiverges) {
                push("f / b_c -> inf", f_over_bc, Want::Infinity);
            } else {
                push("f -> inf", ln_f, Want::Infinity);
            }
        }
        ScalingFamily::BetweenAcNpAndN { .. } => {
            if !matches!(regime, Regime::BcVanishes(AcNpRegime::AcNpVanishes)) {
                push("f n p_n / a_c -> inf", f_np_over_ac, Want::Infinity);
            }
            push("lim p_n f(n) exists", p_f, Want::Limit);
        }
        _ => {}
    }
    Ok(checks)
}

#[derive(Clone, Copy)]
enum Want {
    Zero,
    Infinity,
    Limit,
}

/// Classifies the regime along `ladder`, checks the family against it and
/// returns the prediction at `n`.
pub fn tail_exponent(
    spec: &SequenceSpec,
    n: f64,
    family: &ScalingFamily,
    eps: f64,
    ladder: &[f64],
    cfg: &TrendConfig,
) -> Result<TailExponent> {
    let report = check_hypotheses(spec, ladder, cfg)?;
    if let Some(h) = report.hypotheses.iter().find(|h| h.verdict == Verdict::Violated) {
        return Err(Error::RegimeMismatch(format!("hypothesis {} is violated along the ladder", h.name)));
    }
    let regime = classify_regime(spec, ladder, cfg)?;
    lookup(regime, family).ok_or_else(|| {
        Error::UnsupportedCombination(format!("no prediction for family {family} in regime {}", regime.label()))
    })?;
    for check in check_family(spec, regime, family, ladder, cfg)? {
        if check.verdict == Verdict::Violated {
            return Err(Error::UnsupportedCombination(format!(
                "family {family} fails {} along the ladder (trend {:?})",
                check.name, check.trend
            )));
        }
    }
    tail_exponent_in(regime, spec, n, family, eps)
}
