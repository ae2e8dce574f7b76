//! Parametric families `n ↦ (p_n, a_n)`, hypothesis checks and regime
//! classification along a ladder of `n` values.
//!
//! Ladders are real-valued so that families can be followed far beyond
//! `u64`; everything is evaluated through `ln p_n`.

use serde::{Deserialize, Serialize};

use crate::binom::ln_factorial;
use crate::error::{Error, Result};
use crate::model::{LnCritical, ModelParams};
use crate::trend::{classify, Trend, TrendConfig};

/// Closed catalog of edge-probability rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "constants", rename_all = "snake_case")]
pub enum PRule {
    /// `c · n^{-β}`
    Power { c: f64, beta: f64 },
    /// `(ln n + (r-1) ln ln n + d) / n`
    LogForm { d: f64 },
    /// `c · ln n / n`
    ScaledLog { c: f64 },
    /// Log-log linear interpolation through `(n, p)` points; no extrapolation.
    Custom { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ARule {
    /// `⌈α a_c(n)⌉`, clamped to `1..=n`
    #[default]
    CeilAlphaAc,
    Fixed {
        a: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(flatten)]
    pub p_rule: PRule,
    pub r: u32,
    pub alpha: f64,
    #[serde(default)]
    pub a_rule: ARule,
}

/// Wide default ladder: logarithmic corrections only separate trends over
/// hundreds of decades.
pub const DEFAULT_LADDER: [f64; 5] = [1e3, 1e10, 1e30, 1e100, 1e250];

impl SequenceSpec {
    pub fn new(p_rule: PRule, r: u32, alpha: f64) -> Self {
        SequenceSpec { p_rule, r, alpha, a_rule: ARule::CeilAlphaAc }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: SequenceSpec =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("bad sequence spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return Err(Error::invalid(format!("threshold r = {} must be at least 2", self.r)));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::invalid(format!("alpha = {} must be positive", self.alpha)));
        }
        match &self.p_rule {
            PRule::Power { c, beta } if !(*c > 0.0 && beta.is_finite()) => {
                Err(Error::invalid("power rule needs c > 0 and finite beta"))
            }
            PRule::ScaledLog { c } if *c <= 0.0 || !c.is_finite() => Err(Error::invalid("scaled_log needs c > 0")),
            PRule::LogForm { d } if !d.is_finite() => Err(Error::invalid("log_form needs finite d")),
            PRule::Custom { points } => {
                if points.len() < 2 {
                    return Err(Error::invalid("custom rule needs at least two points"));
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::invalid("custom rule points must have increasing n"));
                }
                if points.iter().any(|q| !(q[0] > 0.0 && q[1] > 0.0 && q[1] < 1.0)) {
                    return Err(Error::invalid("custom rule points need n > 0 and p in (0, 1)"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `ln p_n`; fails when `p_n ∉ (0, 1)` or `n` is outside a custom table.
    pub fn ln_p(&self, n: f64) -> Result<f64> {
        if !(n >= 3.0) || !n.is_finite() {
            return Err(Error::invalid(format!("sequence evaluated at n = {n}; need n >= 3")));
        }
        let ln_n = n.ln();
        let lp = match &self.p_rule {
            PRule::Power { c, beta } => c.ln() - beta * ln_n,
            PRule::LogForm { d } => {
                let num = ln_n + (self.r as f64 - 1.0) * ln_n.ln() + d;
                if num <= 0.0 {
                    return Err(Error::invalid(format!("log_form gives p_n <= 0 at n = {n}")));
                }
                num.ln() - ln_n
            }
            PRule::ScaledLog { c } => c.ln() + ln_n.ln() - ln_n,
            PRule::Custom { points } => {
                let (first, last) = (points[0][0], points[points.len() - 1][0]);
                if n < first || n > last {
                    return Err(Error::invalid(format!("n = {n} outside the custom table [{first}, {last}]")));
                }
                let i = points.partition_point(|q| q[0] <= n).clamp(1, points.len() - 1);
                let (x0, y0) = (points[i - 1][0].ln(), points[i - 1][1].ln());
                let (x1, y1) = (points[i][0].ln(), points[i][1].ln());
                y0 + (y1 - y0) * (ln_n - x0) / (x1 - x0)
            }
        };
        if !(lp < 0.0) {
            return Err(Error::invalid(format!("p_n = {} is not in (0, 1) at n = {n}", lp.exp())));
        }
        Ok(lp)
    }

    pub fn p(&self, n: f64) -> Result<f64> {
        Ok(self.ln_p(n)?.exp())
    }

    pub fn critical_ln(&self, n: f64) -> Result<LnCritical> {
        Ok(LnCritical::at(n, self.ln_p(n)?, self.r))
    }

    /// `a_n` as a real number, so it can be followed past `u64`.
    pub fn a(&self, n: f64) -> Result<f64> {
        let a = match self.a_rule {
            ARule::CeilAlphaAc => (self.alpha * self.critical_ln(n)?.ln_a_c.exp()).ceil(),
            ARule::Fixed { a } => a as f64,
        };
        Ok(a.clamp(1.0, n))
    }

    /// The finite instance at integer `n`.
    pub fn params_at(&self, n: u64) -> Result<ModelParams> {
        let nf = n as f64;
        let p = self.p(nf)?;
        let a = self.a(nf)?;
        ModelParams::new(n, p, self.r, (a as u64).clamp(1, n))
    }

    /// `d(n) = n p_n − ln n − (r−1) ln ln n`.
    pub fn drift(&self, n: f64) -> Result<f64> {
        let ln_n = n.ln();
        Ok((ln_n + self.ln_p(n)?).exp() - ln_n - (self.r as f64 - 1.0) * ln_n.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub values: Vec<f64>,
    pub trend: Trend,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub ladder: Vec<f64>,
    pub hypotheses: Vec<HypothesisCheck>,
    /// Consequences that must then hold: `a_c → ∞`, `a_c/n → 0`, `p a_c → 0`.
    pub consequences: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_satisfied(&self) -> bool {
        self.hypotheses.iter().all(|h| h.verdict == Verdict::Satisfied)
    }

    pub fn any_violated(&self) -> bool {
        self.hypotheses.iter().any(|h| h.verdict == Verdict::Violated)
    }
}

/// Factor by which a positive, strictly decreasing window must shrink to
/// count as heading to zero in a hypothesis check.
const ZERO_DECAY: f64 = 2.0;

fn to_zero_verdict(values: &[f64], cfg: &TrendConfig) -> (Trend, Verdict) {
    let trend = classify(values, cfg);
    let w = &values[values.len() - cfg.window..];
    let verdict = match trend {
        Trend::Vanishes => Verdict::Satisfied,
        Trend::Decreasing if w[0] > 0.0 && w[w.len() - 1] * ZERO_DECAY <= w[0] => Verdict::Satisfied,
        Trend::DivergesUp | Trend::Increasing => Verdict::Violated,
        Trend::Stabilizes(v) if v != 0.0 => Verdict::Violated,
        _ => Verdict::Inconclusive,
    };
    (trend, verdict)
}

fn to_infinity_verdict(values: &[f64], cfg: &TrendConfig) -> (Trend, Verdict) {
    let trend = classify(values, cfg);
    let verdict = match trend {
        Trend::DivergesUp => Verdict::Satisfied,
        Trend::Decreasing | Trend::Vanishes | Trend::Stabilizes(_) => Verdict::Violated,
        _ => Verdict::Inconclusive,
    };
    (trend, verdict)
}

fn check_ladder(ladder: &[f64], cfg: &TrendConfig) -> Result<()> {
    if ladder.len() < cfg.window.max(4) {
        return Err(Error::invalid(format!("ladder needs at least {} points", cfg.window.max(4))));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("ladder must be strictly increasing"));
    }
    Ok(())
}

pub fn check_hypotheses(spec: &SequenceSpec, ladder: &[f64], cfg: &TrendConfig) -> Result<HypothesisReport> {
    spec.validate()?;
    check_ladder(ladder, cfg)?;
    let rf = spec.r as f64;
    let mut inv_np = Vec::new();
    let mut p_root = Vec::new();
    let mut a_ratio = Vec::new();
    let mut a_c = Vec::new();
    let mut a_c_over_n = Vec::new();
    let mut p_a_c = Vec::new();
    for &n in ladder {
        let lp = spec.ln_p(n)?;
        let ln_n = n.ln();
        let crit = LnCritical::at(n, lp, spec.r);
        inv_np.push((-ln_n - lp).exp());
        p_root.push((lp + ln_n / rf).exp());
        a_ratio.push(spec.a(n)? / crit.ln_a_c.exp());
        a_c.push(crit.ln_a_c.exp());
        a_c_over_n.push((crit.ln_a_c - ln_n).exp());
        p_a_c.push((crit.ln_a_c + lp).exp());
    }

    let mut hypotheses = Vec::new();
    let (trend, verdict) = to_zero_verdict(&inv_np, cfg);
    hypotheses.push(HypothesisCheck { name: "1/(n p_n) -> 0".into(), values: inv_np, trend, verdict });
    let (trend, verdict) = to_zero_verdict(&p_root, cfg);
    hypotheses.push(HypothesisCheck { name: "p_n n^(1/r) -> 0".into(), values: p_root, trend, verdict });
    let trend = classify(&a_ratio, cfg);
    let verdict = if spec.alpha <= 1.0 {
        Verdict::Violated
    } else {
        match trend {
            Trend::Stabilizes(v) if v > 1.0 => Verdict::Satisfied,
            Trend::Stabilizes(_) | Trend::Vanishes | Trend::DivergesUp => Verdict::Violated,
            _ => Verdict::Inconclusive,
        }
    };
    hypotheses.push(HypothesisCheck { name: "a_n/a_c -> alpha > 1".into(), values: a_ratio, trend, verdict });

    let mut consequences = Vec::new();
    let (trend, verdict) = to_infinity_verdict(&a_c, cfg);
    consequences.push(HypothesisCheck { name: "a_c -> inf".into(), values: a_c, trend, verdict });
    let (trend, verdict) = to_zero_verdict(&a_c_over_n, cfg);
    consequences.push(HypothesisCheck { name: "a_c/n -> 0".into(), values: a_c_over_n, trend, verdict });
    let (trend, verdict) = to_zero_verdict(&p_a_c, cfg);
    consequences.push(HypothesisCheck { name: "p_n a_c -> 0".into(), values: p_a_c, trend, verdict });

    Ok(HypothesisReport { ladder: ladder.to_vec(), hypotheses, consequences })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sub", content = "gamma")]
pub enum AcNpRegime {
    AcNpDiverges,
    AcNpFinite(f64),
    AcNpVanishes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", content = "value")]
pub enum Regime {
    BcDiverges,
    BcFinite(f64),
    BcVanishes(AcNpRegime),
}

impl Regime {
    pub fn label(&self) -> String {
        match self {
            Regime::BcDiverges => "BcDiverges".into(),
            Regime::BcFinite(b) => format!("BcFinite(b={b})"),
            Regime::BcVanishes(AcNpRegime::AcNpDiverges) => "BcVanishes/AcNpDiverges".into(),
            Regime::BcVanishes(AcNpRegime::AcNpFinite(g)) => format!("BcVanishes/AcNpFinite(gamma={g})"),
            Regime::BcVanishes(AcNpRegime::AcNpVanishes) => "BcVanishes/AcNpVanishes".into(),
        }
    }
}

/// Classifies a sequence given by its logarithms; overflowing values still
/// count as diverging when the logs increase.
fn classify_ln(ln_values: &[f64], cfg: &TrendConfig) -> Trend {
    let values: Vec<f64> = ln_values.iter().map(|l| l.exp()).collect();
    if values.iter().all(|v| v.is_finite()) {
        return classify(&values, cfg);
    }
    let w = &ln_values[ln_values.len() - cfg.window..];
    if w.windows(2).all(|q| q[1] > q[0]) && values[values.len() - 1].is_infinite() {
        return Trend::DivergesUp;
    }
    Trend::Inconclusive
}

pub fn classify_regime(spec: &SequenceSpec, ladder: &[f64], cfg: &TrendConfig) -> Result<Regime> {
    let report = check_hypotheses(spec, ladder, cfg)?;
    if let Some(h) = report.hypotheses.iter().find(|h| h.verdict == Verdict::Violated) {
        return Err(Error::RegimeMismatch(format!("hypothesis {} is violated along the ladder", h.name)));
    }
    let d: Vec<f64> = ladder.iter().map(|&n| spec.drift(n)).collect::<Result<_>>()?;
    match classify(&d, cfg) {
        Trend::DivergesDown => Ok(Regime::BcDiverges),
        Trend::Stabilizes(lim) => Ok(Regime::BcFinite((-lim - ln_factorial(spec.r as u64 - 1)).exp())),
        Trend::DivergesUp => {
            let ratio: Vec<f64> = ladder
                .iter()
                .map(|&n| {
                    let lp = spec.ln_p(n)?;
                    Ok(LnCritical::at(n, lp, spec.r).ln_a_c - n.ln() - lp)
                })
                .collect::<Result<_>>()?;
            match classify_ln(&ratio, cfg) {
                Trend::DivergesUp => Ok(Regime::BcVanishes(AcNpRegime::AcNpDiverges)),
                Trend::Vanishes => Ok(Regime::BcVanishes(AcNpRegime::AcNpVanishes)),
                Trend::Stabilizes(g) => Ok(Regime::BcVanishes(AcNpRegime::AcNpFinite(g))),
                t => Err(Error::Inconclusive(format!("a_c/(n p_n) trend {t:?} along {ladder:?}"))),
            }
        }
        t => Err(Error::Inconclusive(format!("d(n) trend {t:?} along {ladder:?}: values {d:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(lo: i32, hi: i32) -> Vec<f64> {
        (lo..=hi).map(|k| 10f64.powi(k)).collect()
    }

    fn power(beta: f64, alpha: f64) -> SequenceSpec {
        SequenceSpec::new(PRule::Power { c: 1.0, beta }, 2, alpha)
    }

    #[test]
    fn json_schema() {
        let s = r#"{"rule":"power","constants":{"c":1.0,"beta":0.7},"r":2,"alpha":2.0}"#;
        let spec = SequenceSpec::from_json(s).unwrap();
        assert_eq!(spec, power(0.7, 2.0));
        let back: SequenceSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let s = r#"{"rule":"log_form","constants":{"d":-0.5},"r":3,"alpha":1.5,"a_rule":{"kind":"fixed","a":40}}"#;
        let spec = SequenceSpec::from_json(s).unwrap();
        assert_eq!(spec.a_rule, ARule::Fixed { a: 40 });
        assert!(
            SequenceSpec::from_json(r#"{"rule":"power","constants":{"c":1.0,"beta":0.7},"r":1,"alpha":2}"#).is_err()
        );
    }

    #[test]
    fn rules_evaluate() {
        let spec = power(0.7, 2.0);
        assert!((spec.p(1e10).unwrap() - 1e-7).abs() < 1e-20);
        let spec = SequenceSpec::new(PRule::ScaledLog { c: 0.5 }, 2, 2.0);
        let n = 1e5f64;
        assert!((spec.p(n).unwrap() - 0.5 * n.ln() / n).abs() < 1e-18);
        let spec = SequenceSpec::new(PRule::Custom { points: vec![[1e3, 1e-2], [1e5, 1e-4]] }, 2, 2.0);
        assert!((spec.p(1e4).unwrap() - 1e-3).abs() < 1e-15);
        assert!(spec.p(1e6).is_err());
        // p_n >= 1 is refused
        assert!(power(0.0, 2.0).p(100.0).is_err());
    }

    #[test]
    fn params_at_uses_ceil_alpha_ac() {
        let spec = power(0.7, 2.0);
        let params = spec.params_at(10_000).unwrap();
        let a_c = 0.5 / (1e4 * params.p * params.p);
        assert_eq!(params.a, (2.0 * a_c).ceil() as u64);
    }

    #[test]
    fn hypotheses_power_07() {
        let report = check_hypotheses(&power(0.7, 2.0), &geometric(3, 9), &TrendConfig::default()).unwrap();
        assert!(report.all_satisfied(), "{report:#?}");
        assert!(report.consequences.iter().all(|c| c.verdict == Verdict::Satisfied), "{report:#?}");
    }

    #[test]
    fn hypotheses_power_04_violates_sparsity() {
        let report = check_hypotheses(&power(0.4, 2.0), &geometric(3, 9), &TrendConfig::default()).unwrap();
        assert_eq!(report.hypotheses[1].verdict, Verdict::Violated);
    }

    #[test]
    fn alpha_one_violates_supercriticality() {
        let report = check_hypotheses(&power(0.7, 1.0), &geometric(3, 9), &TrendConfig::default()).unwrap();
        assert_eq!(report.hypotheses[2].verdict, Verdict::Violated);
    }

    #[test]
    fn short_ladder_rejected() {
        assert!(check_hypotheses(&power(0.7, 2.0), &[1e3, 1e4, 1e5], &TrendConfig::default()).is_err());
    }

    #[test]
    fn regimes() {
        let cfg = TrendConfig::default();
        let finite = SequenceSpec::new(PRule::LogForm { d: -std::f64::consts::LN_2 }, 2, 2.0);
        match classify_regime(&finite, &DEFAULT_LADDER, &cfg).unwrap() {
            Regime::BcFinite(b) => assert!((b - 2.0).abs() < 1e-6, "b = {b}"),
            other => panic!("{other:?}"),
        }
        let diverging = SequenceSpec::new(PRule::ScaledLog { c: 0.5 }, 2, 2.0);
        assert_eq!(classify_regime(&diverging, &DEFAULT_LADDER, &cfg).unwrap(), Regime::BcDiverges);
        assert_eq!(
            classify_regime(&power(0.7, 2.0), &DEFAULT_LADDER, &cfg).unwrap(),
            Regime::BcVanishes(AcNpRegime::AcNpDiverges)
        );
        // r = 2, p = c n^{-2/3}: a_c/(np) = 1/(2 c^3)
        let spec = SequenceSpec::new(PRule::Power { c: 0.5, beta: 2.0 / 3.0 }, 2, 2.0);
        match classify_regime(&spec, &DEFAULT_LADDER, &cfg).unwrap() {
            Regime::BcVanishes(AcNpRegime::AcNpFinite(g)) => assert!((g - 4.0).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            classify_regime(&power(0.6, 2.0), &DEFAULT_LADDER, &cfg).unwrap(),
            Regime::BcVanishes(AcNpRegime::AcNpVanishes)
        );
    }

    #[test]
    fn bc_prime_ratio_tends_to_one() {
        let spec = SequenceSpec::new(PRule::LogForm { d: 0.3 }, 3, 2.0);
        let ladder = geometric(4, 12);
        let gaps: Vec<f64> = ladder
            .iter()
            .map(|&n| {
                let c = spec.critical_ln(n).unwrap();
                (c.ln_b_c_prime - c.ln_b_c).exp_m1().abs()
            })
            .collect();
        let tail = &gaps[gaps.len() - 4..];
        assert!(tail.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn consequences_hold_across_catalog() {
        let cfg = TrendConfig::default();
        for spec in [
            power(0.7, 2.0),
            SequenceSpec::new(PRule::Power { c: 1.0, beta: 0.5 }, 3, 1.5),
            SequenceSpec::new(PRule::LogForm { d: 1.0 }, 2, 3.0),
            SequenceSpec::new(PRule::ScaledLog { c: 2.0 }, 4, 1.2),
        ] {
            let report = check_hypotheses(&spec, &DEFAULT_LADDER, &cfg).unwrap();
            assert!(report.all_satisfied(), "{spec:?}: {report:#?}");
            for c in &report.consequences {
                assert_eq!(c.verdict, Verdict::Satisfied, "{spec:?}: {c:?}");
            }
        }
    }
}
