//! Binomial deviation bounds and the asymptotic approximations used for
//! binomial tails, `π` and `b_c`, each reported next to its exact value.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::binom::{self, ln_factorial};
use crate::error::{Error, Result};
use crate::model::{activation_prob, ln_one_minus_pi, LnCritical};
use crate::rate::FRule;
use crate::sequence::{check_hypotheses, SequenceSpec, Verdict};
use crate::trend::{classify, Trend, TrendConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    ChernoffUpper,
    ChernoffLower,
    HeavyTail,
    SmallMeanTail,
    LogTail,
    LowerTail,
}

impl BoundKind {
    pub fn is_inequality(self) -> bool {
        matches!(self, BoundKind::ChernoffUpper | BoundKind::ChernoffLower | BoundKind::HeavyTail)
    }
}

/// Applicability flag; asymptotic preconditions are reported, never enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub holds: bool,
}

fn flag(name: &str, holds: bool) -> Flag {
    Flag { name: name.into(), holds }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub n: u64,
    pub p: f64,
    pub k: u64,
    pub exact: f64,
    pub ln_exact: f64,
    pub bound_or_approx: f64,
    pub ln_bound_or_approx: f64,
    /// `exact / bound_or_approx`; for [`BoundKind::LogTail`] the ratio of logs.
    pub ratio: f64,
    pub regime_tags: Vec<Flag>,
}

impl BoundReport {
    fn new(kind: BoundKind, n: u64, p: f64, k: u64, ln_exact: f64, ln_bound: f64, regime_tags: Vec<Flag>) -> Self {
        let ratio = if kind == BoundKind::LogTail {
            ln_exact / ln_bound
        } else if ln_exact == ln_bound {
            1.0
        } else {
            (ln_exact - ln_bound).exp()
        };
        BoundReport {
            kind,
            n,
            p,
            k,
            exact: ln_exact.exp(),
            ln_exact,
            bound_or_approx: ln_bound.exp(),
            ln_bound_or_approx: ln_bound,
            ratio,
            regime_tags,
        }
    }

    /// `bound - exact`; negative values are violations.
    pub fn slack(&self) -> f64 {
        self.bound_or_approx - self.exact
    }

    pub fn holds(&self) -> bool {
        !self.kind.is_inequality() || self.slack() >= -1e-12
    }
}

fn check_np(n: u64, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p = {p} must lie in (0, 1)")));
    }
    Ok(())
}

/// `μ H(k/μ)` with `H(0) = 1`.
fn mu_entropy(mu: f64, k: f64) -> f64 {
    if k == 0.0 {
        mu
    } else {
        mu - k + k * (k / mu).ln()
    }
}

/// `P(Bin(n, p) ≥ k) ≤ exp(-μ H(k/μ))` for `k ≥ μ`.
pub fn chernoff_upper(n: u64, p: f64, k: u64) -> Result<BoundReport> {
    check_np(n, p)?;
    let mu = n as f64 * p;
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must lie strictly between 0 and n = {n}")));
    }
    if (k as f64) < mu {
        return Err(Error::invalid(format!("upper-tail bound needs k = {k} >= mu = {mu}")));
    }
    let ln_bound = -mu_entropy(mu, k as f64);
    Ok(BoundReport::new(BoundKind::ChernoffUpper, n, p, k, binom::ln_sf(n, k, p), ln_bound, Vec::new()))
}

/// `P(Bin(n, p) ≤ k) ≤ exp(-μ H(k/μ))` for `k ≤ μ`.
pub fn chernoff_lower(n: u64, p: f64, k: u64) -> Result<BoundReport> {
    check_np(n, p)?;
    let mu = n as f64 * p;
    if k >= n {
        return Err(Error::invalid(format!("k = {k} must be below n = {n}")));
    }
    if k as f64 > mu {
        return Err(Error::invalid(format!("lower-tail bound needs k = {k} <= mu = {mu}")));
    }
    let ln_bound = -mu_entropy(mu, k as f64);
    Ok(BoundReport::new(BoundKind::ChernoffLower, n, p, k, binom::ln_cdf(n, k, p), ln_bound, Vec::new()))
}

/// `P(Bin(n, p) ≥ k) ≤ exp(-(k/2) ln(k/μ))` for `k ≥ e² μ`.
pub fn heavy_tail_bound(n: u64, p: f64, k: u64) -> Result<BoundReport> {
    check_np(n, p)?;
    let mu = n as f64 * p;
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must lie strictly between 0 and n = {n}")));
    }
    let kf = k as f64;
    if kf < std::f64::consts::E.powi(2) * mu {
        return Err(Error::invalid(format!(
            "heavy-tail bound needs k = {k} >= e^2 mu = {}",
            std::f64::consts::E.powi(2) * mu
        )));
    }
    let ln_bound = -0.5 * kf * (kf / mu).ln();
    Ok(BoundReport::new(BoundKind::HeavyTail, n, p, k, binom::ln_sf(n, k, p), ln_bound, Vec::new()))
}

fn check_mq(m: f64, q: f64) -> Result<u64> {
    if !(m >= 1.0) || !m.is_finite() || m >= u64::MAX as f64 {
        return Err(Error::invalid(format!("m = {m} must be a finite real >= 1")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("q = {q} must lie in (0, 1)")));
    }
    Ok(m.floor() as u64)
}

/// `P(Bin(⌊m⌋, q) ≥ k) ≈ (qm)^k / k!` when `qm` is small.
pub fn approx_small_mean_tail(m: f64, q: f64, k: u64) -> Result<BoundReport> {
    let mi = check_mq(m, q)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let qm = q * m;
    let ln_approx = k as f64 * qm.ln() - ln_factorial(k);
    let tags = vec![flag("qm_small", qm <= 0.1)];
    Ok(BoundReport::new(BoundKind::SmallMeanTail, mi, q, k, binom::ln_sf(mi, k, q), ln_approx, tags))
}

/// `ln P(Bin(⌊m⌋, q) ≥ r) ≈ r ln(mq/r)` when `r/(qm)` is large and `r/m` small.
pub fn approx_log_tail(m: f64, q: f64, r_big: u64) -> Result<BoundReport> {
    let mi = check_mq(m, q)?;
    if r_big == 0 {
        return Err(Error::invalid("r_big must be at least 1"));
    }
    let rf = r_big as f64;
    let qm = q * m;
    let ln_approx = rf * (qm / rf).ln();
    let tags = vec![
        flag("r_over_qm_large", rf >= 10.0 * qm),
        flag("r_over_m_small", rf <= 0.1 * m),
        flag("not_degenerate", rf != qm),
        // the existence of lim qm cannot be read off one instance
        flag("limit_qm_unverifiable", true),
    ];
    Ok(BoundReport::new(BoundKind::LogTail, mi, q, r_big, binom::ln_sf(mi, r_big, q), ln_approx, tags))
}

/// `P(Bin(⌊m⌋, q) ≤ k-1) ≈ (1-q)^m (qm)^(k-1) / (k-1)!` when `qm` is large.
pub fn approx_lower_tail(m: f64, q: f64, k: u64) -> Result<BoundReport> {
    let mi = check_mq(m, q)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let qm = q * m;
    let j = (k - 1) as f64;
    let ln_approx = m * (-q).ln_1p() + j * qm.ln() - ln_factorial(k - 1);
    let ln_exact = if k == 1 {
        // single term; same expression keeps k = 1 exact to the last bit
        m.floor() * (-q).ln_1p()
    } else {
        binom::ln_cdf(mi, k - 1, q)
    };
    let tags = vec![flag("qm_large", qm >= 10.0)];
    Ok(BoundReport::new(BoundKind::LowerTail, mi, q, k, ln_exact, ln_approx, tags))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "relation", rename_all = "snake_case")]
pub enum Relation {
    /// `n π(x a_c)` against `(1/r)(1 - 1/r)^(r-1) x^r a_c`.
    Speed { x: f64 },
    /// `n (1 - π(n - f(n)))` against `b_c'`.
    OneMinusPi { f: FRule },
    /// `ln b_c` against `-n p`.
    LogBc,
}

impl Relation {
    pub fn name(&self) -> &'static str {
        match self {
            Relation::Speed { .. } => "speed",
            Relation::OneMinusPi { .. } => "one_minus_pi",
            Relation::LogBc => "log_bc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub n: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticTable {
    pub relation: Relation,
    pub rows: Vec<DiagnosticRow>,
}

impl DiagnosticTable {
    pub fn deviations(&self) -> Vec<f64> {
        self.rows.iter().map(|r| (r.ratio - 1.0).abs()).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,lhs,rhs,ratio")?;
        for r in &self.rows {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", r.n, r.lhs, r.rhs, r.ratio)?;
        }
        Ok(())
    }
}

/// Evaluates both sides of an asymptotic relation along `ladder`.
pub fn asymptotic_diagnostics(
    spec: &SequenceSpec,
    relation: &Relation,
    ladder: &[f64],
    cfg: &TrendConfig,
) -> Result<DiagnosticTable> {
    let report = check_hypotheses(spec, ladder, cfg)?;
    if let Some(h) = report.hypotheses.iter().find(|h| h.verdict == Verdict::Violated) {
        return Err(Error::RegimeMismatch(format!("hypothesis {} is violated along the ladder", h.name)));
    }
    if let Relation::LogBc = relation {
        // b_c → 0 exactly when d(n) = n p − ln n − (r−1) ln ln n → ∞
        let d = ladder.iter().map(|&n| spec.drift(n)).collect::<Result<Vec<_>>>()?;
        match classify(&d, cfg) {
            Trend::DivergesUp => {}
            Trend::Increasing | Trend::Inconclusive => {
                return Err(Error::Inconclusive(format!("log_bc: d(n) trend unclear along {ladder:?}: {d:?}")));
            }
            t => return Err(Error::RegimeMismatch(format!("log_bc needs b_c -> 0, d(n) trend {t:?}"))),
        }
    }
    let r = spec.r;
    let rf = r as f64;
    if let Relation::OneMinusPi { f } = relation {
        f.validate()?;
        let fp = ladder
            .iter()
            .map(|&n| Ok((f.ln_value(n, ln_acnp(spec, n)?) + spec.ln_p(n)?).exp()))
            .collect::<Result<Vec<_>>>()?;
        if matches!(classify(&fp, cfg), Trend::DivergesUp | Trend::Increasing | Trend::Stabilizes(_)) {
            return Err(Error::RegimeMismatch("one_minus_pi needs f(n) p_n -> 0".into()));
        }
    }
    let mut rows = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let lp = spec.ln_p(n)?;
        let crit = LnCritical::at(n, lp, r);
        let (ln_lhs, ln_rhs) = match *relation {
            Relation::Speed { x } => {
                if !(x > 0.0) {
                    return Err(Error::invalid(format!("x = {x} must be positive")));
                }
                let pi = activation_prob(x * crit.ln_a_c.exp(), lp.exp(), r)?.pi;
                let rhs = -rf.ln() + (rf - 1.0) * (1.0 - 1.0 / rf).ln() + rf * x.ln() + crit.ln_a_c;
                (n.ln() + pi.ln(), rhs)
            }
            Relation::OneMinusPi { f } => {
                let fval = f.ln_value(n, ln_acnp(spec, n)?).exp();
                let t = (n - fval).floor();
                if !(t >= 0.0) || t >= u64::MAX as f64 {
                    return Err(Error::invalid(format!("n - f(n) = {t} out of range")));
                }
                (n.ln() + ln_one_minus_pi(t as u64, lp.exp(), r), crit.ln_b_c_prime)
            }
            Relation::LogBc => {
                let (lhs, rhs) = (crit.ln_b_c, -(n.ln() + lp).exp());
                rows.push(DiagnosticRow { n, lhs, rhs, ratio: lhs / rhs });
                continue;
            }
        };
        rows.push(DiagnosticRow { n, lhs: ln_lhs.exp(), rhs: ln_rhs.exp(), ratio: (ln_lhs - ln_rhs).exp() });
    }
    Ok(DiagnosticTable { relation: *relation, rows })
}

fn ln_acnp(spec: &SequenceSpec, n: f64) -> Result<f64> {
    let lp = spec.ln_p(n)?;
    Ok(LnCritical::at(n, lp, spec.r).ln_a_c - n.ln() - lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::PRule;

    /// Direct summation of the pmf, independent of the tail routines.
    fn tail_ge(n: u64, k: u64, p: f64) -> f64 {
        binom::pmf_vec(n, p)[k as usize..].iter().sum()
    }

    #[test]
    fn chernoff_examples() {
        let b = chernoff_upper(10, 0.3, 5).unwrap();
        let mu: f64 = 3.0;
        let expect = (-(mu - 5.0 + 5.0 * (5.0 / mu).ln())).exp();
        assert!((b.bound_or_approx - expect).abs() < 1e-14);
        assert!((b.exact - tail_ge(10, 5, 0.3)).abs() < 1e-14);
        assert!(b.holds());
        let b = chernoff_upper(100, 0.1, 30).unwrap();
        assert!(b.holds() && b.ratio < 1.0);
        let b = chernoff_upper(10, 0.5, 5).unwrap();
        assert_eq!(b.bound_or_approx, 1.0);
        assert!(chernoff_upper(10, 0.5, 4).is_err());

        let b = chernoff_lower(20, 0.2, 0).unwrap();
        assert!((b.bound_or_approx - (-4.0f64).exp()).abs() < 1e-15);
        assert!((b.exact - 0.8f64.powi(20)).abs() < 1e-15);
        assert!(chernoff_lower(50, 0.5, 10).unwrap().holds());
        assert_eq!(chernoff_lower(10, 0.5, 5).unwrap().bound_or_approx, 1.0);
        assert!(chernoff_lower(10, 0.5, 6).is_err());
    }

    #[test]
    fn heavy_tail_examples() {
        assert!(heavy_tail_bound(1000, 0.001, 8).unwrap().holds());
        assert!(heavy_tail_bound(10_000, 0.001, 80).unwrap().holds());
        let mu = 1000.0 * 0.002;
        let edge = (std::f64::consts::E.powi(2) * mu).ceil() as u64;
        assert!(heavy_tail_bound(1000, 0.002, edge).is_ok());
        assert!(heavy_tail_bound(1000, 0.002, edge - 1).is_err());
    }

    #[test]
    fn approximations() {
        let b = approx_small_mean_tail(1e4, 1e-6, 2).unwrap();
        assert!((b.bound_or_approx - 5e-5).abs() < 1e-18);
        assert!((b.ratio - 1.0).abs() < 0.02);
        let b2 = approx_small_mean_tail(1e6, 1e-9, 3).unwrap();
        assert!((b2.ratio - 1.0).abs() < (b.ratio - 1.0).abs());
        let b = approx_small_mean_tail(1e3, 1e-4, 1).unwrap();
        assert!((b.exact - (1.0 - (1.0f64 - 1e-4).powi(1000))).abs() < 1e-13);

        // r/(qm) = 10 is still far from the limit
        let b = approx_log_tail(1e6, 1e-5, 100).unwrap();
        assert!((b.ratio - 0.6227).abs() < 1e-3, "{}", b.ratio);
        // with r/(qm) held at 10 the relative error does not shrink
        let b2 = approx_log_tail(1e8, 1e-6, 1000).unwrap();
        assert!((b2.ratio - 0.6110).abs() < 1e-3, "{}", b2.ratio);
        let far = approx_log_tail(1e10, 1e-10, 100).unwrap();
        assert!((far.ratio - 1.0).abs() < (b.ratio - 1.0).abs());
        let b = approx_log_tail(1e4, 1e-2, 100).unwrap();
        assert!(!b.regime_tags.iter().find(|f| f.name == "not_degenerate").unwrap().holds);

        // exact/approx = 1 + 1/(qm) + O(q)
        let b = approx_lower_tail(1e4, 1e-3, 2).unwrap();
        assert!((b.ratio - (0.1 + 1.0 / 0.999)).abs() < 1e-9, "{}", b.ratio);
        let b2 = approx_lower_tail(1e6, 1e-4, 2).unwrap();
        assert!((b2.ratio - 1.0).abs() < (b.ratio - 1.0).abs());
        let b = approx_lower_tail(12345.0, 0.01, 1).unwrap();
        assert_eq!(b.ratio, 1.0);
    }

    #[test]
    fn bound_grid() {
        let ps = [0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9];
        let mut checked = 0;
        for n in (5..=200u64).step_by(13) {
            for &p in &ps {
                let mu = n as f64 * p;
                for k in 0..n {
                    let kf = k as f64;
                    for b in [
                        (k > 0 && kf >= mu).then(|| chernoff_upper(n, p, k)),
                        (kf <= mu).then(|| chernoff_lower(n, p, k)),
                        (k > 0 && kf >= std::f64::consts::E.powi(2) * mu).then(|| heavy_tail_bound(n, p, k)),
                    ]
                    .into_iter()
                    .flatten()
                    {
                        let b = b.unwrap();
                        assert!(b.holds(), "{b:?}");
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn diagnostics() {
        let cfg = TrendConfig::default();
        let spec = SequenceSpec::new(PRule::Power { c: 1.0, beta: 0.7 }, 2, 2.0);
        let ladder = [1e6, 1e8, 1e10, 1e12];
        let t = asymptotic_diagnostics(&spec, &Relation::Speed { x: 1.0 }, &ladder, &cfg).unwrap();
        let d = t.deviations();
        assert!(d.windows(2).all(|w| w[1] <= w[0]) && d[3] < 0.01, "{d:?}");

        let spec6 = SequenceSpec::new(PRule::Power { c: 1.0, beta: 0.6 }, 2, 2.0);
        let f = FRule::LogPow { c: 1.0, k: 1.0 };
        let t = asymptotic_diagnostics(&spec6, &Relation::OneMinusPi { f }, &[1e3, 1e4, 1e5, 1e6], &cfg).unwrap();
        let d = t.deviations();
        assert!(d.windows(2).all(|w| w[1] <= w[0]) && d[3] < 0.01, "{d:?}");

        let t = asymptotic_diagnostics(&spec, &Relation::LogBc, &[1e6, 1e8, 1e10, 1e12], &cfg).unwrap();
        let d = t.deviations();
        assert!(d.windows(2).all(|w| w[1] <= w[0]) && d[3] < 0.1, "{d:?}");
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,lhs,rhs,ratio\n"));

        let finite = SequenceSpec::new(PRule::LogForm { d: -std::f64::consts::LN_2 }, 2, 2.0);
        let err = asymptotic_diagnostics(&finite, &Relation::LogBc, &crate::sequence::DEFAULT_LADDER, &cfg);
        assert!(matches!(err, Err(Error::RegimeMismatch(_))), "{err:?}");
    }
}
