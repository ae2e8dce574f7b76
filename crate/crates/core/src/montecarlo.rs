//! Replicated estimation of tail probabilities, multilevel splitting on the
//! increment chain, rate-convergence studies and the Poisson-limit check.
//!
//! Replicate `i` of a run seeded by `rng` draws from stream `i` of a seed
//! derived from `rng`, and all aggregates are integer counts or fixed-order
//! sums, so results depend only on the seed.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson, StudentsT};

use crate::error::{Error, Result};
use crate::ext::{nonfinite, ExtReal};
use crate::model::{hazard, LnCritical, ModelParams};
use crate::oracle::{default_k, exact_stop_cdf, exact_tail_query, tail_threshold};
use crate::process::{ActivationSampler, RngSpec};
use crate::rate::{minimize_rate, tail_exponent_in, ScalingFamily};
use crate::scaled::ScaledFloat;
use crate::sequence::{classify_regime, Regime, SequenceSpec, DEFAULT_LADDER};
use crate::trend::TrendConfig;

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Smallest replicate count accepted by the naive estimators.
pub const MIN_REPLICATES: u64 = 1000;

const TAG_NAIVE: u64 = 1;
const TAG_SPLIT: u64 = 2;
const TAG_RESIDUAL: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Naive,
    Splitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub method: EstimateMethod,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Independent replicates; for splitting, the number of batches.
    pub replicates: u64,
    #[serde(with = "nonfinite")]
    pub log_p_hat: f64,
    #[serde(with = "nonfinite")]
    pub log_ci_low: f64,
    #[serde(with = "nonfinite")]
    pub log_ci_high: f64,
}

impl TailEstimate {
    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }

    /// Containment on the log scale, for probabilities that underflow.
    pub fn contains_ln(&self, ln_p: f64) -> bool {
        self.log_ci_low <= ln_p && ln_p <= self.log_ci_high
    }
}

/// Wilson score interval for `hits` successes out of `n` trials:
/// `(p̂ + z²/2n ± z sqrt(p̂(1-p̂)/n + z²/4n²)) / (1 + z²/n)`.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

fn naive_estimate(hits: u64, n: u64) -> TailEstimate {
    let p_hat = hits as f64 / n as f64;
    let (lo, hi) = wilson_interval(hits, n, Z95);
    TailEstimate {
        method: EstimateMethod::Naive,
        p_hat,
        ci_low: lo,
        ci_high: hi,
        replicates: n,
        log_p_hat: p_hat.ln(),
        log_ci_low: lo.ln(),
        log_ci_high: hi.ln(),
    }
}

fn check_replicates(replicates: u64) -> Result<()> {
    if replicates < MIN_REPLICATES {
        return Err(Error::invalid(format!("replicates = {replicates} must be at least {MIN_REPLICATES}")));
    }
    Ok(())
}

/// Feeds the stop time of each replicate of the activation-time sampler to `f`.
fn for_each_stop_time(params: &ModelParams, replicates: u64, rng: RngSpec, tag: u64, mut f: impl FnMut(u64)) {
    let base = rng.derive(tag);
    let mut sampler = ActivationSampler::new();
    for i in 0..replicates {
        let mut r = RngSpec::new(base.seed, i).rng();
        f(sampler.stop_time(params, &mut r));
    }
}

/// Naive estimate of `P(T ≤ τ)`.
pub fn estimate_stop_cdf(params: &ModelParams, tau: u64, replicates: u64, rng: RngSpec) -> Result<TailEstimate> {
    params.validate()?;
    check_replicates(replicates)?;
    let mut hits = 0;
    for_each_stop_time(params, replicates, rng, TAG_NAIVE, |t| hits += (t <= tau) as u64);
    Ok(naive_estimate(hits, replicates))
}

/// Naive estimate of `P((n - A*)/f(n) > ε)` with a Wilson interval.
pub fn estimate_tail(
    params: &ModelParams,
    family: &ScalingFamily,
    eps: f64,
    replicates: u64,
    rng: RngSpec,
) -> Result<TailEstimate> {
    params.validate()?;
    check_replicates(replicates)?;
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps = {eps} must be positive")));
    }
    let f = family.ln_f_params(params)?.exp();
    match tail_threshold(params.n, f, eps) {
        Some(tau) => estimate_stop_cdf(params, tau, replicates, rng),
        None => Ok(naive_estimate(0, replicates)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingConfig {
    /// Strictly decreasing margins ending at 0.
    pub levels: Vec<i64>,
    /// Chains run per level in each batch.
    pub per_level: usize,
    /// Independent batches; the interval is a Student-t interval over them.
    pub batches: usize,
}

impl SplittingConfig {
    pub fn with_default_levels(params: &ModelParams, count: usize, per_level: usize, batches: usize) -> Self {
        SplittingConfig { levels: default_levels(params.a, count), per_level, batches }
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || *self.levels.last().expect("nonempty") != 0 {
            return Err(Error::invalid("splitting levels must be nonempty and end at margin 0"));
        }
        if self.levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("splitting levels must be strictly decreasing"));
        }
        if self.per_level == 0 {
            return Err(Error::invalid("per-level replicates must be positive"));
        }
        if self.batches < 2 {
            return Err(Error::invalid("splitting needs at least 2 batches"));
        }
        Ok(())
    }
}

/// `count` margins equally spaced from the initial margin `a` (exclusive)
/// down to 0, deduplicated after rounding.
pub fn default_levels(a: u64, count: usize) -> Vec<i64> {
    let count = count.max(1);
    let mut levels: Vec<i64> =
        (1..=count).map(|k| ((a as f64) * (count - k) as f64 / count as f64).floor() as i64).collect();
    levels.dedup();
    levels
}

/// State of the increment chain: time, `S(t)` and running minimum margin.
#[derive(Debug, Clone, Copy)]
struct ChainState {
    t: u64,
    s: u64,
    min_margin: i64,
}

/// Runs the chain until its running-minimum margin reaches `level` (returns
/// the entrance state) or time `tau` passes without it.
fn advance<R: Rng>(params: &ModelParams, mut st: ChainState, level: i64, tau: u64, rng: &mut R) -> Option<ChainState> {
    let ModelParams { n, p, r, a } = *params;
    while st.min_margin > level {
        if st.t >= tau {
            return None;
        }
        st.t += 1;
        let q = hazard(st.t, p, r).clamp(0.0, 1.0);
        let m = n - a - st.s;
        if m > 0 && q > 0.0 {
            st.s += Binomial::new(m, q).expect("valid binomial").sample(rng);
        }
        let margin = (a + st.s) as i64 - st.t as i64;
        st.min_margin = st.min_margin.min(margin);
    }
    Some(st)
}

/// Fixed-effort multilevel splitting estimate of `P(T ≤ τ)`.
///
/// `T ≤ τ` is the event that the running minimum of `a + S(t) - t` reaches
/// 0 by time `τ`. Each batch runs `per_level` chains to the first level,
/// restarts `per_level` chains from uniformly resampled entrance states at
/// each further level, and multiplies the conditional hit fractions. Batch
/// estimates are unbiased and independent; the reported interval is
/// `mean ± t_{B-1} sd/√B`.
pub fn estimate_tail_splitting(
    params: &ModelParams,
    tau: u64,
    cfg: &SplittingConfig,
    rng: RngSpec,
) -> Result<TailEstimate> {
    params.validate()?;
    cfg.validate()?;
    if tau > params.n {
        return Err(Error::invalid(format!("tau = {tau} exceeds n = {}", params.n)));
    }
    let base = rng.derive(TAG_SPLIT);
    let mut reached = vec![false; cfg.levels.len()];
    let mut ests = Vec::with_capacity(cfg.batches);
    for b in 0..cfg.batches {
        let mut rng = RngSpec::new(base.seed, b as u64).rng();
        let mut starts = vec![ChainState { t: 0, s: 0, min_margin: params.a as i64 }];
        let mut est = ScaledFloat::ONE;
        for (k, &level) in cfg.levels.iter().enumerate() {
            let mut hits = Vec::new();
            for _ in 0..cfg.per_level {
                let start = if k == 0 { starts[0] } else { starts[rng.random_range(0..starts.len())] };
                if let Some(st) = advance(params, start, level, tau, &mut rng) {
                    hits.push(st);
                }
            }
            if hits.is_empty() {
                est = ScaledFloat::ZERO;
                break;
            }
            reached[k] = true;
            est = est * (hits.len() as f64 / cfg.per_level as f64);
            starts = hits;
        }
        ests.push(est);
    }
    if let Some(level) = reached.iter().position(|&x| !x) {
        return Err(Error::DegenerateLevels { level, margin: cfg.levels[level] });
    }
    Ok(batch_interval(&ests))
}

fn batch_interval(ests: &[ScaledFloat]) -> TailEstimate {
    let bf = ests.len() as f64;
    let mean = ests.iter().copied().sum::<ScaledFloat>() * (1.0 / bf);
    // batch values relative to the mean are O(1) even when the mean underflows
    let ln_mean = mean.ln();
    let rel: Vec<f64> = ests.iter().map(|e| if e.is_zero() { 0.0 } else { (e.ln() - ln_mean).exp() }).collect();
    let var = rel.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>() / (bf - 1.0);
    let se = (var / bf).sqrt();
    let tq = StudentsT::new(0.0, 1.0, bf - 1.0).expect("dof >= 1").inverse_cdf(0.975);
    let lo_rel = (1.0 - tq * se).max(0.0);
    let hi_rel = 1.0 + tq * se;
    let log_ci_low = ln_mean + lo_rel.ln();
    let log_ci_high = (ln_mean + hi_rel.ln()).min(0.0);
    let p_hat = mean.to_f64();
    TailEstimate {
        method: EstimateMethod::Splitting,
        p_hat,
        ci_low: log_ci_low.exp().min(p_hat),
        ci_high: log_ci_high.exp().max(p_hat),
        replicates: ests.len() as u64,
        log_p_hat: ln_mean,
        log_ci_low,
        log_ci_high,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum StudyMethod {
    /// Exact tail probability from the DP oracle.
    ExactDp,
    /// Exact `P(T ≤ ⌊K a_c⌋)` from the truncated DP; `k = None` uses the
    /// default `K`.
    EarlyStop {
        k: Option<f64>,
    },
    Naive {
        replicates: u64,
        seed: u64,
    },
    Splitting {
        levels: usize,
        per_level: usize,
        batches: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: f64,
    pub v_n: f64,
    pub p_hat: f64,
    #[serde(with = "nonfinite")]
    pub log_p: f64,
    /// `log p / v(n)`.
    #[serde(with = "nonfinite")]
    pub normalized: f64,
    /// `-𝓘(ε)`.
    #[serde(with = "nonfinite")]
    pub target: f64,
}

pub fn write_study_csv<W: Write>(rows: &[ConvergenceRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "n,v_n,p_hat,log_p,normalized,target")?;
    for r in rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.n, r.v_n, r.p_hat, r.log_p, r.normalized, r.target
        )?;
    }
    Ok(())
}

fn ladder_n(n: f64) -> Result<u64> {
    if !(n >= 1.0) || n.fract() != 0.0 || n > 1e15 {
        return Err(Error::invalid(format!("study ladder point n = {n} must be a positive integer")));
    }
    Ok(n as u64)
}

/// Estimates `P((n - A*)/f(n) > ε)` along `ladder` and normalizes by the
/// predicted speed.
///
/// `regime = None` classifies the sequence on [`DEFAULT_LADDER`].
pub fn rate_convergence_study(
    spec: &SequenceSpec,
    family: &ScalingFamily,
    eps: f64,
    ladder: &[f64],
    method: &StudyMethod,
    regime: Option<Regime>,
) -> Result<Vec<ConvergenceRow>> {
    let regime = match regime {
        Some(r) => r,
        None => classify_regime(spec, &DEFAULT_LADDER, &TrendConfig::default())?,
    };
    let mut rows = Vec::with_capacity(ladder.len());
    for &nf in ladder {
        let n = ladder_n(nf)?;
        let params = spec.params_at(n)?;
        let te = tail_exponent_in(regime, spec, nf, family, eps)?;
        let target = match te.rate_at_eps {
            ExtReal::Finite(x) => -x,
            ExtReal::PosInf => f64::NEG_INFINITY,
        };
        let (p_hat, log_p) = match *method {
            StudyMethod::ExactDp => {
                let p = exact_tail_query(&params, family, eps)?;
                (p.prob(), p.ln())
            }
            StudyMethod::EarlyStop { k } => {
                let p = early_stop_probability(spec, &params, k)?;
                (p.to_f64(), p.ln())
            }
            StudyMethod::Naive { replicates, seed } => {
                let e = estimate_tail(&params, family, eps, replicates, RngSpec::new(seed, n))?;
                (e.p_hat, e.log_p_hat)
            }
            StudyMethod::Splitting { levels, per_level, batches, seed } => {
                let f = family.ln_f_params(&params)?.exp();
                match tail_threshold(n, f, eps) {
                    Some(tau) => {
                        let cfg = SplittingConfig::with_default_levels(&params, levels, per_level, batches);
                        let e = estimate_tail_splitting(&params, tau, &cfg, RngSpec::new(seed, n))?;
                        (e.p_hat, e.log_p_hat)
                    }
                    None => (0.0, f64::NEG_INFINITY),
                }
            }
        };
        rows.push(ConvergenceRow {
            n: nf,
            v_n: te.speed_at_n,
            p_hat,
            log_p,
            normalized: log_p / te.speed_at_n,
            target,
        });
    }
    Ok(rows)
}

fn early_stop_probability(spec: &SequenceSpec, params: &ModelParams, k: Option<f64>) -> Result<ScaledFloat> {
    let k = match k {
        Some(k) if k > 0.0 => k,
        Some(k) => return Err(Error::invalid(format!("K = {k} must be positive"))),
        None => default_k(spec.alpha, spec.r)?,
    };
    let a_c = LnCritical::at(params.n as f64, params.p.ln(), params.r).ln_a_c.exp();
    let tau = ((k * a_c).floor() as u64).min(params.n);
    Ok(exact_stop_cdf(params, tau)?.value)
}

/// `(1/a_c) ln P(T ≤ ⌊K a_c⌋)` along `ladder` by the truncated DP, against
/// the target `-J(x0)`.
pub fn early_stop_study(spec: &SequenceSpec, k: Option<f64>, ladder: &[f64]) -> Result<Vec<ConvergenceRow>> {
    spec.validate()?;
    let target = -minimize_rate(spec.alpha, spec.r, 1e-9)?.j_x0;
    ladder
        .iter()
        .map(|&nf| {
            let params = spec.params_at(ladder_n(nf)?)?;
            let a_c = spec.critical_ln(nf)?.ln_a_c.exp();
            let p = early_stop_probability(spec, &params, k)?;
            Ok(ConvergenceRow { n: nf, v_n: a_c, p_hat: p.to_f64(), log_p: p.ln(), normalized: p.ln() / a_c, target })
        })
        .collect()
}

/// Samples of the residual `n - A*` from the activation-time sampler.
pub fn sample_residuals(params: &ModelParams, replicates: u64, rng: RngSpec) -> Result<Vec<u64>> {
    params.validate()?;
    let mut out = Vec::with_capacity(replicates as usize);
    for_each_stop_time(params, replicates, rng, TAG_RESIDUAL, |t| out.push(params.n - t));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonDistance {
    pub tv: f64,
    pub mean_gap: f64,
    pub b_c: f64,
    pub empirical_mean: f64,
}

/// Total-variation distance between the empirical law of `n - A*` and
/// `Poisson(b_c)`, and the relative gap of the means.
pub fn poisson_distance(params: &ModelParams, replicates: u64, rng: RngSpec) -> Result<PoissonDistance> {
    let b_c = params.critical()?.b_c;
    if !(b_c > 0.0) || !b_c.is_finite() {
        return Err(Error::NumericalDegeneracy(format!("b_c = {b_c} is not a usable Poisson mean")));
    }
    let residuals = sample_residuals(params, replicates, rng)?;
    let hist = histogram(&residuals);
    let pois = Poisson::new(b_c).map_err(|e| Error::NumericalDegeneracy(e.to_string()))?;
    let tv = tv_to_law(&hist, replicates, |k| pois.pmf(k));
    let empirical_mean = residuals.iter().sum::<u64>() as f64 / replicates as f64;
    Ok(PoissonDistance { tv, mean_gap: (empirical_mean - b_c).abs() / b_c, b_c, empirical_mean })
}

/// `hist[k]` = number of samples equal to `k`.
pub fn histogram(samples: &[u64]) -> Vec<u64> {
    let max = samples.iter().copied().max().unwrap_or(0);
    let mut h = vec![0u64; max as usize + 1];
    for &s in samples {
        h[s as usize] += 1;
    }
    h
}

/// TV distance between a histogram over `0..` and a law on the nonnegative
/// integers; mass of the law beyond the histogram counts in full.
pub fn tv_to_law(hist: &[u64], total: u64, pmf: impl Fn(u64) -> f64) -> f64 {
    let mut covered = 0.0;
    let mut diff = 0.0;
    for (k, &c) in hist.iter().enumerate() {
        let q = pmf(k as u64);
        covered += q;
        diff += (c as f64 / total as f64 - q).abs();
    }
    0.5 * (diff + (1.0 - covered).max(0.0))
}

/// Median of `(n - A*)/b_c`.
pub fn lln_median(params: &ModelParams, replicates: u64, rng: RngSpec) -> Result<f64> {
    if replicates == 0 {
        return Err(Error::invalid("replicates must be positive"));
    }
    let b_c = params.critical()?.b_c;
    let mut x = sample_residuals(params, replicates, rng)?;
    x.sort_unstable();
    let m = x.len();
    let med = if m % 2 == 1 { x[m / 2] as f64 } else { 0.5 * (x[m / 2 - 1] + x[m / 2]) as f64 };
    Ok(med / b_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson homogeneity test across rows of a contingency table of counts.
/// Columns with no observations are dropped.
pub fn chi_square_homogeneity(rows: &[Vec<u64>]) -> Result<ChiSquareTest> {
    if rows.len() < 2 {
        return Err(Error::invalid("homogeneity test needs at least two samples"));
    }
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let row_tot: Vec<f64> = rows.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> =
        (0..width).map(|j| rows.iter().map(|r| *r.get(j).unwrap_or(&0)).sum::<u64>() as f64).collect();
    let grand: f64 = row_tot.iter().sum();
    let used = col_tot.iter().filter(|&&c| c > 0.0).count();
    if used < 2 || row_tot.contains(&0.0) {
        return Ok(ChiSquareTest { statistic: 0.0, dof: 0.0, p_value: 1.0 });
    }
    let mut stat = 0.0;
    for (i, r) in rows.iter().enumerate() {
        for j in 0..width {
            if col_tot[j] == 0.0 {
                continue;
            }
            let e = row_tot[i] * col_tot[j] / grand;
            let o = *r.get(j).unwrap_or(&0) as f64;
            stat += (o - e).powi(2) / e;
        }
    }
    let dof = ((rows.len() - 1) * (used - 1)) as f64;
    let p_value = ChiSquared::new(dof).expect("dof > 0").sf(stat);
    Ok(ChiSquareTest { statistic: stat, dof, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_pmf, exact_pmf};
    use crate::sequence::PRule;

    fn params(n: u64, p: f64, r: u32, a: u64) -> ModelParams {
        ModelParams::with_degenerate(n, p, r, a).unwrap()
    }

    #[test]
    fn wilson_known_values() {
        // 0 of 10: upper limit z²/(n + z²)
        let (lo, hi) = wilson_interval(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - Z95 * Z95 / (10.0 + Z95 * Z95)).abs() < 1e-15);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo + hi - 1.0).abs() < 1e-15);
        assert!((hi - 0.596_168_5).abs() < 1e-6, "{hi}");
    }

    #[test]
    fn trivial_events() {
        let one = ScalingFamily::Const { ell: 1.0 };
        let e = estimate_tail(&params(20, 0.0, 2, 3), &one, 1.0, 1000, RngSpec::new(1, 0)).unwrap();
        assert_eq!(e.p_hat, 1.0);
        let e = estimate_tail(&params(20, 0.3, 2, 3), &one, 17.0, 1000, RngSpec::new(1, 0)).unwrap();
        assert_eq!(e.p_hat, 0.0);
        assert_eq!(e.log_p_hat, f64::NEG_INFINITY);
        assert!(estimate_tail(&params(20, 0.3, 2, 3), &one, 1.0, 999, RngSpec::new(1, 0)).is_err());
    }

    #[test]
    fn naive_covers_oracle() {
        let pr = params(6, 0.4, 2, 2);
        let one = ScalingFamily::Const { ell: 1.0 };
        let exact = exact_tail_query(&pr, &one, 1.5).unwrap().prob();
        let e = estimate_tail(&pr, &one, 1.5, 100_000, RngSpec::new(7, 0)).unwrap();
        assert!(e.contains(exact), "{e:?} vs {exact}");
        let again = estimate_tail(&pr, &one, 1.5, 100_000, RngSpec::new(7, 0)).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn splitting_trivial_and_consistent() {
        let pr = params(40, 0.05, 2, 4);
        let cfg = SplittingConfig { levels: vec![0], per_level: 200, batches: 5 };
        let e = estimate_tail_splitting(&pr, 40, &cfg, RngSpec::new(3, 0)).unwrap();
        assert_eq!(e.p_hat, 1.0);

        let pmf = exact_pmf(&pr).unwrap();
        let exact = pmf.cdf(10).to_f64();
        let cfg = SplittingConfig::with_default_levels(&pr, 3, 2000, 10);
        let e = estimate_tail_splitting(&pr, 10, &cfg, RngSpec::new(3, 0)).unwrap();
        assert!(e.contains(exact), "{e:?} vs {exact}");
        let naive = estimate_stop_cdf(&pr, 10, 20_000, RngSpec::new(4, 0)).unwrap();
        assert!(naive.ci_low <= e.ci_high && e.ci_low <= naive.ci_high);

        let bad = SplittingConfig { levels: vec![2, 0], per_level: 50, batches: 3 };
        let never = params(40, 0.9, 2, 4);
        // with p = 0.9 all nodes activate almost at once, so the margin stays high
        assert!(matches!(
            estimate_tail_splitting(&never, 3, &bad, RngSpec::new(1, 0)),
            Err(Error::DegenerateLevels { .. })
        ));
    }

    #[test]
    fn default_level_ladder() {
        assert_eq!(default_levels(12, 4), vec![9, 6, 3, 0]);
        assert_eq!(default_levels(2, 4), vec![1, 0]);
        assert_eq!(default_levels(5, 1), vec![0]);
    }

    #[test]
    fn poisson_metric_on_point_mass() {
        let pr = params(30, 1.0, 2, 2);
        let d = poisson_distance(&pr, 1000, RngSpec::new(1, 0)).unwrap();
        assert!((d.tv - (1.0 - (-d.b_c).exp())).abs() < 1e-12);
        assert_eq!(d.empirical_mean, 0.0);
    }

    #[test]
    fn chi_square_detects_difference() {
        let same = chi_square_homogeneity(&[vec![100, 200, 300], vec![105, 195, 300]]).unwrap();
        assert!(same.p_value > 0.5);
        assert_eq!(same.dof, 2.0);
        let diff = chi_square_homogeneity(&[vec![100, 200, 300], vec![300, 200, 100]]).unwrap();
        assert!(diff.p_value < 1e-10);
    }

    #[test]
    fn tv_matches_direct_sum() {
        let pr = params(6, 0.4, 2, 2);
        let bf = brute_force_pmf(&pr).unwrap();
        let hist = vec![0, 0, 5, 5, 0, 0, 10];
        let tv = tv_to_law(&hist, 20, |k| bf.prob(k));
        let direct: f64 = (0..=6).map(|k| (hist[k as usize] as f64 / 20.0 - bf.prob(k)).abs()).sum::<f64>() / 2.0;
        assert!((tv - direct).abs() < 1e-15);
    }

    #[test]
    fn study_rows() {
        let spec = SequenceSpec::new(PRule::Power { c: 1.0, beta: 0.7 }, 2, 2.0);
        let rows = early_stop_study(&spec, None, &[1000.0]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].normalized.is_finite() && rows[0].normalized < 0.0);
        let fam = ScalingFamily::BetweenAcNpAndN { f: crate::rate::FRule::Lin { c: 0.5 }, ell1: 0.5 };
        let rows = rate_convergence_study(&spec, &fam, 0.5, &[500.0, 1000.0], &StudyMethod::ExactDp, None).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.v_n > 0.0 && r.target < 0.0));
        let mut buf = Vec::new();
        write_study_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,v_n,p_hat,log_p,normalized,target\n"));
    }
}
