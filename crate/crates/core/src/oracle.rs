//! Exact law of the final size via the binomial-increment chain.
//!
//! Given `S(t-1) = s` and survival to `t - 1`, the increment at step `t` is
//! `Bin(n - a - s, q_t)` with `q_t = P(Y = t | Y > t - 1)`; the chain is
//! absorbed at the first `t` with `a + S(t) = t`, and then `A* = T = t`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::binom::{self, pmf_window};
use crate::error::{Error, Result};
use crate::model::{activation_prob_int, hazard, ModelParams};
use crate::rate::ScalingFamily;
use crate::scaled::ScaledFloat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Largest `n` for the full pmf.
    pub pmf_cap: u64,
    /// Largest horizon `τ` for truncated stop probabilities.
    pub tau_cap: u64,
    /// Relative cut for transition rows.
    pub row_cut: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { pmf_cap: 2000, tau_cap: 50_000, row_cut: 1e-30 }
    }
}

/// Exact law of `A*`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalSizePmf {
    pub params: ModelParams,
    /// `probs[i] = P(A* = a + i)`.
    probs: Vec<ScaledFloat>,
    /// Upper bound on the probability mass lost to row truncation.
    pub discarded_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct PmfEntry {
    k: u64,
    prob: f64,
    #[serde(with = "crate::ext::nonfinite")]
    log2_prob: f64,
}

#[derive(Serialize, Deserialize)]
struct PmfDoc {
    params: ModelParams,
    discarded_bound: f64,
    probs: Vec<PmfEntry>,
}

impl FinalSizePmf {
    pub fn from_probs(params: ModelParams, probs: Vec<ScaledFloat>, discarded_bound: f64) -> Self {
        assert_eq!(probs.len() as u64, params.n - params.a + 1);
        FinalSizePmf { params, probs, discarded_bound }
    }

    pub fn prob(&self, k: u64) -> f64 {
        self.scaled(k).to_f64()
    }

    pub fn scaled(&self, k: u64) -> ScaledFloat {
        if k < self.params.a || k > self.params.n {
            ScaledFloat::ZERO
        } else {
            self.probs[(k - self.params.a) as usize]
        }
    }

    /// `(k, P(A* = k))` for `k = a..=n`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, ScaledFloat)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (self.params.a + i as u64, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().copied().sum::<ScaledFloat>().to_f64()
    }

    /// `P(A* ≤ k)`.
    pub fn cdf(&self, k: u64) -> ScaledFloat {
        self.iter().take_while(|&(j, _)| j <= k).map(|(_, p)| p).sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, p)| k as f64 * p.to_f64()).sum()
    }

    /// CSV with header `k,prob,log2_prob`; `log2_prob` keeps probabilities
    /// that underflow `f64`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,prob,log2_prob")?;
        for (k, p) in self.iter() {
            writeln!(w, "{k},{:.16e},{:.16e}", p.to_f64(), p.log2())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let doc = PmfDoc {
            params: self.params,
            discarded_bound: self.discarded_bound,
            probs: self.iter().map(|(k, p)| PmfEntry { k, prob: p.to_f64(), log2_prob: p.log2() }).collect(),
        };
        serde_json::to_value(doc).expect("pmf serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let doc: PmfDoc =
            serde_json::from_value(v.clone()).map_err(|e| Error::invalid(format!("bad pmf document: {e}")))?;
        doc.params.validate()?;
        let probs = doc
            .probs
            .iter()
            .map(|e| if e.log2_prob == f64::NEG_INFINITY { ScaledFloat::ZERO } else { log2_to_scaled(e.log2_prob) })
            .collect();
        Ok(FinalSizePmf::from_probs(doc.params, probs, doc.discarded_bound))
    }
}

fn log2_to_scaled(l2: f64) -> ScaledFloat {
    let e = l2.floor();
    ScaledFloat::from_parts((l2 - e).exp2(), e as i64)
}

/// Alive states `s ∈ lo..lo+v.len()`, true mass `v[i] · exp(ln_scale)`.
struct Alive {
    lo: u64,
    v: Vec<f64>,
    ln_scale: f64,
}

struct Dp<'a> {
    params: &'a ModelParams,
    /// Largest tracked `s`; mass beyond it is dropped on purpose.
    s_cap: u64,
    row_cut: f64,
    alive: Alive,
    discarded: ScaledFloat,
}

impl<'a> Dp<'a> {
    fn new(params: &'a ModelParams, s_cap: u64, row_cut: f64) -> Self {
        Dp { params, s_cap, row_cut, alive: Alive { lo: 0, v: vec![1.0], ln_scale: 0.0 }, discarded: ScaledFloat::ZERO }
    }

    fn is_empty(&self) -> bool {
        self.alive.v.is_empty()
    }

    /// Advances from `t - 1` to `t`; returns the mass absorbed at `t`.
    fn step(&mut self, t: u64) -> Result<ScaledFloat> {
        let ModelParams { n, p, r, a } = *self.params;
        let q = hazard(t, p, r);
        if !(-1e-12..=1.0 + 1e-12).contains(&q) || q.is_nan() {
            return Err(Error::NumericalDegeneracy(format!("hazard q_{t} = {q} outside [0, 1]")));
        }
        let q = q.clamp(0.0, 1.0);
        let alive = &self.alive;
        let mut rows = Vec::with_capacity(alive.v.len());
        let mut m = f64::NEG_INFINITY;
        for (i, &w) in alive.v.iter().enumerate() {
            if w <= 0.0 {
                rows.push(None);
                continue;
            }
            let s = alive.lo + i as u64;
            let win = pmf_window(n - a - s, q, self.row_cut, self.s_cap - s);
            if win.rel.is_empty() {
                rows.push(None);
                continue;
            }
            let l = w.ln() + win.ln_scale;
            if l > m {
                m = l;
            }
            rows.push(Some((l, win)));
        }
        let lo = alive.lo;
        let mut next = vec![0.0; (self.s_cap - lo + 1) as usize];
        let mut discarded = ScaledFloat::ZERO;
        for (i, row) in rows.into_iter().enumerate() {
            let Some((l, win)) = row else { continue };
            let s = lo + i as u64;
            let f = (l - m).exp();
            if win.dropped_rel > 0.0 {
                discarded += ScaledFloat::from_ln(l + alive.ln_scale + win.dropped_rel.ln());
            }
            if f == 0.0 {
                let mass: f64 = win.rel.iter().sum();
                if mass > 0.0 {
                    discarded += ScaledFloat::from_ln(l + alive.ln_scale + mass.ln());
                }
                continue;
            }
            let base = (s + win.lo - lo) as usize;
            for (j, &x) in win.rel.iter().enumerate() {
                next[base + j] += f * x;
            }
        }
        self.discarded += discarded;
        let ln_scale = alive.ln_scale + m;

        let mut absorbed = ScaledFloat::ZERO;
        if t >= a && t - a >= lo && t - a <= self.s_cap {
            let idx = (t - a - lo) as usize;
            if next[idx] > 0.0 {
                absorbed = ScaledFloat::from_ln(next[idx].ln() + ln_scale);
            }
            next[idx] = 0.0;
        }
        // states with a + s ≤ t have stopped
        let new_lo = lo.max((t + 1).saturating_sub(a));
        let drop = ((new_lo - lo) as usize).min(next.len());
        next.drain(..drop);
        while next.last() == Some(&0.0) {
            next.pop();
        }
        let start_zeros = next.iter().take_while(|&&x| x == 0.0).count();
        next.drain(..start_zeros);
        let lo = new_lo + start_zeros as u64;
        let peak = next.iter().copied().fold(0.0, f64::max);
        let ln_scale = if peak > 0.0 {
            next.iter_mut().for_each(|x| *x /= peak);
            ln_scale + peak.ln()
        } else {
            ln_scale
        };
        self.alive = Alive { lo, v: next, ln_scale };
        Ok(absorbed)
    }
}

/// Exact pmf of `A*` for `n ≤ cfg.pmf_cap`.
pub fn exact_pmf(params: &ModelParams) -> Result<FinalSizePmf> {
    exact_pmf_with(params, &OracleConfig::default())
}

pub fn exact_pmf_with(params: &ModelParams, cfg: &OracleConfig) -> Result<FinalSizePmf> {
    params.validate()?;
    if params.n > cfg.pmf_cap {
        return Err(Error::CapExceeded { n: params.n, cap: cfg.pmf_cap, what: "exact pmf" });
    }
    let (n, a) = (params.n, params.a);
    let mut probs = vec![ScaledFloat::ZERO; (n - a + 1) as usize];
    let mut dp = Dp::new(params, n - a, cfg.row_cut);
    let mut t = 0;
    while !dp.is_empty() && t < n {
        t += 1;
        let mass = dp.step(t)?;
        if t >= a {
            probs[(t - a) as usize] = mass;
        }
    }
    Ok(FinalSizePmf { params: *params, probs, discarded_bound: dp.discarded.to_f64() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopProbability {
    pub value: ScaledFloat,
    pub discarded_bound: ScaledFloat,
}

impl StopProbability {
    pub fn prob(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn ln(&self) -> f64 {
        self.value.ln()
    }
}

/// `P(T ≤ τ)`. States with `a + s > τ` can no longer stop by `τ` and are
/// lumped into one absorbing state, so the cost depends on `τ`, not `n`.
pub fn exact_stop_cdf(params: &ModelParams, tau: u64) -> Result<StopProbability> {
    exact_stop_cdf_with(params, tau, &OracleConfig::default())
}

pub fn exact_stop_cdf_with(params: &ModelParams, tau: u64, cfg: &OracleConfig) -> Result<StopProbability> {
    params.validate()?;
    let (n, a) = (params.n, params.a);
    if tau > n {
        return Err(Error::invalid(format!("tau = {tau} exceeds n = {n}")));
    }
    if tau > cfg.tau_cap {
        return Err(Error::CapExceeded { n: tau, cap: cfg.tau_cap, what: "truncated stop probability (tau)" });
    }
    if tau < a {
        return Ok(StopProbability { value: ScaledFloat::ZERO, discarded_bound: ScaledFloat::ZERO });
    }
    if tau == n {
        return Ok(StopProbability { value: ScaledFloat::ONE, discarded_bound: ScaledFloat::ZERO });
    }
    let mut dp = Dp::new(params, tau - a, cfg.row_cut);
    let mut total = ScaledFloat::ZERO;
    let mut t = 0;
    while !dp.is_empty() && t < tau {
        t += 1;
        total += dp.step(t)?;
    }
    Ok(StopProbability { value: total, discarded_bound: dp.discarded })
}

/// Last stop time inside `{(n - A*)/f(n) > ε} = {T < n - ε f(n)}`.
pub fn tail_threshold(n: u64, f: f64, eps: f64) -> Option<u64> {
    let bound = n as f64 - eps * f;
    let t = bound.ceil() - 1.0;
    if t < 0.0 {
        None
    } else {
        Some(t as u64)
    }
}

/// `P((n - A*)/f(n) > ε)` with `f` evaluated at this instance.
pub fn exact_tail_query(params: &ModelParams, family: &ScalingFamily, eps: f64) -> Result<StopProbability> {
    exact_tail_query_with(params, family, eps, &OracleConfig::default())
}

pub fn exact_tail_query_with(
    params: &ModelParams,
    family: &ScalingFamily,
    eps: f64,
    cfg: &OracleConfig,
) -> Result<StopProbability> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps = {eps} must be positive")));
    }
    let f = family.ln_f_params(params)?.exp();
    let Some(tau) = tail_threshold(params.n, f, eps) else {
        return Ok(StopProbability { value: ScaledFloat::ZERO, discarded_bound: ScaledFloat::ZERO });
    };
    if params.n <= cfg.pmf_cap && tau > cfg.tau_cap {
        let pmf = exact_pmf_with(params, cfg)?;
        return Ok(StopProbability {
            value: pmf.cdf(tau),
            discarded_bound: ScaledFloat::from_f64(pmf.discarded_bound),
        });
    }
    exact_stop_cdf_with(params, tau, cfg)
}

/// `(P(S(t) + a ≤ t), P(S'(t) ≤ t))` with `S'(t) = S(t) + Bin(a, π(t))`.
pub fn auxiliary_tail(params: &ModelParams, t: u64) -> Result<(f64, f64)> {
    params.validate()?;
    let ModelParams { n, p, r, a } = *params;
    if t > n {
        return Err(Error::invalid(format!("t = {t} exceeds n = {n}")));
    }
    let pi = if p > 0.0 { activation_prob_int(t, p, r).pi } else { 0.0 };
    let event = if t < a { 0.0 } else { binom::cdf(n - a, t - a, pi) };
    // independent binomials with a common success probability add up
    let aux = binom::cdf(n, t, pi);
    Ok((event, aux))
}

/// Law of `S(t)` for the chain run without absorption.
pub fn unstopped_marginal(params: &ModelParams, t: u64) -> Result<Vec<f64>> {
    params.validate()?;
    let ModelParams { n, p, r, a } = *params;
    let m = n - a;
    let mut v = vec![0.0; m as usize + 1];
    v[0] = 1.0;
    for step in 1..=t {
        let q = hazard(step, p, r);
        let mut next = vec![0.0; v.len()];
        for (s, &w) in v.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (j, x) in binom::pmf_vec(m - s as u64, q).into_iter().enumerate() {
                next[s + j] += w * x;
            }
        }
        v = next;
    }
    Ok(v)
}

/// Largest `n` accepted by [`brute_force_pmf`].
pub const BRUTE_FORCE_MAX_N: u64 = 7;

/// Enumerates every graph on `n ≤ 7` labelled nodes.
///
/// Graphs are tallied by (final size, edge count) in exact integers, and
/// weighted by `p^e (1-p)^(m-e)` only at the end.
pub fn brute_force_pmf(params: &ModelParams) -> Result<FinalSizePmf> {
    params.validate()?;
    let ModelParams { n, p, r, a } = *params;
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::CapExceeded { n, cap: BRUTE_FORCE_MAX_N, what: "exhaustive enumeration" });
    }
    let nu = n as usize;
    let pairs: Vec<(usize, usize)> = (0..nu).flat_map(|i| ((i + 1)..nu).map(move |j| (i, j))).collect();
    let m = pairs.len();
    let mut tally = vec![vec![0u64; m + 1]; nu + 1];
    for mask in 0u32..(1u32 << m) {
        let mut nbr = [0u8; 8];
        for (bit, &(i, j)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                nbr[i] |= 1 << j;
                nbr[j] |= 1 << i;
            }
        }
        let mut active: u8 = ((1u16 << a) - 1) as u8;
        loop {
            let mut grown = active;
            for v in 0..nu {
                if active >> v & 1 == 0 && (nbr[v] & active).count_ones() >= r {
                    grown |= 1 << v;
                }
            }
            if grown == active {
                break;
            }
            active = grown;
        }
        tally[active.count_ones() as usize][mask.count_ones() as usize] += 1;
    }
    let probs = (a as usize..=nu)
        .map(|k| {
            let mut sum = ScaledFloat::ZERO;
            for (e, &count) in tally[k].iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let w = if p == 0.0 {
                    if e == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else if p == 1.0 {
                    if e == m {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (e as f64 * p.ln() + (m - e) as f64 * (-p).ln_1p()).exp()
                };
                sum += ScaledFloat::from_f64(count as f64 * w);
            }
            sum
        })
        .collect();
    Ok(FinalSizePmf { params: *params, probs, discarded_bound: 0.0 })
}

/// Truncation constant `K = max(α + r/(r-1) x0, 2) + 1` for early-stop
/// horizons `τ = ⌊K a_c⌋`.
pub fn default_k(alpha: f64, r: u32) -> Result<f64> {
    let x0 = crate::rate::minimize_rate(alpha, r, 1e-6)?.x0;
    let rf = r as f64;
    Ok((alpha + rf / (rf - 1.0) * x0).max(2.0) + 1.0)
}
