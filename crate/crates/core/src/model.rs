//! Model parameters, the activation-time law and the critical quantities.

use serde::{Deserialize, Serialize};

use crate::binom::{self, ln_one_minus_exp, ln_pmf, ln_sum_exp};
use crate::error::{Error, Result};

/// One finite instance of bootstrap percolation on `G(n, p)` with threshold
/// `r` and `a` initially active seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u64,
    pub p: f64,
    pub r: u32,
    pub a: u64,
}

impl ModelParams {
    /// Validated constructor. `p` must lie in `(0, 1]`.
    pub fn new(n: u64, p: f64, r: u32, a: u64) -> Result<Self> {
        let params = ModelParams { n, p, r, a };
        params.validate()?;
        if p <= 0.0 {
            return Err(Error::invalid(format!("p = {p} must be in (0, 1]")));
        }
        Ok(params)
    }

    /// Like [`ModelParams::new`] but also admits the degenerate `p = 0`,
    /// which the samplers and oracles handle exactly.
    pub fn with_degenerate(n: u64, p: f64, r: u32, a: u64) -> Result<Self> {
        let params = ModelParams { n, p, r, a };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return Err(Error::invalid(format!("threshold r = {} must be at least 2", self.r)));
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if self.a < 1 || self.a > self.n {
            return Err(Error::invalid(format!("seed count a = {} must lie in 1..={}", self.a, self.n)));
        }
        if !(0.0..=1.0).contains(&self.p) || self.p.is_nan() {
            return Err(Error::invalid(format!("p = {} must be in [0, 1]", self.p)));
        }
        Ok(())
    }

    pub fn critical(&self) -> Result<CriticalQuantities> {
        critical_quantities(self)
    }
}

/// `π(t) = P(Bin(⌊t⌋, p) ≥ r)` together with its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationProb {
    pub pi: f64,
    pub one_minus_pi: f64,
}

fn check_p_r(p: f64, r: u32) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("p = {p} must be in (0, 1]")));
    }
    if r < 2 {
        return Err(Error::invalid(format!("threshold r = {r} must be at least 2")));
    }
    Ok(())
}

/// `ln(1 - π(t))` as the `r`-term sum `ln Σ_{j<r} P(Bin(t, p) = j)`.
///
/// Stays exact when `π(t)` rounds to one in double precision, so it can be
/// used for `n (1 - π(n - f))` at any `n`.
pub fn ln_one_minus_pi(t: u64, p: f64, r: u32) -> f64 {
    if p <= 0.0 || t < r as u64 {
        return 0.0;
    }
    let terms: Vec<f64> = (0..r as u64).map(|j| ln_pmf(t, j, p)).collect();
    ln_sum_exp(&terms).min(0.0)
}

/// `ln π(t)`.
pub fn ln_pi(t: u64, p: f64, r: u32) -> f64 {
    if p <= 0.0 || t < r as u64 {
        return f64::NEG_INFINITY;
    }
    let ln_c = ln_one_minus_pi(t, p, r);
    if ln_c < -std::f64::consts::LN_2 {
        ln_one_minus_exp(ln_c)
    } else {
        binom::ln_sf(t, r as u64, p)
    }
}

/// Activation probability of a fixed non-seed node by (real) time `t`.
///
/// The complement is always the direct `r`-term sum; `π` itself is taken as
/// `1 - complement` once the complement drops below one half, otherwise it is
/// summed directly from the upper tail.
pub fn activation_prob(t: f64, p: f64, r: u32) -> Result<ActivationProb> {
    check_p_r(p, r)?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::invalid(format!("time t = {t} must be nonnegative")));
    }
    let t = t.floor();
    if t >= u64::MAX as f64 {
        return Err(Error::invalid("time too large"));
    }
    Ok(activation_prob_int(t as u64, p, r))
}

pub(crate) fn activation_prob_int(t: u64, p: f64, r: u32) -> ActivationProb {
    if t < r as u64 {
        return ActivationProb { pi: 0.0, one_minus_pi: 1.0 };
    }
    let ln_c = ln_one_minus_pi(t, p, r);
    let one_minus_pi = ln_c.exp();
    let pi = if one_minus_pi < 0.5 { -ln_c.exp_m1() } else { binom::ln_sf(t, r as u64, p).exp() };
    ActivationProb { pi, one_minus_pi }
}

/// Conditional activation hazard `P(Y = t | Y > t - 1)` for `t ≥ 1`.
///
/// Written as `p P(Bin(t-1, p) = r-1) / P(Bin(t-1, p) ≤ r-1)`, which is the
/// same quantity as `(π(t) - π(t-1)) / (1 - π(t-1))` without the
/// cancellation of the difference form.
pub(crate) fn hazard(t: u64, p: f64, r: u32) -> f64 {
    debug_assert!(t >= 1);
    if p <= 0.0 {
        return 0.0;
    }
    let r = r as u64;
    if t < r {
        return 0.0;
    }
    if p >= 1.0 {
        // every node activates exactly at t = r; later hazards act on nobody
        return 1.0;
    }
    let num = p.ln() + ln_pmf(t - 1, r - 1, p);
    let den = ln_one_minus_pi(t - 1, p, r as u32);
    (num - den).exp()
}

/// Critical time, critical seed count and the two Poisson-regime parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalQuantities {
    pub t_c: f64,
    pub a_c: f64,
    pub b_c: f64,
    pub b_c_prime: f64,
}

/// Natural logarithms of the critical quantities; finite far beyond the
/// range where the quantities themselves overflow or underflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LnCritical {
    pub ln_t_c: f64,
    pub ln_a_c: f64,
    pub ln_b_c: f64,
    pub ln_b_c_prime: f64,
}

impl LnCritical {
    /// Evaluates at real `n` and `ln p`, so sequences can be followed to
    /// `n = 10^250` without forming `p^r`.
    pub fn at(n: f64, ln_p: f64, r: u32) -> Self {
        let rf = r as f64;
        let ln_n = n.ln();
        let ln_fact = binom::ln_factorial(r as u64 - 1);
        let ln_t_c = (ln_fact - ln_n - rf * ln_p) / (rf - 1.0);
        let ln_a_c = (1.0 - 1.0 / rf).ln() + ln_t_c;
        let ln_np = ln_n + ln_p;
        let np = ln_np.exp();
        let ln_b_c = ln_n + (rf - 1.0) * ln_np - ln_fact - np;
        let ln_b_c_prime = ln_n + (rf - 1.0) * ln_np - ln_fact + n * (-ln_p.exp()).ln_1p();
        LnCritical { ln_t_c, ln_a_c, ln_b_c, ln_b_c_prime }
    }
}

pub fn critical_quantities(params: &ModelParams) -> Result<CriticalQuantities> {
    params.validate()?;
    check_p_r(params.p, params.r)?;
    let l = LnCritical::at(params.n as f64, params.p.ln(), params.r);
    let t_c = l.ln_t_c.exp();
    // a_c is derived from t_c, so the identity holds bit for bit
    let a_c = (1.0 - 1.0 / params.r as f64) * t_c;
    Ok(CriticalQuantities { t_c, a_c, b_c: l.ln_b_c.exp(), b_c_prime: l.ln_b_c_prime.exp() })
}

/// Mean number of active but unused nodes, `e(t) = a + (n - a) π(t) - t`.
pub fn mean_usable_curve(params: &ModelParams, t_grid: &[u64]) -> Result<Vec<(u64, f64)>> {
    params.validate()?;
    check_p_r(params.p, params.r)?;
    t_grid
        .iter()
        .map(|&t| {
            if t > params.n {
                return Err(Error::invalid(format!("grid time {t} exceeds n = {}", params.n)));
            }
            let pi = activation_prob_int(t, params.p, params.r).pi;
            Ok((t, params.a as f64 + (params.n - params.a) as f64 * pi - t as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct summation of binomial point masses, `P(Bin(t,p) ≥ r)`.
    fn pi_by_summation(t: u64, p: f64, r: u32) -> f64 {
        let mut s = 0.0;
        let mut c = 1.0f64; // C(t, j)
        for j in 0..=t {
            if j >= r as u64 {
                s += c * p.powi(j as i32) * (1.0 - p).powi((t - j) as i32);
            }
            c = c * (t - j) as f64 / (j + 1) as f64;
        }
        s
    }

    #[test]
    fn activation_examples() {
        let a = activation_prob(2.0, 0.5, 2).unwrap();
        assert!((a.pi - pi_by_summation(2, 0.5, 2)).abs() < 1e-15);
        assert!((a.pi - 0.25).abs() < 1e-15);
        assert_eq!(activation_prob(1.0, 0.9, 2).unwrap().pi, 0.0);
        assert_eq!(activation_prob(0.0, 0.3, 2).unwrap().pi, 0.0);
        // real times are floored
        assert_eq!(activation_prob(2.9, 0.5, 2).unwrap(), a);
    }

    #[test]
    fn activation_rejects_bad_inputs() {
        assert!(activation_prob(3.0, 0.0, 2).is_err());
        assert!(activation_prob(3.0, 1.5, 2).is_err());
        assert!(activation_prob(3.0, 0.5, 1).is_err());
        assert!(activation_prob(-1.0, 0.5, 2).is_err());
    }

    #[test]
    fn complement_keeps_relative_precision() {
        // t p = 1000: 1 - π ≈ e^{-1000} (1 + 1000), far below double epsilon
        let l = ln_one_minus_pi(1_000_000, 1e-3, 2);
        let expect = 1_000_000.0 * (-1e-3f64).ln_1p() + (1.0f64 + 1e6 * 1e-3 / (1.0 - 1e-3)).ln();
        assert!((l - expect).abs() < 1e-9 * expect.abs());
        let a = activation_prob_int(1_000_000, 1e-3, 2);
        assert_eq!(a.pi, 1.0);
    }

    #[test]
    fn critical_examples() {
        let params = ModelParams::new(10_000, 1e-3, 2, 1).unwrap();
        let c = critical_quantities(&params).unwrap();
        assert!((c.t_c - 100.0).abs() < 1e-9);
        assert!((c.a_c - 50.0).abs() < 1e-9);
        let b = 1e5 * (-10.0f64).exp();
        assert!((c.b_c - b).abs() < 1e-9 * b);
        assert!((c.b_c - 4.539_992_976).abs() < 1e-8);
        assert!(c.b_c_prime < c.b_c);
        assert_eq!(c.a_c, (1.0 - 0.5) * c.t_c);
    }

    #[test]
    fn t_c_closed_form_r2() {
        for &(n, p) in &[(1000u64, 0.01), (12345, 3e-4), (10, 0.9)] {
            let c = critical_quantities(&ModelParams::new(n, p, 2, 1).unwrap()).unwrap();
            let expect = 1.0 / (n as f64 * p * p);
            assert!((c.t_c - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn hazard_matches_difference_form() {
        let (p, r) = (0.3, 3);
        for t in 1..40u64 {
            let a = activation_prob_int(t, p, r);
            let b = activation_prob_int(t - 1, p, r);
            let q = (a.pi - b.pi) / b.one_minus_pi;
            assert!((hazard(t, p, r) - q).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn usable_curve() {
        let params = ModelParams::new(10_000, 1e-3, 2, 100).unwrap();
        let curve = mean_usable_curve(&params, &[0, 50, 10_000]).unwrap();
        assert_eq!(curve[0], (0, 100.0));
        let pi50 = pi_by_summation(50, 1e-3, 2);
        assert!((curve[1].1 - (100.0 + 9900.0 * pi50 - 50.0)).abs() < 1e-9);
        // π(n) rounds to one, so everybody is active and used at t = n
        let params = ModelParams::new(10_000, 0.05, 2, 100).unwrap();
        let curve = mean_usable_curve(&params, &[10_000]).unwrap();
        assert!(curve[0].1.abs() < 1e-9);
        assert!(mean_usable_curve(&params, &[10_001]).is_err());
    }

    proptest! {
        #[test]
        fn pi_monotone_in_t(t in 0u64..5000, dt in 0u64..5000, lp in -6.0f64..-0.05, r in 2u32..7) {
            let p = 10f64.powf(lp);
            let a = activation_prob_int(t, p, r).pi;
            let b = activation_prob_int(t + dt, p, r).pi;
            prop_assert!(a <= b + 1e-15);
        }

        #[test]
        fn pi_plus_complement_is_one(lt in 0.0f64..6.0, lp in -6.0f64..-0.046, r in 2u32..7) {
            let t = 10f64.powf(lt).floor() as u64;
            let p = 10f64.powf(lp);
            let a = activation_prob_int(t, p, r);
            prop_assert!((a.pi + a.one_minus_pi - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn pi_zero_below_threshold_and_to_one() {
        for r in 2..6u32 {
            for t in 0..r as u64 {
                assert_eq!(activation_prob_int(t, 0.7, r).pi, 0.0);
            }
        }
        assert!(activation_prob_int(100_000, 0.01, 3).pi > 1.0 - 1e-12);
    }
}
