//! Binomial probabilities in log space.
//!
//! Point masses use the saddle-point decomposition (Stirling remainder plus
//! the deviance term `bd0`), which keeps full relative precision for `n` far
//! beyond the range where `ln C(n, k)` could be formed by subtracting
//! log-factorials. Tails are summed from the smaller side with a ratio
//! recurrence and compensated summation; no incomplete-beta routine is used.

use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Stirling remainder `ln n! - ln(sqrt(2πn) (n/e)^n)` at integers 1..=15.
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_219_670_2,
    0.041_340_695_955_409_294_093_822_1,
    0.027_677_925_684_998_339_148_789_29,
    0.020_790_672_103_765_093_111_522_77,
    0.016_644_691_189_821_192_163_194_87,
    0.013_876_128_823_070_747_998_745_73,
    0.011_896_709_945_891_770_095_055_72,
    0.010_411_265_261_972_096_497_478_567,
    0.009_255_462_182_712_732_917_728_637,
    0.008_330_563_433_362_871_256_469_318,
    0.007_573_675_487_951_840_794_972_024,
    0.006_942_840_107_209_529_865_664_152,
    0.006_408_994_188_004_207_068_439_631,
    0.005_951_370_112_758_847_735_624_416,
    0.005_554_733_551_962_801_371_038_690,
];

pub(crate) fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 && n.fract() == 0.0 {
        return STIRLERR_TABLE[n as usize];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance `x ln(x/m) + m - x`, accurate when `x ≈ m`.
pub(crate) fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln k!`.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    let x = k as f64;
    stirlerr(x) + (x + 0.5) * x.ln() - x + LN_SQRT_2PI
}

/// `ln P(Bin(n, p) = k)`; `-∞` outside the support.
pub fn ln_pmf(n: u64, k: u64, p: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p >= 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    let q = 1.0 - p;
    if k == 0 {
        return nf * (-p).ln_1p();
    }
    if k == n {
        return nf * p.ln();
    }
    let kf = k as f64;
    let lc = stirlerr(nf) - stirlerr(kf) - stirlerr(nf - kf) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = (2.0 * PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// Compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub(crate) fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// `ln Σ_{j ≥ k} P(X = j)` by summing upward; caller guarantees `k ≥ 1`,
/// `k ≤ n` and `0 < p < 1`.
fn ln_sum_up(n: u64, k: u64, p: f64) -> f64 {
    let lead = ln_pmf(n, k, p);
    if lead == f64::NEG_INFINITY {
        return lead;
    }
    let odds = p / (1.0 - p);
    let mut acc = Kahan::default();
    acc.add(1.0);
    let mut term = 1.0;
    let mut j = k;
    while j < n {
        let ratio = (n - j) as f64 / (j + 1) as f64 * odds;
        term *= ratio;
        acc.add(term);
        j += 1;
        if ratio < 1.0 && term < acc.value() * 1e-17 {
            break;
        }
    }
    lead + acc.value().ln()
}

/// `ln Σ_{j ≤ k} P(X = j)` by summing downward; caller guarantees `k < n`
/// and `0 < p < 1`.
fn ln_sum_down(n: u64, k: u64, p: f64) -> f64 {
    let lead = ln_pmf(n, k, p);
    if lead == f64::NEG_INFINITY {
        return lead;
    }
    let inv_odds = (1.0 - p) / p;
    let mut acc = Kahan::default();
    acc.add(1.0);
    let mut term = 1.0;
    let mut j = k;
    while j > 0 {
        let ratio = j as f64 / (n - j + 1) as f64 * inv_odds;
        term *= ratio;
        acc.add(term);
        j -= 1;
        if ratio < 1.0 && term < acc.value() * 1e-17 {
            break;
        }
    }
    lead + acc.value().ln()
}

/// `ln(1 - e^x)` for `x ≤ 0`.
pub(crate) fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln P(Bin(n, p) ≥ k)`.
pub fn ln_sf(n: u64, k: u64, p: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > n || p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return 0.0;
    }
    if k as f64 > n as f64 * p {
        ln_sum_up(n, k, p)
    } else {
        ln_one_minus_exp(ln_sum_down(n, k - 1, p))
    }
}

/// `ln P(Bin(n, p) ≤ k)`.
pub fn ln_cdf(n: u64, k: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if (k as f64) < n as f64 * p {
        ln_sum_down(n, k, p)
    } else {
        ln_one_minus_exp(ln_sum_up(n, k + 1, p))
    }
}

pub fn sf(n: u64, k: u64, p: f64) -> f64 {
    ln_sf(n, k, p).exp()
}

pub fn cdf(n: u64, k: u64, p: f64) -> f64 {
    ln_cdf(n, k, p).exp()
}

pub(crate) fn ln_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut acc = Kahan::default();
    for &t in terms {
        acc.add((t - m).exp());
    }
    m + acc.value().ln()
}

/// Full pmf of `Bin(n, p)` as a vector of length `n + 1`.
pub fn pmf_vec(n: u64, p: f64) -> Vec<f64> {
    (0..=n).map(|k| ln_pmf(n, k, p).exp()).collect()
}

/// A window of binomial probabilities `P(X = lo + i) = exp(ln_scale) * rel[i]`.
///
/// Produced outward from `min(mode, max_k)` and cut where terms fall below
/// `rel_cut` times the starting term. Values above `max_k` are never
/// produced; they are not counted as dropped.
#[derive(Debug, Clone)]
pub(crate) struct PmfWindow {
    pub lo: u64,
    pub ln_scale: f64,
    pub rel: Vec<f64>,
    /// Upper bound on the cut-off mass, in units of `exp(ln_scale)`.
    pub dropped_rel: f64,
}

pub(crate) fn pmf_window(n: u64, p: f64, rel_cut: f64, max_k: u64) -> PmfWindow {
    let point = |k: u64| PmfWindow { lo: k, ln_scale: 0.0, rel: vec![1.0], dropped_rel: 0.0 };
    if p <= 0.0 || n == 0 {
        return point(0);
    }
    if p >= 1.0 {
        if n > max_k {
            return PmfWindow { lo: 0, ln_scale: f64::NEG_INFINITY, rel: Vec::new(), dropped_rel: 0.0 };
        }
        return point(n);
    }
    let mode = (((n + 1) as f64 * p).floor() as u64).min(n);
    let start = mode.min(max_k);
    let odds = p / (1.0 - p);
    let ln_scale = ln_pmf(n, start, p);

    let mut down = Vec::new();
    let mut dropped_rel = 0.0;
    let mut term = 1.0;
    let mut j = start;
    while j > 0 {
        term *= j as f64 / ((n - j + 1) as f64 * odds);
        j -= 1;
        if term < rel_cut {
            // decreasing below the mode: indices 0..=j are each below `term`
            dropped_rel += term * (j + 1) as f64;
            break;
        }
        down.push(term);
    }
    let lo = start - down.len() as u64;
    down.reverse();
    let mut rel = down;
    rel.push(1.0);

    term = 1.0;
    let mut j = start;
    let top = n.min(max_k);
    while j < top {
        term *= (n - j) as f64 / (j + 1) as f64 * odds;
        j += 1;
        if term < rel_cut {
            dropped_rel += term * (top - j + 1) as f64;
            break;
        }
        rel.push(term);
    }
    PmfWindow { lo, ln_scale, rel, dropped_rel }
}
