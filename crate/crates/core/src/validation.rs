//! Named validation suites with pass/fail reports.

use serde::{Deserialize, Serialize};

use crate::bounds::{
    approx_log_tail, approx_lower_tail, approx_small_mean_tail, asymptotic_diagnostics, chernoff_lower, chernoff_upper,
    heavy_tail_bound, Relation,
};
use crate::error::{Error, Result};
use crate::model::{LnCritical, ModelParams};
use crate::montecarlo::{
    chi_square_homogeneity, early_stop_study, estimate_tail, estimate_tail_splitting, histogram, lln_median,
    poisson_distance, tv_to_law, SplittingConfig,
};
use crate::oracle::{brute_force_pmf, exact_pmf, exact_stop_cdf};
use crate::process::{sample_activation_times, sample_graph, sample_markchain, RngSpec};
use crate::rate::{minimize_rate, rate_j, FRule, ScalingFamily};
use crate::sequence::{PRule, SequenceSpec};
use crate::trend::{approaches, TrendConfig};

pub const SUITES: [&str; 10] = [
    "oracle",
    "samplers",
    "bounds",
    "poisson",
    "lln",
    "early_stop",
    "minimizer",
    "asymptotics",
    "splitting",
    "determinism",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        SuiteReport { suite: suite.into(), passed: checks.iter().all(|c| c.passed), checks }
    }
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let checks = match name {
        "oracle" => oracle_suite()?,
        "samplers" => samplers_suite(seed)?,
        "bounds" => bounds_suite()?,
        "poisson" => poisson_suite(seed)?,
        "lln" => lln_suite(seed)?,
        "early_stop" => early_stop_suite()?,
        "minimizer" => minimizer_suite()?,
        "asymptotics" => asymptotics_suite()?,
        "splitting" => splitting_suite(seed)?,
        "determinism" => determinism_suite(seed)?,
        _ => return Err(Error::invalid(format!("unknown suite {name:?}; known: {}", SUITES.join(", ")))),
    };
    Ok(SuiteReport::new(name, checks))
}

/// `exact_pmf` against exhaustive enumeration, entrywise within 1e-9.
fn oracle_suite() -> Result<Vec<Check>> {
    let mut worst = 0.0f64;
    let mut configs = 0;
    for n in 1..=6u64 {
        for p in [0.1, 0.4, 0.7] {
            for r in [2u32, 3] {
                for a in [r as u64, r as u64 + 1] {
                    if a > n {
                        continue;
                    }
                    let params = ModelParams::new(n, p, r, a)?;
                    let dp = exact_pmf(&params)?;
                    let bf = brute_force_pmf(&params)?;
                    for k in a..=n {
                        worst = worst.max((dp.prob(k) - bf.prob(k)).abs());
                    }
                    configs += 1;
                }
            }
        }
    }
    Ok(vec![check(
        "exact_pmf == brute_force_pmf",
        worst <= 1e-9,
        format!("{configs} configs, max abs diff {worst:.3e}"),
    )])
}

pub const SAMPLER_REPLICATES: u64 = 1_000_000;

/// Each sampler's empirical pmf within TV 0.01 of enumeration, and a
/// three-way chi-square homogeneity test not rejecting at 1e-3.
fn samplers_suite(seed: u64) -> Result<Vec<Check>> {
    let params = ModelParams::new(6, 0.4, 2, 2)?;
    let bf = brute_force_pmf(&params)?;
    type Sampler = fn(&ModelParams, RngSpec) -> Result<crate::process::PercolationOutcome>;
    let samplers: [(&str, Sampler); 3] =
        [("graph", sample_graph), ("markchain", sample_markchain), ("activation_times", sample_activation_times)];
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (i, (name, sampler)) in samplers.iter().enumerate() {
        let base = RngSpec::new(seed, 0).derive(100 + i as u64);
        let sizes = (0..SAMPLER_REPLICATES)
            .map(|j| sampler(&params, RngSpec::new(base.seed, j)).map(|o| o.final_size))
            .collect::<Result<Vec<_>>>()?;
        let hist = histogram(&sizes);
        let tv = tv_to_law(&hist, SAMPLER_REPLICATES, |k| bf.prob(k));
        checks.push(check(format!("{name} TV <= 0.01"), tv <= 0.01, format!("TV {tv:.5}")));
        rows.push(hist);
    }
    let chi = chi_square_homogeneity(&rows)?;
    checks.push(check(
        "three-way chi-square p >= 1e-3",
        chi.p_value >= 1e-3,
        format!("statistic {:.3}, dof {}, p-value {:.4}", chi.statistic, chi.dof, chi.p_value),
    ));
    Ok(checks)
}

pub const BOUND_GRID_P: [f64; 9] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9];

/// The three deviation inequalities over `n ∈ 5..=200`, nine `p`, all
/// admissible `k`.
fn bounds_suite() -> Result<Vec<Check>> {
    let e2 = std::f64::consts::E.powi(2);
    let mut counts = [0usize; 3];
    let mut violations = [0usize; 3];
    let mut worst = [f64::INFINITY; 3];
    for n in 5..=200u64 {
        for &p in &BOUND_GRID_P {
            let mu = n as f64 * p;
            for k in 0..n {
                let kf = k as f64;
                let reports = [
                    (k > 0 && kf >= mu).then(|| chernoff_upper(n, p, k)),
                    (kf <= mu).then(|| chernoff_lower(n, p, k)),
                    (k > 0 && kf >= e2 * mu).then(|| heavy_tail_bound(n, p, k)),
                ];
                for (i, rep) in reports.into_iter().enumerate() {
                    if let Some(rep) = rep {
                        let rep = rep?;
                        counts[i] += 1;
                        worst[i] = worst[i].min(rep.slack());
                        if !rep.holds() {
                            violations[i] += 1;
                        }
                    }
                }
            }
        }
    }
    let names = ["chernoff upper", "chernoff lower", "heavy tail"];
    Ok((0..3)
        .map(|i| {
            check(
                format!("{} holds", names[i]),
                violations[i] == 0 && counts[i] > 0,
                format!("{} cases, {} violations, min slack {:.3e}", counts[i], violations[i], worst[i]),
            )
        })
        .collect())
}

pub const POISSON_REPLICATES: u64 = 100_000;

fn poisson_params() -> Result<ModelParams> {
    SequenceSpec::new(PRule::LogForm { d: -std::f64::consts::LN_2 }, 2, 2.0).params_at(5000)
}

/// `n - A*` against `Poisson(b_c)` at `n = 5000` on the `b_c → 2` sequence.
fn poisson_suite(seed: u64) -> Result<Vec<Check>> {
    let params = poisson_params()?;
    let d = poisson_distance(&params, POISSON_REPLICATES, RngSpec::new(seed, 0))?;
    let detail = format!(
        "n {}, p {:.6e}, a {}, b_c {:.6}, empirical mean {:.6}",
        params.n, params.p, params.a, d.b_c, d.empirical_mean
    );
    Ok(vec![
        check("TV(n - A*, Poisson(b_c)) <= 0.1", d.tv <= 0.1, format!("TV {:.5}; {detail}", d.tv)),
        check("relative mean gap <= 0.1", d.mean_gap <= 0.1, format!("gap {:.5}; {detail}", d.mean_gap)),
    ])
}

pub const LLN_REPLICATES: u64 = 1000;

/// Median of `(n - A*)/b_c` at `n = 1e5` for `p = ln n / (2n)`.
fn lln_suite(seed: u64) -> Result<Vec<Check>> {
    let params = SequenceSpec::new(PRule::ScaledLog { c: 0.5 }, 2, 2.0).params_at(100_000)?;
    let med = lln_median(&params, LLN_REPLICATES, RngSpec::new(seed, 0))?;
    Ok(vec![check(
        "median (n - A*)/b_c in [0.85, 1.15]",
        (0.85..=1.15).contains(&med),
        format!("median {med:.5}, b_c {:.4}, a {}", params.critical()?.b_c, params.a),
    )])
}

pub const EARLY_STOP_LADDER: [f64; 4] = [1e3, 1e4, 1e5, 1e6];

/// `(1/a_c) ln P(T ≤ ⌊K a_c⌋)` moving monotonically toward `-J(x0)`.
fn early_stop_suite() -> Result<Vec<Check>> {
    let spec = SequenceSpec::new(PRule::Power { c: 1.0, beta: 0.7 }, 2, 2.0);
    let rows = early_stop_study(&spec, None, &EARLY_STOP_LADDER)?;
    let target = rows[0].target;
    let norm: Vec<f64> = rows.iter().map(|r| r.normalized).collect();
    let last = norm[norm.len() - 1] / target;
    Ok(vec![
        check("monotone toward -J(x0)", approaches(&norm, target), format!("normalized {norm:?}, target {target:.6}")),
        check("last within factor [0.5, 1.5]", (0.5..=1.5).contains(&last), format!("ratio to target {last:.5}")),
    ])
}

/// Grid minimum of `J` on `[0, α/r]` with step `h`.
pub fn grid_minimum(alpha: f64, r: u32, h: f64) -> Result<(f64, f64)> {
    let top = alpha / r as f64;
    let steps = (top / h).floor() as u64;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..=steps {
        let x = i as f64 * h;
        let j = rate_j(x, alpha, r)?.1;
        if j < best.1 {
            best = (x, j);
        }
    }
    Ok(best)
}

fn minimizer_suite() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for alpha in [1.1, 1.5, 2.0, 5.0] {
        for r in [2u32, 3, 5] {
            let m = minimize_rate(alpha, r, 1e-9)?;
            let (gx, gj) = grid_minimum(alpha, r, 1e-6)?;
            let dx = (m.x0 - gx).abs();
            let dj = (m.j_x0 - gj).abs() / gj.abs();
            checks.push(check(
                format!("alpha {alpha}, r {r}"),
                dx <= 1e-4 && dj <= 1e-8,
                format!("x0 {:.8} vs grid {gx:.8}; J rel diff {dj:.3e}", m.x0),
            ));
        }
    }
    Ok(checks)
}

/// One ladder of `|ratio - 1|` values per asymptotic relation.
pub fn asymptotic_ladders() -> Result<Vec<(String, Vec<f64>, Vec<f64>)>> {
    let mut out = Vec::new();
    let dev = |r: f64| (r - 1.0).abs();

    let ladder = vec![1e4, 1e5, 1e6, 1e7];
    let d = ladder
        .iter()
        .map(|&m: &f64| Ok(dev(approx_small_mean_tail(m, m.powf(-1.5), 2)?.ratio)))
        .collect::<Result<Vec<_>>>()?;
    out.push(("small-mean binomial tail (k = 2, q = m^-1.5)".to_string(), ladder, d));

    let ladder = vec![1e4, 1e6, 1e8, 1e10];
    let d = ladder
        .iter()
        .map(|&n: &f64| Ok(dev(approx_log_tail(n, n.powi(-2), n.sqrt().ceil() as u64)?.ratio)))
        .collect::<Result<Vec<_>>>()?;
    out.push(("log binomial tail (m = n, q = n^-2, r = ceil(sqrt n))".to_string(), ladder, d));

    let ladder = vec![1e4, 1e6, 1e8, 1e10];
    let d = ladder
        .iter()
        .map(|&m: &f64| Ok(dev(approx_lower_tail(m, m.powf(-0.5), 2)?.ratio)))
        .collect::<Result<Vec<_>>>()?;
    out.push(("lower binomial tail (k = 2, q = m^-0.5)".to_string(), ladder, d));

    let cfg = TrendConfig::default();
    let s07 = SequenceSpec::new(PRule::Power { c: 1.0, beta: 0.7 }, 2, 2.0);
    let s06 = SequenceSpec::new(PRule::Power { c: 1.0, beta: 0.6 }, 2, 2.0);
    let rel = [
        ("speed (p = n^-0.7, r = 2, x = 1)", &s07, Relation::Speed { x: 1.0 }, vec![1e6, 1e8, 1e10, 1e12]),
        (
            "one minus pi (p = n^-0.6, r = 2, f = ln n)",
            &s06,
            Relation::OneMinusPi { f: FRule::LogPow { c: 1.0, k: 1.0 } },
            vec![1e3, 1e4, 1e5, 1e6],
        ),
        ("log b_c (p = n^-0.7, r = 2)", &s07, Relation::LogBc, vec![1e6, 1e8, 1e10, 1e12]),
    ];
    for (name, spec, relation, ladder) in rel {
        let table = asymptotic_diagnostics(spec, &relation, &ladder, &cfg)?;
        out.push((name.to_string(), ladder, table.deviations()));
    }
    Ok(out)
}

fn asymptotics_suite() -> Result<Vec<Check>> {
    Ok(asymptotic_ladders()?
        .into_iter()
        .map(|(name, ladder, d)| {
            let monotone = d.windows(2).all(|w| w[1] <= w[0]);
            let last = d[d.len() - 1];
            check(name, monotone && last <= 0.1, format!("ladder {ladder:?}, |ratio - 1| {d:?}"))
        })
        .collect())
}

pub const SPLITTING_TRIALS: u64 = 100;

fn splitting_params() -> Result<(ModelParams, u64)> {
    let n = 500u64;
    let p = (n as f64).powf(-0.7);
    let a_c = LnCritical::at(n as f64, p.ln(), 2).ln_a_c.exp();
    let params = ModelParams::new(n, p, 2, (2.0 * a_c).ceil() as u64)?;
    Ok((params, (3.0 * a_c).floor() as u64))
}

/// Coverage of the splitting interval over independently seeded trials.
fn splitting_suite(seed: u64) -> Result<Vec<Check>> {
    let (params, tau) = splitting_params()?;
    let exact = exact_stop_cdf(&params, tau)?.prob();
    let cfg = SplittingConfig::with_default_levels(&params, 4, 1000, 20);
    let base = RngSpec::new(seed, 0).derive(200);
    let mut covered = 0;
    for i in 0..SPLITTING_TRIALS {
        let e = estimate_tail_splitting(&params, tau, &cfg, RngSpec::new(base.seed, i))?;
        covered += e.contains(exact) as u64;
    }
    Ok(vec![check(
        "95% intervals cover the DP value in >= 90 of 100 trials",
        covered >= 90,
        format!("{covered}/{SPLITTING_TRIALS} (n {}, a {}, tau {tau}, exact {exact:.6e})", params.n, params.a),
    )])
}

/// Identical seeds give bit-identical estimates and sampler outputs.
fn determinism_suite(seed: u64) -> Result<Vec<Check>> {
    let params = ModelParams::new(60, 0.05, 2, 5)?;
    let fam = ScalingFamily::Const { ell: 1.0 };
    let e1 = estimate_tail(&params, &fam, 20.0, 2000, RngSpec::new(seed, 0))?;
    let e2 = estimate_tail(&params, &fam, 20.0, 2000, RngSpec::new(seed, 0))?;
    let cfg = SplittingConfig::with_default_levels(&params, 3, 200, 4);
    let s1 = estimate_tail_splitting(&params, 30, &cfg, RngSpec::new(seed, 1))?;
    let s2 = estimate_tail_splitting(&params, 30, &cfg, RngSpec::new(seed, 1))?;
    let g1 = sample_graph(&params, RngSpec::new(seed, 2))?;
    let g2 = sample_graph(&params, RngSpec::new(seed, 2))?;
    Ok(vec![
        check("naive estimate repeatable", e1 == e2, format!("p_hat {}", e1.p_hat)),
        check("splitting estimate repeatable", s1 == s2, format!("p_hat {}", s1.p_hat)),
        check("graph sampler repeatable", g1 == g2, format!("final size {}", g1.final_size)),
    ])
}
