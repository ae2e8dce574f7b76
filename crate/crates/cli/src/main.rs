//! `bootperc`: command-line front end for bootstrap percolation on `G(n, p)`.

mod opts;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use bootperc::montecarlo::{
    early_stop_study, estimate_tail, estimate_tail_splitting, histogram, rate_convergence_study, write_study_csv,
    TailEstimate,
};
use bootperc::oracle::{exact_tail_query, tail_threshold};
use bootperc::process::{sample_activation_times, sample_graph, sample_markchain};
use bootperc::rate::rate_j;
use bootperc::validation::{run_suite, SUITES};
use bootperc::{
    classify_regime, critical_quantities, exact_pmf, exact_stop_cdf, minimize_rate, tail_exponent, LnCritical,
    ModelParams, RngSpec, SplittingConfig, StudyMethod, TrendConfig, DEFAULT_LADDER,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use opts::{need, Opts};
use output::{config_echo, emit, num, Doc};

#[derive(Parser)]
#[command(
    name = "bootperc",
    version,
    about = "Bootstrap percolation on G(n,p): exact laws, simulation and tail predictions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Critical time t_c, critical seed count a_c and b_c, b_c'
    Critical(Opts),
    /// Classify the regime of a sequence spec along a ladder of n
    Regime(Opts),
    /// Minimizer x0 of the early-stop rate J and optionally the J curve
    Rate(RateArgs),
    /// Histogram of the final active-set size
    Simulate(SimulateArgs),
    /// Exact law of the final size, or P(T <= tau) with --truncate
    Exact(Opts),
    /// Tail predictions, estimates and convergence studies
    #[command(subcommand)]
    Tail(TailCmd),
    /// Run validation suites
    Validate(ValidateArgs),
}

#[derive(Subcommand)]
enum TailCmd {
    /// Predicted log-probability of (n - A*)/f(n) > eps
    Predict(Opts),
    /// Monte Carlo estimate of P((n - A*)/f(n) > eps)
    Estimate(EstimateArgs),
    /// Normalized log-probabilities along --ladder
    Study(StudyArgs),
}

#[derive(Args, Serialize)]
struct RateArgs {
    #[command(flatten)]
    #[serde(skip)]
    opts: Opts,
    /// Write (x, h(x), J(x)) on a uniform grid to this CSV file
    #[arg(long)]
    #[serde(skip)]
    curve: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Right end of the curve grid; defaults to 2 alpha / r
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    x_max: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Sampler {
    Graph,
    Markchain,
    Activation,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(skip)]
    opts: Opts,
    #[arg(long, value_enum, default_value_t = Sampler::Markchain)]
    sampler: Sampler,
}

#[derive(Args, Serialize)]
struct SplitArgs {
    /// Number of splitting levels
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Chains per level in each batch
    #[arg(long, default_value_t = 1000)]
    per_level: usize,
    #[arg(long, default_value_t = 20)]
    batches: usize,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum EstimateMethod {
    Naive,
    Splitting,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    #[command(flatten)]
    #[serde(skip)]
    opts: Opts,
    #[arg(long, value_enum, default_value_t = EstimateMethod::Naive)]
    method: EstimateMethod,
    #[command(flatten)]
    #[serde(flatten)]
    split: SplitArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum StudyKind {
    Exact,
    EarlyStop,
    Naive,
    Splitting,
}

#[derive(Args, Serialize)]
struct StudyArgs {
    #[command(flatten)]
    #[serde(skip)]
    opts: Opts,
    #[arg(long, value_enum, default_value_t = StudyKind::Exact)]
    method: StudyKind,
    /// Early-stop horizon multiplier K; default max(alpha + r x0/(r-1), 2) + 1
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    split: SplitArgs,
}

#[derive(Args, Serialize)]
struct ValidateArgs {
    #[command(flatten)]
    #[serde(skip)]
    opts: Opts,
    /// List the suite names and exit
    #[arg(long)]
    list: bool,
}

const DEFAULT_REPLICATES: u64 = 10_000;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<bootperc::Error>() {
        Some(bootperc::Error::NumericalDegeneracy(_)) => 4,
        Some(err) if err.is_model_refusal() => 3,
        _ => 2,
    }
}

fn run(cmd: Cmd) -> Result<ExitCode> {
    let (doc, config, opts, code) = match cmd {
        Cmd::Critical(o) => finish("critical", o, Value::Null, critical)?,
        Cmd::Regime(o) => finish("regime", o, Value::Null, regime)?,
        Cmd::Rate(args) => {
            let extra = serde_json::to_value(&args)?;
            finish("rate", args.opts.clone(), extra, |o| rate(o, &args))?
        }
        Cmd::Simulate(args) => {
            let extra = serde_json::to_value(&args)?;
            finish("simulate", args.opts.clone(), extra, |o| simulate(o, args.sampler))?
        }
        Cmd::Exact(o) => finish("exact", o, Value::Null, exact)?,
        Cmd::Tail(TailCmd::Predict(o)) => finish("tail predict", o, Value::Null, predict)?,
        Cmd::Tail(TailCmd::Estimate(args)) => {
            let extra = serde_json::to_value(&args)?;
            finish("tail estimate", args.opts.clone(), extra, |o| estimate(o, &args))?
        }
        Cmd::Tail(TailCmd::Study(args)) => {
            let extra = serde_json::to_value(&args)?;
            finish("tail study", args.opts.clone(), extra, |o| study(o, &args))?
        }
        Cmd::Validate(args) => {
            let extra = serde_json::to_value(&args)?;
            finish("validate", args.opts.clone(), extra, |o| validate(o, args.list))?
        }
    };
    emit(&doc, &config, &opts)?;
    Ok(code)
}

type Finished = (Doc, Value, Opts, ExitCode);

fn finish(
    name: &'static str,
    opts: Opts,
    extra: Value,
    f: impl FnOnce(&Opts) -> Result<(Doc, ExitCode)>,
) -> Result<Finished> {
    let mut opts = opts.resolve()?;
    opts.seed.get_or_insert(opts::DEFAULT_SEED);
    let mut extra = extra;
    if opts.spec.is_some() {
        let spec = opts.sequence()?;
        if let Value::Object(m) = &mut extra {
            m.insert("sequence".into(), serde_json::to_value(spec)?);
        } else {
            extra = json!({ "sequence": spec });
        }
    }
    let (doc, code) = f(&opts)?;
    let config = config_echo(name, &opts, extra);
    Ok((doc, config, opts, code))
}

fn ok(doc: Doc) -> Result<(Doc, ExitCode)> {
    Ok((doc, ExitCode::SUCCESS))
}

fn critical(o: &Opts) -> Result<(Doc, ExitCode)> {
    let n = o.n_u64()?;
    let params = ModelParams::new(n, need(o.p, "p")?, need(o.r, "r")?, o.a.unwrap_or(1).min(n))?;
    let cq = critical_quantities(&params)?;
    let ln = LnCritical::at(n as f64, params.p.ln(), params.r);
    let mut doc = Doc::table(
        &["t_c", "a_c", "b_c", "b_c_prime", "ln_t_c", "ln_a_c", "ln_b_c", "ln_b_c_prime"],
        vec![vec![
            num(cq.t_c),
            num(cq.a_c),
            num(cq.b_c),
            num(cq.b_c_prime),
            num(ln.ln_t_c),
            num(ln.ln_a_c),
            num(ln.ln_b_c),
            num(ln.ln_b_c_prime),
        ]],
        json!({ "critical": cq, "ln": ln }),
    );
    if let Some(a) = o.a {
        doc = doc.note("alpha", num(a as f64 / cq.a_c));
    }
    ok(doc)
}

fn regime(o: &Opts) -> Result<(Doc, ExitCode)> {
    let spec = o.sequence()?;
    let ladder = o.ladder.clone().unwrap_or(DEFAULT_LADDER.to_vec());
    let regime = classify_regime(&spec, &ladder, &TrendConfig::default())?;
    let mut rows = Vec::new();
    let mut jrows = Vec::new();
    for &n in &ladder {
        let ln_p = spec.ln_p(n)?;
        let c = spec.critical_ln(n)?;
        let ln_acnp = c.ln_a_c - n.ln() - ln_p;
        rows.push(vec![num(n), num(ln_p), num(c.ln_a_c), num(c.ln_b_c), num(ln_acnp)]);
        jrows.push(json!({ "n": n, "ln_p": ln_p, "ln_a_c": c.ln_a_c, "ln_b_c": c.ln_b_c, "ln_ac_over_np": ln_acnp }));
    }
    let doc = Doc::table(
        &["n", "ln_p", "ln_a_c", "ln_b_c", "ln_ac_over_np"],
        rows,
        json!({ "regime": regime, "label": regime.label(), "ladder": jrows }),
    );
    ok(doc.note("regime", regime.label()))
}

fn rate(o: &Opts, args: &RateArgs) -> Result<(Doc, ExitCode)> {
    let (alpha, r) = (need(o.alpha, "alpha")?, need(o.r, "r")?);
    let m = minimize_rate(alpha, r, 1e-10)?;
    if let Some(path) = &args.curve {
        if args.points < 2 {
            bail!("--points must be at least 2");
        }
        let x_max = args.x_max.unwrap_or(2.0 * alpha / r as f64);
        if !(x_max > 0.0 && x_max.is_finite()) {
            bail!("--x-max must be positive");
        }
        let mut rows = Vec::with_capacity(args.points);
        for i in 0..args.points {
            let x = x_max * i as f64 / (args.points - 1) as f64;
            let (h, j) = rate_j(x, alpha, r)?;
            rows.push(vec![num(x), num(h), num(j)]);
        }
        let curve = Doc::table(&["x", "h", "J"], rows, Value::Null);
        let echo = config_echo("rate curve", o, json!({ "points": args.points, "x_max": x_max }));
        let curve_opts = Opts { out: Some(path.clone()), format: None, ..Opts::default() };
        emit(&curve, &echo, &curve_opts)?;
    }
    ok(Doc::table(
        &["alpha", "r", "x0", "j_x0"],
        vec![vec![num(alpha), r.to_string(), num(m.x0), num(m.j_x0)]],
        json!({ "alpha": alpha, "r": r, "minimum": m }),
    ))
}

fn simulate(o: &Opts, sampler: Sampler) -> Result<(Doc, ExitCode)> {
    let params = o.params()?;
    let reps = o.replicates.unwrap_or(DEFAULT_REPLICATES);
    if reps == 0 {
        bail!("--replicates must be positive");
    }
    let f = match sampler {
        Sampler::Graph => sample_graph,
        Sampler::Markchain => sample_markchain,
        Sampler::Activation => sample_activation_times,
    };
    let seed = o.seed();
    let sizes = (0..reps).map(|i| Ok(f(&params, RngSpec::new(seed, i))?.final_size)).collect::<Result<Vec<u64>>>()?;
    let hist = histogram(&sizes);
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for (k, &c) in hist.iter().enumerate().filter(|(_, &c)| c > 0) {
        rows.push(vec![k.to_string(), c.to_string(), num(c as f64 / reps as f64)]);
        counts.push(json!([k, c]));
    }
    let mean = sizes.iter().map(|&s| s as f64).sum::<f64>() / reps as f64;
    let doc = Doc::table(&["k", "count", "freq"], rows, json!({ "replicates": reps, "mean": mean, "counts": counts }));
    ok(doc.note("mean", num(mean)))
}

fn exact(o: &Opts) -> Result<(Doc, ExitCode)> {
    let params = o.params()?;
    if let Some(tau) = o.truncate {
        let st = exact_stop_cdf(&params, tau)?;
        return ok(Doc::table(
            &["tau", "prob", "ln_prob", "log2_prob", "discarded_bound"],
            vec![vec![
                tau.to_string(),
                num(st.prob()),
                num(st.ln()),
                num(st.value.log2()),
                num(st.discarded_bound.to_f64()),
            ]],
            json!({ "tau": tau, "prob": st.prob(), "ln_prob": fin(st.ln()), "log2_prob": fin(st.value.log2()),
                    "discarded_bound": st.discarded_bound.to_f64() }),
        ));
    }
    let pmf = exact_pmf(&params)?;
    let mut body = Vec::new();
    pmf.write_csv(&mut body)?;
    ok(Doc::raw(body, pmf.to_json()).note("total", num(pmf.total())))
}

/// JSON value for a float that may be infinite.
fn fin(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(format!("{x}"))
    }
}

fn predict(o: &Opts) -> Result<(Doc, ExitCode)> {
    let spec = o.sequence()?;
    let n = need(o.n, "n")?;
    let family = o.family()?;
    let eps = need(o.eps, "eps")?;
    let ladder = o.ladder.clone().unwrap_or(DEFAULT_LADDER.to_vec());
    let te = tail_exponent(&spec, n, &family, eps, &ladder, &TrendConfig::default())?;
    let row = vec![
        num(te.n),
        num(te.eps),
        te.regime.label(),
        te.family.to_string(),
        num(te.f_at_n),
        num(te.speed_at_n),
        num(te.rate_at_eps.to_f64()),
        num(te.log_prob_prediction),
        te.table_row.clone(),
        num(te.x0),
        num(te.j_x0),
    ];
    let header = [
        "n",
        "eps",
        "regime",
        "family",
        "f_at_n",
        "speed_at_n",
        "rate_at_eps",
        "log_prob_prediction",
        "table_row",
        "x0",
        "j_x0",
    ];
    ok(Doc::table(&header, vec![row], serde_json::to_value(&te)?))
}

fn estimate(o: &Opts, args: &EstimateArgs) -> Result<(Doc, ExitCode)> {
    let params = match &o.spec {
        Some(_) => o.sequence()?.params_at(o.n_u64()?)?,
        None => o.params()?,
    };
    let family = o.family()?;
    let eps = need(o.eps, "eps")?;
    let seed = o.seed();
    let est: TailEstimate = match args.method {
        EstimateMethod::Naive => {
            estimate_tail(&params, &family, eps, o.replicates.unwrap_or(DEFAULT_REPLICATES), RngSpec::new(seed, 0))?
        }
        EstimateMethod::Splitting => {
            let f = family.ln_f_params(&params)?.exp();
            let Some(tau) = tail_threshold(params.n, f, eps) else {
                bail!("eps f(n) = {} leaves no admissible stop time", eps * f);
            };
            let cfg = SplittingConfig::with_default_levels(
                &params,
                args.split.levels,
                args.split.per_level,
                args.split.batches,
            );
            estimate_tail_splitting(&params, tau, &cfg, RngSpec::new(seed, 0))?
        }
    };
    if est.p_hat == 0.0 && matches!(args.method, EstimateMethod::Naive) {
        eprintln!("note: no replicate hit the event; try --method splitting");
    }
    let exact = exact_tail_query(&params, &family, eps).ok().map(|s| s.prob());
    let row = vec![
        num(est.p_hat),
        num(est.ci_low),
        num(est.ci_high),
        num(est.log_p_hat),
        num(est.log_ci_low),
        num(est.log_ci_high),
        est.replicates.to_string(),
        exact.map(num).unwrap_or_default(),
    ];
    let header = ["p_hat", "ci_low", "ci_high", "log_p_hat", "log_ci_low", "log_ci_high", "replicates", "exact"];
    let json = json!({ "estimate": est, "params": params, "exact": exact });
    ok(Doc::table(&header, vec![row], json))
}

fn study(o: &Opts, args: &StudyArgs) -> Result<(Doc, ExitCode)> {
    let spec = o.sequence()?;
    let ladder = o.ladder.clone().ok_or_else(|| anyhow::anyhow!("--ladder is required"))?;
    let rows = match args.method {
        StudyKind::EarlyStop => early_stop_study(&spec, args.k, &ladder)?,
        kind => {
            let method = match kind {
                StudyKind::Exact => StudyMethod::ExactDp,
                StudyKind::Naive => {
                    StudyMethod::Naive { replicates: o.replicates.unwrap_or(DEFAULT_REPLICATES), seed: o.seed() }
                }
                _ => StudyMethod::Splitting {
                    levels: args.split.levels,
                    per_level: args.split.per_level,
                    batches: args.split.batches,
                    seed: o.seed(),
                },
            };
            rate_convergence_study(&spec, &o.family()?, need(o.eps, "eps")?, &ladder, &method, None)?
        }
    };
    if rows.iter().any(|r| r.p_hat == 0.0) && matches!(args.method, StudyKind::Naive) {
        eprintln!("note: rows with p_hat = 0 carry log_p = -inf; try --method splitting");
    }
    let mut body = Vec::new();
    write_study_csv(&rows, &mut body)?;
    ok(Doc::raw(body, serde_json::to_value(&rows)?))
}

fn validate(o: &Opts, list: bool) -> Result<(Doc, ExitCode)> {
    if list {
        let rows = SUITES.iter().map(|s| vec![s.to_string()]).collect();
        return ok(Doc::table(&["suite"], rows, json!(SUITES)));
    }
    let suite = o.suite.as_deref().ok_or_else(|| anyhow::anyhow!("--suite is required (or --list)"))?;
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for name in names {
        let rep = run_suite(name, o.seed())?;
        for c in &rep.checks {
            rows.push(vec![
                rep.suite.clone(),
                c.name.clone(),
                if c.passed { "PASS" } else { "FAIL" }.into(),
                c.detail.clone(),
            ]);
        }
        reports.push(rep);
    }
    let code = if reports.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE };
    Ok((Doc::table(&["suite", "check", "status", "detail"], rows, serde_json::to_value(&reports)?), code))
}
