//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use bootperc::validation::run_suite;

const SEED: u64 = 20_240_601;

const CRITERIA: [(u32, &str); 9] = [
    (1, "oracle"),
    (2, "samplers"),
    (3, "bounds"),
    (4, "poisson"),
    (5, "lln"),
    (6, "early_stop"),
    (7, "minimizer"),
    (8, "asymptotics"),
    (9, "splitting"),
];

fn run_twice(dir: &Path, name: &str, args: &[&str]) -> Result<(), String> {
    let mut outputs = Vec::new();
    for i in 0..2 {
        let path = dir.join(format!("{name}-{i}.out"));
        let status = Command::new(env!("CARGO_BIN_EXE_bootperc"))
            .args(args)
            .arg("--out")
            .arg(&path)
            .status()
            .map_err(|e| format!("{name}: {e}"))?;
        if !status.success() {
            return Err(format!("{name}: exit {status}"));
        }
        outputs.push(std::fs::read(&path).map_err(|e| format!("{name}: {e}"))?);
    }
    if outputs[0] != outputs[1] {
        return Err(format!("{name}: outputs differ"));
    }
    Ok(())
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"rule":"power","constants":{"c":1,"beta":0.7},"r":2,"alpha":2}"#)
        .map_err(|e| e.to_string())?;
    let spec = spec.to_str().unwrap();
    let runs: [(&str, Vec<&str>); 8] = [
        ("critical", vec!["critical", "--n", "1e4", "--p", "1e-3", "--r", "2"]),
        ("regime", vec!["regime", "--spec", spec]),
        ("rate", vec!["rate", "--alpha", "2", "--r", "3", "--format", "json"]),
        (
            "simulate_graph",
            vec![
                "simulate",
                "--n",
                "60",
                "--p",
                "0.05",
                "--r",
                "2",
                "--a",
                "4",
                "--sampler",
                "graph",
                "--replicates",
                "2000",
                "--seed",
                "7",
            ],
        ),
        (
            "simulate_activation",
            vec![
                "simulate",
                "--n",
                "5000",
                "--p",
                "1e-3",
                "--r",
                "2",
                "--a",
                "60",
                "--sampler",
                "activation",
                "--replicates",
                "500",
                "--seed",
                "7",
            ],
        ),
        ("exact", vec!["exact", "--n", "200", "--p", "0.02", "--r", "2", "--a", "6"]),
        (
            "tail_estimate",
            vec![
                "tail",
                "estimate",
                "--n",
                "500",
                "--p",
                "0.0128",
                "--r",
                "2",
                "--a",
                "27",
                "--family",
                "const:1",
                "--eps",
                "10",
                "--method",
                "splitting",
                "--per-level",
                "200",
                "--batches",
                "5",
                "--seed",
                "3",
            ],
        ),
        (
            "tail_study",
            vec![
                "tail",
                "study",
                "--spec",
                spec,
                "--family",
                "asym_acnp:1",
                "--eps",
                "1",
                "--ladder",
                "1000,3000,10000",
                "--method",
                "naive",
                "--replicates",
                "1000",
                "--seed",
                "5",
            ],
        ),
    ];
    for (name, args) in &runs {
        run_twice(dir.path(), name, args)?;
    }
    Ok(format!("{} commands byte-identical across reruns", runs.len()))
}

fn main() -> ExitCode {
    let mut all = true;
    for (id, suite) in CRITERIA {
        let start = Instant::now();
        let (ok, detail) = match run_suite(suite, SEED) {
            Ok(rep) => {
                let failed: Vec<String> =
                    rep.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
                let detail = if failed.is_empty() { format!("{} checks", rep.checks.len()) } else { failed.join("; ") };
                (rep.passed, detail)
            }
            Err(e) => (false, format!("error: {e}")),
        };
        all &= ok;
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {suite:<12} {verdict} [{:.1}s] {detail}", start.elapsed().as_secs_f64());
    }
    let start = Instant::now();
    let (ok, detail) = match determinism() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    all &= ok;
    println!(
        "criterion 10 {:<12} {} [{:.1}s] {detail}",
        "determinism",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
