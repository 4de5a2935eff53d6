//! Acceptance run: one PASS/FAIL line per criterion. Tolerances are pinned
//! here rather than taken from the CLI defaults.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lcqft_cli::config::{RunConfig, Suite};
use lcqft_cli::report::{strip_timings, Relation, SuiteReport};
use lcqft_cli::run_suite;

struct Outcome {
    passed: bool,
    detail: String,
}

fn suite(spectrum: &str, n: usize, steps: usize, s: Suite) -> SuiteReport {
    let mut cfg = RunConfig::new(spectrum, n, steps, &[s]);
    cfg.jobs = 1;
    run_suite(&cfg).expect("valid config").suites.remove(0)
}

/// Checks the named residual against a pinned bound, whatever tolerance the
/// suite itself applied.
fn bound(r: &SuiteReport, name: &str, relation: Relation, tol: f64, out: &mut Outcome) {
    match r.checks.iter().find(|c| c.name == name) {
        Some(c) => {
            let ok = match relation {
                Relation::Below => c.value.0 < tol,
                Relation::Above => c.value.0 > tol,
            };
            out.passed &= ok;
            out.detail += &format!(" {name}={:.2e}", c.value.0);
        }
        None => {
            out.passed = false;
            out.detail += &format!(" {name}=missing");
        }
    }
}

fn start(r: &SuiteReport) -> Outcome {
    let failed: Vec<&str> = r.failed_checks().map(|c| c.name.as_str()).collect();
    Outcome { passed: failed.is_empty(), detail: if failed.is_empty() { String::new() } else { format!(" failed={failed:?}") } }
}

fn ccr() -> Outcome {
    let r = suite("1:2", 8, 16, Suite::Ccr);
    let mut o = start(&r);
    bound(&r, "ccr.relations", Relation::Below, 1e-12, &mut o);
    bound(&r, "ccr.associativity", Relation::Below, 1e-10, &mut o);
    o
}

fn gauge() -> Outcome {
    let r = suite("0:1,1:2", 8, 16, Suite::Gauge);
    let mut o = start(&r);
    bound(&r, "gauge.homomorphism", Relation::Below, 1e-11, &mut o);
    // exact up to roundoff of the lifted maps
    bound(&r, "gauge.naturality.spatial", Relation::Below, 1e-12, &mut o);
    bound(&r, "gauge.naturality.temporal", Relation::Below, 1e-12, &mut o);
    bound(&r, "gauge.locality_violations.mismatch", Relation::Below, 0.5, &mut o);
    o
}

fn rce() -> Outcome {
    let r = suite("0:1,1:2", 8, 16, Suite::Rce);
    let mut o = start(&r);
    bound(&r, "rce.symplectic", Relation::Below, 1e-10, &mut o);
    bound(&r, "rce.intertwining", Relation::Below, 1e-9, &mut o);
    bound(&r, "rce.localization", Relation::Below, 1e-10, &mut o);
    bound(&r, "rce.skew", Relation::Below, 1e-8, &mut o);
    o
}

fn classify() -> Outcome {
    let mut o = Outcome { passed: true, detail: String::new() };
    for (spectrum, want) in [("1:1", 0), ("1:2", 1), ("1:2,2:3", 4), ("1:3", 3)] {
        let r = suite(spectrum, 8, 16, Suite::Classify);
        let c = r.classification.as_ref();
        let dim = c.map(|c| c.dimension as i64).unwrap_or(-1);
        let matched = c.is_some_and(|c| c.matched);
        let stable = r.dimensions.get("distinct_dimensions_over_seeds") == Some(&1);
        let mut sub = start(&r);
        bound(&r, "classify.soundness", Relation::Below, 1e-8, &mut sub);
        o.passed &= sub.passed && dim == want && matched && stable;
        o.detail += &format!(" {spectrum}->{dim}{}", if matched { "" } else { "(no match)" });
    }
    o
}

fn state() -> Outcome {
    let r = suite("0:1,1:2", 8, 16, Suite::State);
    let mut o = start(&r);
    bound(&r, "state.positivity", Relation::Above, -1e-9, &mut o);
    bound(&r, "state.invariance", Relation::Below, 1e-10, &mut o);
    bound(&r, "state.one_point", Relation::Below, 1e-10, &mut o);
    o
}

fn observables() -> Outcome {
    let r = suite("0:1,1:2", 8, 16, Suite::Observables);
    let mut o = start(&r);
    bound(&r, "observables.invariance", Relation::Below, 1e-10, &mut o);
    bound(&r, "observables.mixing", Relation::Above, 1e-3, &mut o);
    bound(&r, "observables.central", Relation::Below, 1e-12, &mut o);
    let flagged = r.flags.contains_key("central.s0.fixed_by_affine");
    o.passed &= flagged;
    o.detail += &format!(" central_flagged={flagged}");
    o
}

fn goldens() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut o = Outcome { passed: true, detail: String::new() };
    for (file, spectrum, n, steps, s) in [
        ("one_mass.json", "1:2", 8, 16, Suite::All),
        ("massless.json", "0:1,1:2", 6, 12, Suite::All),
        ("two_masses_classify.json", "1:2,2:3", 8, 16, Suite::Classify),
    ] {
        let mut cfg = RunConfig::new(spectrum, n, steps, &[s]);
        let mut runs = Vec::new();
        for jobs in [1, 0] {
            cfg.jobs = jobs;
            let mut v: serde_json::Value = serde_json::from_str(&run_suite(&cfg).unwrap().to_json()).unwrap();
            strip_timings(&mut v);
            runs.push(v);
        }
        let mut want: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join(file)).expect("golden present")).unwrap();
        strip_timings(&mut want);
        let same = runs[0] == want && runs[1] == want;
        o.passed &= same;
        o.detail += &format!(" {file}={}", if same { "identical" } else { "differs" });
    }
    o
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("1 ccr", ccr, Duration::from_secs(10)),
        ("2 gauge", gauge, Duration::from_secs(20)),
        ("3 rce", rce, Duration::from_secs(30)),
        ("4 classify", classify, Duration::from_secs(120)),
        ("5 state", state, Duration::from_secs(600)),
        ("6 observables", observables, Duration::from_secs(600)),
        ("7 goldens", goldens, Duration::from_secs(600)),
    ];
    let mut all = true;
    for (name, run, budget) in criteria {
        let t = Instant::now();
        let mut o = run();
        let took = t.elapsed();
        if took > budget {
            o.passed = false;
            o.detail += " over time budget";
        }
        all &= o.passed;
        println!("{} criterion {name}: {:.2}s{}", if o.passed { "PASS" } else { "FAIL" }, took.as_secs_f64(), o.detail);
    }
    if all { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
