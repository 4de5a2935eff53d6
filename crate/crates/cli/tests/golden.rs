use std::path::PathBuf;

use lcqft_cli::config::{RunConfig, Suite};
use lcqft_cli::report::strip_timings;
use lcqft_cli::run_suite;

fn golden(name: &str) -> serde_json::Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    strip_timings(&mut v);
    v
}

fn rerun(cfg: &RunConfig) -> serde_json::Value {
    let report = run_suite(cfg).unwrap();
    assert!(report.passed(), "{}", report.summary());
    let mut v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    strip_timings(&mut v);
    v
}

fn assert_matches(cfg: &RunConfig, name: &str) {
    let (got, want) = (rerun(cfg), golden(name));
    assert!(got == want, "{name} drifted:\n{}", serde_json::to_string_pretty(&got).unwrap());
}

#[test]
fn single_mass_all_suites() {
    assert_matches(&RunConfig::new("1:2", 8, 16, &[Suite::All]), "one_mass.json");
}

#[test]
fn massless_all_suites() {
    assert_matches(&RunConfig::new("0:1,1:2", 6, 12, &[Suite::All]), "massless.json");
}

#[test]
fn two_masses_classify() {
    assert_matches(&RunConfig::new("1:2,2:3", 8, 16, &[Suite::Classify]), "two_masses_classify.json");
}

#[test]
fn suite_subset_does_not_change_results() {
    let all = rerun(&RunConfig::new("1:2", 8, 16, &[Suite::All]));
    let one = rerun(&RunConfig::new("1:2", 8, 16, &[Suite::Rce]));
    assert_eq!(one["suites"][0], all["suites"][2]);
}
