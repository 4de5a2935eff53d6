//! Versioned JSON report. Floats are written with 17 significant digits and
//! non-finite values become `null`, so reports diff byte for byte.

use std::collections::BTreeMap;

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

pub const SCHEMA: &str = "lcqft-report/1";

/// f64 serialized as `{:.16e}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Float(pub f64);

impl Serialize for Float {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// value < tolerance
    Below,
    /// value > tolerance
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Float,
    pub tolerance: Float,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value: Float(value), tolerance: Float(tolerance), relation: Relation::Below, passed: value < tolerance }
    }

    pub fn above(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value: Float(value), tolerance: Float(tolerance), relation: Relation::Above, passed: value > tolerance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub status: Status,
    pub checks: Vec<Check>,
    /// Integer-valued results: dimensions, counts, ranks.
    pub dimensions: BTreeMap<String, i64>,
    pub flags: BTreeMap<String, bool>,
    /// Notes on behaviour that is expected but worth surfacing.
    pub findings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationJson>,
    /// Wall-clock time; excluded from golden comparisons.
    pub timing_ms: Float,
}

impl SuiteReport {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            status: Status::Pass,
            checks: vec![],
            dimensions: BTreeMap::new(),
            flags: BTreeMap::new(),
            findings: vec![],
            classification: None,
            timing_ms: Float(0.0),
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Records a required equality of two integers as a dimension pair and
    /// a check.
    pub fn expect_eq(&mut self, name: &str, got: i64, want: i64) {
        self.dimensions.insert(name.into(), got);
        self.dimensions.insert(format!("{name}.expected"), want);
        self.checks.push(Check::below(&format!("{name}.mismatch"), (got - want).abs() as f64, 0.5));
    }

    pub fn finalize(mut self) -> Self {
        self.status = if self.checks.iter().all(|c| c.passed) { Status::Pass } else { Status::Fail };
        self
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Classifier output: {dimension, expected, match, generators, residuals}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationJson {
    pub dimension: usize,
    pub expected: usize,
    #[serde(rename = "match")]
    pub matched: bool,
    pub commutant_dimension: usize,
    pub commutant_expected: usize,
    pub zero_mode_quarantined: usize,
    pub batch_ranks: Vec<usize>,
    pub constraint_rows: usize,
    /// Species-space matrices of the generators.
    pub generators: Vec<Vec<Vec<Float>>>,
    pub residuals: BTreeMap<String, Float>,
}

impl From<&lcqft::classifier::ClassificationReport> for ClassificationJson {
    fn from(r: &lcqft::classifier::ClassificationReport) -> Self {
        let mut residuals = BTreeMap::new();
        residuals.insert("principal_sine".into(), Float(r.principal_sine));
        residuals.insert("condition".into(), Float(r.condition));
        residuals.insert("generator_form".into(), Float(r.generator_form_residual));
        residuals.insert("soundness".into(), Float(r.soundness.max()));
        residuals.insert("soundness.symplectic".into(), Float(r.soundness.symplectic));
        residuals.insert("soundness.null_energy".into(), Float(r.soundness.null_energy));
        residuals.insert("soundness.rce_commutation".into(), Float(r.soundness.rce_commutation));
        residuals.insert("reflections".into(), Float(r.reflections.max()));
        let affine = r.affine.iter().map(|a| a.homomorphism.max(a.one_parameter)).fold(0.0, f64::max);
        residuals.insert("affine".into(), Float(affine));
        Self {
            dimension: r.dimension,
            expected: r.expected,
            matched: r.matched,
            commutant_dimension: r.commutant_dimension,
            commutant_expected: r.commutant_expected,
            zero_mode_quarantined: r.zero_mode_quarantined,
            batch_ranks: r.batch_ranks.clone(),
            constraint_rows: r.constraint_rows,
            generators: r.generators.iter().map(|g| g.iter().map(|row| row.iter().map(|&v| Float(v)).collect()).collect()).collect(),
            residuals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub spectrum: String,
    pub n_sites: usize,
    pub n_steps: usize,
    pub dt: Float,
    pub seed: u64,
    pub suites: Vec<String>,
    pub tolerances: BTreeMap<String, Float>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: ConfigEcho,
    pub status: Status,
    pub suites: Vec<SuiteReport>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Human-readable summary, one line per suite and per failing check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            let tag = if s.status == Status::Pass { "PASS" } else { "FAIL" };
            out += &format!("{tag} {:<12} {} checks, {:.0} ms\n", s.name, s.checks.len(), s.timing_ms.0);
            for c in s.failed_checks() {
                let op = if c.relation == Relation::Below { "<" } else { ">" };
                out += &format!("     {} = {:e} (want {op} {:e})\n", c.name, c.value.0, c.tolerance.0);
            }
            for f in &s.findings {
                out += &format!("     note: {f}\n");
            }
        }
        out
    }
}

/// Removes every `timing_ms` field from a parsed report.
pub fn strip_timings(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("timing_ms");
            m.values_mut().for_each(strip_timings);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timings),
        _ => {}
    }
}
