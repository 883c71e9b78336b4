use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ScenarioConfig;
use crate::bundle::BundleDocument;
use crate::error::{GaugeError, Result};
use crate::gauge::Certificate;

pub const REPORT_SCHEMA: &str = "gaugelab.report/v1";

/// One row of a scenario: what went in, what was measured, and whether it passed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub inputs: BTreeMap<String, Value>,
    pub measured: BTreeMap<String, f64>,
    /// Value the main measurement is compared against, when there is one.
    pub bound: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

impl Case {
    pub fn new(id: impl Into<String>) -> Case {
        Case { id: id.into(), inputs: BTreeMap::new(), measured: BTreeMap::new(), bound: None, pass: true, error: None }
    }

    pub fn input(mut self, key: &str, v: impl Serialize) -> Case {
        self.inputs.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn measure(&mut self, key: &str, v: f64) {
        self.measured.insert(key.into(), v);
    }

    /// Records a pass/fail condition; the case passes only if all conditions do.
    pub fn require(&mut self, ok: bool) {
        self.pass &= ok;
    }

    pub fn fail_with(mut self, err: impl ToString) -> Case {
        self.pass = false;
        self.error = Some(err.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    /// From an explicit bundle whose curvature and Chern number were measured.
    LowerViaWitness,
    /// From the Chern-Weil inequality.
    UpperViaChernWeil,
}

/// One-sided bound on the K-area of a homology class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KAreaBound {
    pub manifold: String,
    pub class: String,
    pub direction: BoundDirection,
    pub value: f64,
    pub witness: String,
    /// Bundle reproducing a lower bound, rebuildable with `BundleDocument::build`.
    pub witness_bundle: Option<BundleDocument>,
    pub comass: Option<f64>,
    pub c1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub scenario: String,
    pub anchor: String,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub timestamp: u64,
    pub config: ScenarioConfig,
    pub cases: Vec<Case>,
    pub kbounds: Vec<KAreaBound>,
    pub certificates: Vec<Certificate>,
    pub summary: Summary,
}

impl Report {
    pub fn new(config: ScenarioConfig, anchor: &str, cases: Vec<Case>, kbounds: Vec<KAreaBound>, certificates: Vec<Certificate>) -> Report {
        let errors = cases.iter().filter(|c| c.error.is_some()).count();
        let passed = cases.iter().filter(|c| c.pass).count();
        let summary = Summary { cases: cases.len(), passed, failed: cases.len() - passed, errors, pass: passed == cases.len() };
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report {
            schema: REPORT_SCHEMA.into(),
            scenario: config.scenario.clone(),
            anchor: anchor.into(),
            timestamp,
            config,
            cases,
            kbounds,
            certificates,
            summary,
        }
    }

    pub fn passed(&self) -> bool {
        self.summary.pass
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| GaugeError::Document(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Report> {
        let r: Report = serde_json::from_str(text).map_err(|e| GaugeError::Document(e.to_string()))?;
        if r.schema != REPORT_SCHEMA {
            return Err(GaugeError::Document(format!("unsupported report schema `{}`", r.schema)));
        }
        Ok(r)
    }

    /// Cases table: id, pass, error, bound, then the union of input and measured keys.
    pub fn to_csv(&self) -> Result<String> {
        let mut inputs: Vec<&String> = self.cases.iter().flat_map(|c| c.inputs.keys()).collect();
        inputs.sort();
        inputs.dedup();
        let mut measured: Vec<&String> = self.cases.iter().flat_map(|c| c.measured.keys()).collect();
        measured.sort();
        measured.dedup();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["case".to_string(), "pass".into(), "error".into(), "bound".into()];
        header.extend(inputs.iter().map(|k| format!("in.{k}")));
        header.extend(measured.iter().map(|k| format!("out.{k}")));
        let csv_err = |e: csv::Error| GaugeError::Io(e.to_string());
        w.write_record(&header).map_err(csv_err)?;
        for c in &self.cases {
            let mut row = vec![
                c.id.clone(),
                c.pass.to_string(),
                c.error.clone().unwrap_or_default(),
                c.bound.map(fmt_num).unwrap_or_default(),
            ];
            for k in &inputs {
                row.push(match c.inputs.get(*k) {
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                    None => String::new(),
                });
            }
            for k in &measured {
                row.push(c.measured.get(*k).map(|v| fmt_num(*v)).unwrap_or_default());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| GaugeError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| GaugeError::Io(e.to_string()))
    }

    /// Writes `<scenario>.json` and `<scenario>.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.scenario));
        let csv = dir.join(format!("{}.csv", self.scenario));
        std::fs::write(&json, self.to_json()?)?;
        std::fs::write(&csv, self.to_csv()?)?;
        Ok((json, csv))
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}
