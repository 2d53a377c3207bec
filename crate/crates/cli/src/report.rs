use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// One acceptance check of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    /// `None` for exact (boolean or counting) checks.
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: measured <= tolerance,
            measured,
            tolerance: Some(tolerance),
            detail,
        }
    }

    pub fn exact(name: &str, passed: bool, measured: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            measured,
            tolerance: None,
            detail,
        }
    }
}

/// How `plot-data` melts one CSV file: column `x` is the abscissa, every
/// other column (except `group`) becomes a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub file: String,
    pub x: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Columns to melt; all non-key columns when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    key: Vec<f64>,
    cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: String,
    columns: Vec<String>,
    rows: Vec<Row>,
    pub checks: Vec<Check>,
    pub measured: BTreeMap<String, serde_json::Value>,
    files: Vec<(String, String)>,
    pub plots: Vec<PlotSpec>,
}

/// Float cell: shortest round-trip exponent form, empty for `None`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl Report {
    pub fn new(experiment: &str, columns: &[&str]) -> Self {
        Self {
            experiment: experiment.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
            measured: BTreeMap::new(),
            files: Vec::new(),
            plots: Vec::new(),
        }
    }

    /// Adds a row; rows are written sorted by `key`.
    pub fn row(&mut self, key: Vec<f64>, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns.len(), "row width");
        self.rows.push(Row { key, cells });
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn measure(&mut self, name: &str, v: impl Serialize) {
        self.measured
            .insert(name.into(), serde_json::to_value(v).expect("serialisable measurement"));
    }

    /// Extra output file written next to `results.csv`.
    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn plot(&mut self, file: &str, x: &str, group: Option<&str>, series: &[&str]) {
        self.plots.push(PlotSpec {
            file: file.into(),
            x: x.into(),
            group: group.map(String::from),
            series: series.iter().map(|s| s.to_string()).collect(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn results_csv(&self) -> Result<String> {
        let mut rows: Vec<&Row> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            a.key
                .iter()
                .zip(&b.key)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in rows {
            w.write_record(&r.cells)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn write(&self, dir: &Path, params: &serde_json::Value, tolerances: &impl Serialize, wall: f64) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let put = |name: &str, s: &str| {
            let p = dir.join(name);
            std::fs::write(&p, s).with_context(|| format!("writing {}", p.display()))
        };
        put("results.csv", &self.results_csv()?)?;
        for (name, contents) in &self.files {
            put(name, contents)?;
        }
        let summary = Summary {
            experiment: self.experiment.clone(),
            passed: self.passed(),
            checks: self.checks.clone(),
            measured: self.measured.clone(),
            tolerances: serde_json::to_value(tolerances)?,
            params: params.clone(),
            wall_time_s: wall,
            plots: self.plots.clone(),
        };
        put("summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub measured: BTreeMap<String, serde_json::Value>,
    pub tolerances: serde_json::Value,
    pub params: serde_json::Value,
    pub wall_time_s: f64,
    pub plots: Vec<PlotSpec>,
}
