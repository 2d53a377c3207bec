//! Named experiments: parameter schemas, default tolerances and runners.

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{parse_params, ConfigError, RawConfig, Tolerances};
use crate::report::Report;

mod dynamics;
mod spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    SigmaTable,
    OracleXcheck,
    SliceGrowth,
    IllposedScaling,
    DiffusiveSweep,
    DynamoScaling,
    GevreyBreakdown,
    LipschitzBlowup,
    NonlinearEnergy,
    /// Debug dump of the velocity symbol over a box.
    Symbols,
}

impl Experiment {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

trait Definition {
    type Params: DeserializeOwned + Serialize + Default + 'static;
    const TOLERANCES: &'static [(&'static str, f64)];
    fn validate(p: &Self::Params) -> Result<(), ConfigError>;
    fn run(p: &Self::Params, tol: &Tolerances) -> anyhow::Result<Report>;
}

type Runner = Box<dyn FnOnce(&Tolerances) -> anyhow::Result<Report>>;

/// A validated experiment ready to run.
pub struct Prepared {
    /// Effective parameters, defaults filled in.
    pub params: serde_json::Value,
    pub tolerances: Tolerances,
    runner: Runner,
}

impl Prepared {
    pub fn run(self) -> anyhow::Result<(Report, serde_json::Value, Tolerances)> {
        let report = (self.runner)(&self.tolerances)?;
        Ok((report, self.params, self.tolerances))
    }
}

fn prepare_def<S: Definition>(raw: &RawConfig) -> Result<Prepared, ConfigError> {
    let p: S::Params = parse_params(raw.params.as_ref())?;
    S::validate(&p)?;
    let tolerances = Tolerances::resolve(S::TOLERANCES, &raw.tolerances)?;
    let params = serde_json::to_value(&p).map_err(|e| ConfigError::new("params", e.to_string()))?;
    Ok(Prepared {
        params,
        tolerances,
        runner: Box::new(move |t| S::run(&p, t)),
    })
}

pub fn prepare(exp: Experiment, raw: &RawConfig) -> Result<Prepared, ConfigError> {
    if let Some(name) = &raw.experiment {
        if *name != exp.name() {
            return Err(ConfigError::new(
                "experiment",
                format!("config is for `{name}` but `{}` was requested", exp.name()),
            ));
        }
    }
    match exp {
        Experiment::SigmaTable => prepare_def::<spectral::SigmaTable>(raw),
        Experiment::OracleXcheck => prepare_def::<spectral::OracleXcheck>(raw),
        Experiment::IllposedScaling => prepare_def::<spectral::IllposedScaling>(raw),
        Experiment::DiffusiveSweep => prepare_def::<spectral::DiffusiveSweep>(raw),
        Experiment::DynamoScaling => prepare_def::<spectral::DynamoScaling>(raw),
        Experiment::Symbols => prepare_def::<spectral::Symbols>(raw),
        Experiment::SliceGrowth => prepare_def::<dynamics::SliceGrowth>(raw),
        Experiment::GevreyBreakdown => prepare_def::<dynamics::GevreyBreakdown>(raw),
        Experiment::LipschitzBlowup => prepare_def::<dynamics::LipschitzBlowup>(raw),
        Experiment::NonlinearEnergy => prepare_def::<dynamics::NonlinearEnergy>(raw),
    }
}
