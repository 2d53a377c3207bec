use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use mg_core::PhysicalParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Schema violation, reported with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error at {}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Top-level config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub params: Option<serde_json::Value>,
}

pub fn load(path: &Path) -> Result<RawConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(path, e.into_inner().to_string())
    })
}

/// Deserialises the `params` block; absent fields take their defaults.
pub fn parse_params<T: DeserializeOwned>(value: Option<&serde_json::Value>) -> Result<T, ConfigError> {
    let value = value.cloned().unwrap_or_else(|| serde_json::Value::Object(Default::default()));
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { "params".to_string() } else { format!("params.{inner}") };
        ConfigError::new(path, e.into_inner().to_string())
    })
}

/// Effective tolerances: defaults with validated overrides applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Tolerances {
    pub fn resolve(defaults: &[(&str, f64)], overrides: &BTreeMap<String, f64>) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<String, f64> = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (name, v) in overrides {
            let path = format!("tolerances.{name}");
            if !map.contains_key(name) {
                let known: Vec<&str> = defaults.iter().map(|d| d.0).collect();
                return Err(ConfigError::new(
                    path,
                    format!("unknown tolerance; expected one of [{}]", known.join(", ")),
                ));
            }
            if !(v.is_finite() && *v > 0.0) {
                return Err(ConfigError::new(path, format!("tolerance must be positive, got {v}")));
            }
            map.insert(name.clone(), *v);
        }
        Ok(Self(map))
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0[name]
    }
}

fn one() -> f64 {
    1.0
}

/// Physical constants: `Ω` with either `μ` or the pair `β, η` (default 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysConfig {
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl Default for PhysConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            mu: None,
            beta: None,
            eta: None,
        }
    }
}

impl PhysConfig {
    pub fn build(&self, kappa: f64) -> Result<PhysicalParams, ConfigError> {
        let p = match (self.mu, self.beta, self.eta) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(ConfigError::new("params.phys", "give either mu or beta/eta, not both"))
            }
            (Some(mu), None, None) => PhysicalParams::from_mu(self.omega, mu, kappa),
            (None, beta, eta) => PhysicalParams::new(self.omega, eta.unwrap_or(1.0), beta.unwrap_or(1.0), kappa),
        };
        p.map_err(|e| ConfigError::new("params.phys", e.to_string()))
    }
}

pub fn require(cond: bool, path: &str, message: impl Into<String>) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::new(path, message))
    }
}

pub fn positive(v: f64, path: &str) -> Result<(), ConfigError> {
    require(v.is_finite() && v > 0.0, path, format!("must be positive, got {v}"))
}

pub fn positive_list<T: Copy + PartialOrd + Default + fmt::Display>(v: &[T], path: &str) -> Result<(), ConfigError> {
    require(!v.is_empty(), path, "must not be empty")?;
    for (i, x) in v.iter().enumerate() {
        require(*x > T::default(), &format!("{path}[{i}]"), format!("must be positive, got {x}"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_top_level_field_has_path() {
        let e = parse(r#"{"parms": {}}"#).unwrap_err();
        assert!(e.message.contains("unknown field"), "{e}");
    }

    #[test]
    fn params_path_is_prefixed() {
        #[derive(Debug, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct P {
            #[allow(dead_code)]
            n: usize,
        }
        let v: serde_json::Value = serde_json::json!({"n": "eight"});
        let e = parse_params::<P>(Some(&v)).unwrap_err();
        assert_eq!(e.path, "params.n");
    }

    #[test]
    fn tolerance_overrides() {
        let defaults = [("a", 1e-3), ("b", 2.0)];
        let mut o = BTreeMap::new();
        o.insert("a".to_string(), 5e-3);
        assert_eq!(Tolerances::resolve(&defaults, &o).unwrap().get("a"), 5e-3);
        o.insert("a".to_string(), 0.0);
        assert_eq!(Tolerances::resolve(&defaults, &o).unwrap_err().path, "tolerances.a");
        let mut o = BTreeMap::new();
        o.insert("zzz".to_string(), 1.0);
        assert!(Tolerances::resolve(&defaults, &o).unwrap_err().message.contains("unknown"));
    }

    #[test]
    fn phys_variants() {
        let p = PhysConfig { mu: Some(2.0), ..Default::default() }.build(0.0).unwrap();
        assert_eq!(p.mu, 2.0);
        let p = PhysConfig { beta: Some(2.0), eta: Some(4.0), ..Default::default() }.build(0.0).unwrap();
        assert_eq!(p.mu, 1.0);
        assert!(PhysConfig { mu: Some(1.0), beta: Some(1.0), ..Default::default() }.build(0.0).is_err());
        assert!(PhysConfig { omega: -1.0, ..Default::default() }.build(0.0).is_err());
    }
}
