//! Experiment configuration: TOML or JSON files with sections, environment
//! overrides for the cost guards, and command-line flags on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use treedyn::CostGuards;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// `coalescing`, `voter` or `general` (analytic commands).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(rename = "T")]
    pub t: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    /// Thread count; not part of the report since results do not depend on it.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GuardSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coalescing_max_depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voter_max_depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_visits_per_sample: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice_max_sites: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ising_max_vertices: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_horizon: Option<f64>,
}

/// A fully merged configuration. Commands fill in the defaults they use so
/// that the copy embedded in a report reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub model: ModelSection,
    pub sampling: SamplingSection,
    pub grid: GridSection,
    #[serde(skip_serializing)]
    pub output: OutputSection,
    pub guards: GuardSection,
}

pub const GUARD_ENV: [(&str, &str); 6] = [
    ("coalescing_max_depth", "TREEDYN_COALESCING_MAX_DEPTH"),
    ("voter_max_depth", "TREEDYN_VOTER_MAX_DEPTH"),
    ("max_visits_per_sample", "TREEDYN_MAX_VISITS_PER_SAMPLE"),
    ("lattice_max_sites", "TREEDYN_LATTICE_MAX_SITES"),
    ("ising_max_vertices", "TREEDYN_ISING_MAX_VERTICES"),
    ("max_horizon", "TREEDYN_MAX_HORIZON"),
];

impl ExperimentConfig {
    /// Reads a TOML file, or JSON when the extension is `.json`. A JSON
    /// report is accepted too: its `config` member is used.
    pub fn load(path: &Path) -> Result<Value, CliError> {
        let text = std::fs::read_to_string(path)?;
        let value: Value = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            let table: toml::Table = toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::to_value(table).map_err(|e| CliError::Config(e.to_string()))?
        };
        Ok(match value {
            Value::Object(mut m) if m.contains_key("config") => m.remove("config").unwrap(),
            v => v,
        })
    }

    /// Merges layers in order (later wins) and decodes the result.
    pub fn from_layers(layers: &[Value]) -> Result<Self, CliError> {
        let mut merged = Value::Object(Map::new());
        for layer in layers {
            merge(&mut merged, layer);
        }
        serde_json::from_value(merged).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Guard settings: built-in defaults, then environment, then this config.
    /// The resolved values are written back into the config.
    pub fn resolve_guards(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<CostGuards, CliError> {
        let mut g = CostGuards::default();
        let [depth, voter, visits, sites, vertices, horizon] = GUARD_ENV.map(|(_, var)| var);
        if let Some(v) = env_value(&env, depth)? {
            g.coalescing_max_depth = v;
        }
        if let Some(v) = env_value(&env, voter)? {
            g.voter_max_depth = v;
        }
        if let Some(v) = env_value(&env, visits)? {
            g.max_visits_per_sample = v;
        }
        if let Some(v) = env_value(&env, sites)? {
            g.lattice_max_sites = v;
        }
        if let Some(v) = env_value(&env, vertices)? {
            g.ising_max_vertices = v;
        }
        if let Some(v) = env_value(&env, horizon)? {
            g.max_horizon = v;
        }
        let s = &mut self.guards;
        g.coalescing_max_depth = *s.coalescing_max_depth.get_or_insert(g.coalescing_max_depth);
        g.voter_max_depth = *s.voter_max_depth.get_or_insert(g.voter_max_depth);
        g.max_visits_per_sample = *s.max_visits_per_sample.get_or_insert(g.max_visits_per_sample);
        g.lattice_max_sites = *s.lattice_max_sites.get_or_insert(g.lattice_max_sites);
        g.ising_max_vertices = *s.ising_max_vertices.get_or_insert(g.ising_max_vertices);
        g.max_horizon = *s.max_horizon.get_or_insert(g.max_horizon);
        if !(g.max_horizon >= 0.0) {
            return Err(CliError::Config("max_horizon must be non-negative".into()));
        }
        Ok(g)
    }

    /// The seed, which every stochastic command requires.
    pub fn seed(&self) -> Result<u64, CliError> {
        self.sampling
            .seed
            .ok_or_else(|| CliError::Config("a seed is required (--seed or [sampling] seed)".into()))
    }
}

fn env_value<T: std::str::FromStr>(
    env: &impl Fn(&str) -> Option<String>,
    var: &str,
) -> Result<Option<T>, CliError> {
    env(var)
        .map(|raw| {
            raw.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{var}={raw:?} is not a valid number")))
        })
        .transpose()
}

/// Recursive object merge; non-object values in `patch` replace `base`.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    continue;
                }
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn later_layers_win_and_nulls_are_ignored() {
        let file = json!({"model": {"n": 3, "T": [1.0]}, "sampling": {"seed": 1}});
        let flags = json!({"model": {"n": 5, "beta": null}, "sampling": {"samples": 10}});
        let c = ExperimentConfig::from_layers(&[file, flags]).unwrap();
        assert_eq!(c.model.n, Some(5));
        assert_eq!(c.model.t, Some(vec![1.0]));
        assert_eq!(c.sampling.seed, Some(1));
        assert_eq!(c.sampling.samples, Some(10));
        assert_eq!(c.model.beta, None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_layers(&[json!({"model": {"size": 3}})]).is_err());
        assert!(ExperimentConfig::from_layers(&[json!({"extra": {}})]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::from_layers(&[json!({
            "command": "simulate voter",
            "model": {"n": 2, "T": [0.5, 1.0]},
            "sampling": {"seed": 4, "samples": 100},
            "grid": {"h": 0.01}
        })])
        .unwrap();
        c.resolve_guards(|_| None).unwrap();
        let text = c.to_toml().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        let back = ExperimentConfig::from_layers(&[ExperimentConfig::load(&path).unwrap()]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn guard_precedence() {
        let mut c = ExperimentConfig::from_layers(&[json!({"guards": {"voter_max_depth": 9}})]).unwrap();
        let env = |k: &str| match k {
            "TREEDYN_VOTER_MAX_DEPTH" => Some("11".to_string()),
            "TREEDYN_MAX_HORIZON" => Some("50".to_string()),
            _ => None,
        };
        let g = c.resolve_guards(env).unwrap();
        assert_eq!(g.voter_max_depth, 9);
        assert_eq!(g.max_horizon, 50.0);
        assert_eq!(g.coalescing_max_depth, CostGuards::default().coalescing_max_depth);
        let mut bad = ExperimentConfig::default();
        assert!(bad.resolve_guards(|_| Some("x".into())).is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(ExperimentConfig::default().seed().is_err());
    }
}
