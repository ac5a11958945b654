use serde::{Deserialize, Serialize};

use crate::config::{DataflowConfig, HostConfig, LinkConfig, RunConfig, SourceConfig, SwitchConfig, VlanConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Single,
    /// One run per value of `param`.
    Sweep,
    /// Largest `param` in `[lo, hi]` with zero frame loss.
    Bisect,
    /// Learning phase then measuring phase; reports the learned count.
    MacProbe,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "is_default")]
    pub kind: ExperimentKind,
    /// Dotted path of the swept parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    /// Source whose pattern destinations are counted by the probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_source: Option<String>,
    /// Promiscuous host that sees every flooded frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub listener: Option<String>,
}

/// A complete scenario: topology, traffic, dataflow population and the
/// experiment to run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "is_default")]
    pub experiment: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub switches: Vec<SwitchConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hosts: Vec<HostConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vlans: Vec<VlanConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataflow: Option<DataflowConfig>,
}

impl ScenarioDoc {
    pub fn new(name: impl Into<String>, run: RunConfig) -> Self {
        ScenarioDoc {
            name: name.into(),
            description: String::new(),
            seed: 1,
            output_dir: None,
            run,
            experiment: ExperimentConfig::default(),
            switches: vec![],
            hosts: vec![],
            links: vec![],
            vlans: vec![],
            sources: vec![],
            dataflow: None,
        }
    }
}
