//! Scenario files.
//!
//! A scenario is a JSON object; unknown fields are rejected at every level.
//!
//! ```json
//! {
//!   "name": "fim2",
//!   "generator": "fim",
//!   "params": { "outer": 2 },
//!   "protocol": "odcf",
//!   "duration_s": 100,
//!   "seed": 1,
//!   "overrides": { "rts_cts": false, "odcf": { "c": 500 } },
//!   "capacity_trace": [ { "link": 1, "steps": [[60, 6]] } ]
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineParams;
use crate::engine::{CapacityStep, EngineConfig};
use crate::error::{Result, SimError};
use crate::odcf::OdcfParams;
use crate::protocol::{Protocol, ProtocolParams};
use crate::timing::TimingParams;
use crate::topology::{self, GridParams, LinkId, RandomParams, Topology};

pub const DEFAULT_DURATION_S: f64 = 100.0;
pub const DEFAULT_REPLICATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Fc,
    Fim,
    Ht,
    Ia,
    HtCapture,
    MixedFimFc,
    FcInFim,
    Grid,
    Random,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub id: LinkId,
    pub capacity_mbps: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplicitTopology {
    pub links: Vec<LinkSpec>,
    pub sense: Vec<(LinkId, LinkId)>,
    pub interfere: Vec<(LinkId, LinkId)>,
    pub capture: Vec<(LinkId, LinkId)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FcParams {
    n: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FimParams {
    outer: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Overrides {
    /// Forces RTS/CTS on or off; by default it is on exactly when some pair
    /// of links interferes without sensing each other.
    pub rts_cts: Option<bool>,
    /// Replaces the generated link rates.
    pub capacities_mbps: Option<Vec<f64>>,
    pub timing: Option<TimingParams>,
    pub odcf: Option<OdcfParams>,
    pub baselines: Option<BaselineParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEntry {
    pub link: LinkId,
    /// `(time_s, mbps)` steps.
    pub steps: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub generator: Generator,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub topology: Option<ExplicitTopology>,
    #[serde(default = "default_protocol")]
    pub protocol: Protocol,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub capacity_trace: Vec<TraceEntry>,
}

fn default_protocol() -> Protocol {
    Protocol::Odcf
}

fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}

fn default_seed() -> u64 {
    1
}

fn typed_params<T: serde::de::DeserializeOwned>(
    generator: Generator,
    value: &serde_json::Value,
) -> Result<T> {
    let value = if value.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        value.clone()
    };
    serde_json::from_value(value)
        .map_err(|e| SimError::Config(format!("params for generator {generator:?}: {e}")))
}

impl ScenarioConfig {
    pub fn new(name: impl Into<String>, generator: Generator, params: serde_json::Value) -> Self {
        Self {
            name: name.into(),
            generator,
            params,
            topology: None,
            protocol: Protocol::Odcf,
            duration_s: DEFAULT_DURATION_S,
            seed: 1,
            overrides: Overrides::default(),
            capacity_trace: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            SimError::Config(msg) => SimError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(SimError::Config(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        self.protocol_params().validate()?;
        self.timing().validate().map_err(SimError::Config)?;
        let topo = self.build_topology()?;
        for entry in &self.capacity_trace {
            if entry.link >= topo.len() {
                return Err(SimError::Config(format!(
                    "capacity_trace link {} out of range",
                    entry.link
                )));
            }
            if entry.steps.iter().any(|&(t, c)| !(t >= 0.0 && c > 0.0)) {
                return Err(SimError::Config(
                    "capacity_trace steps need time >= 0 and rate > 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn timing(&self) -> TimingParams {
        self.overrides.timing.clone().unwrap_or_default()
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            odcf: self.overrides.odcf.clone().unwrap_or_default(),
            baselines: self.overrides.baselines.clone().unwrap_or_default(),
        }
    }

    pub fn build_topology(&self) -> Result<Topology> {
        let g = self.generator;
        let p = &self.params;
        if g != Generator::Explicit && self.topology.is_some() {
            return Err(SimError::Config(
                "`topology` is only allowed with generator \"explicit\"".into(),
            ));
        }
        let mut topo = match g {
            Generator::Fc => topology::make_fc(typed_params::<FcParams>(g, p)?.n)?,
            Generator::Fim => topology::make_fim(typed_params::<FimParams>(g, p)?.outer)?,
            Generator::Grid => topology::make_grid(&typed_params::<GridParams>(g, p)?)?,
            Generator::Random => topology::make_random(&typed_params::<RandomParams>(g, p)?)?,
            Generator::Explicit => {
                typed_params::<NoParams>(g, p)?;
                let explicit = self.topology.as_ref().ok_or_else(|| {
                    SimError::Config("generator \"explicit\" needs a `topology` object".into())
                })?;
                let mut caps = vec![f64::NAN; explicit.links.len()];
                for l in &explicit.links {
                    match caps.get_mut(l.id) {
                        Some(c) if c.is_nan() => *c = l.capacity_mbps,
                        _ => {
                            return Err(SimError::Config(format!(
                                "link ids must be 0..{} without repeats (got {})",
                                explicit.links.len(),
                                l.id
                            )))
                        }
                    }
                }
                Topology::from_relations(
                    self.name.clone(),
                    &caps,
                    &explicit.sense,
                    &explicit.interfere,
                    &explicit.capture,
                )?
            }
            named => {
                typed_params::<NoParams>(g, p)?;
                match named {
                    Generator::Ht => topology::make_ht(),
                    Generator::Ia => topology::make_ia(),
                    Generator::HtCapture => topology::make_ht_capture(),
                    Generator::MixedFimFc => topology::make_mixed_fim_fc(),
                    _ => topology::make_fc_in_fim(),
                }
            }
        };
        if let Some(caps) = &self.overrides.capacities_mbps {
            if caps.len() != topo.len() {
                return Err(SimError::Config(format!(
                    "capacities_mbps has {} entries for {} links",
                    caps.len(),
                    topo.len()
                )));
            }
            for (l, &c) in caps.iter().enumerate() {
                topo.set_capacity(l, c)?;
            }
        }
        Ok(topo)
    }

    pub fn capacity_steps(&self) -> Vec<CapacityStep> {
        self.capacity_trace
            .iter()
            .flat_map(|e| {
                e.steps.iter().map(move |&(time_s, mbps)| CapacityStep {
                    link: e.link,
                    time_s,
                    mbps,
                })
            })
            .collect()
    }

    /// Engine settings for one replication with the given seed.
    pub fn engine_config(&self, topo: &Topology, seed: u64) -> EngineConfig {
        EngineConfig {
            duration_s: self.duration_s,
            seed,
            rts_cts: self
                .overrides
                .rts_cts
                .unwrap_or_else(|| topo.has_imperfect_sensing()),
            timing: self.timing(),
            capacity_trace: self.capacity_steps(),
            event_log: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_named_generator_with_defaults() {
        let cfg = ScenarioConfig::from_json(
            r#"{"name":"f","generator":"fim","params":{"outer":3},"protocol":"dcf"}"#,
        )
        .unwrap();
        assert_eq!(cfg.protocol, Protocol::Dcf);
        assert_eq!(cfg.duration_s, DEFAULT_DURATION_S);
        assert_eq!(cfg.build_topology().unwrap().len(), 4);
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let err = ScenarioConfig::from_json("{\"name\":\"x\",\n\"generator\":\"fc\",\"colour\":1}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("colour") && err.contains("line 2"), "{err}");
        let err = ScenarioConfig::from_json(r#"{"name":"x","generator":"fc","params":{"m":3}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("unknown field"), "{err}");
        let err = ScenarioConfig::from_json(
            r#"{"name":"x","generator":"ht","overrides":{"odcf":{"queue":{"w":1}}}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::Config(_)));
    }

    #[test]
    fn explicit_topology() {
        let cfg = ScenarioConfig::from_json(
            r#"{"name":"pair","generator":"explicit",
                "topology":{"links":[{"id":0,"capacity_mbps":6},{"id":1,"capacity_mbps":48}],
                            "sense":[[0,1],[1,0]],"interfere":[[0,1],[1,0]]}}"#,
        )
        .unwrap();
        let topo = cfg.build_topology().unwrap();
        assert_eq!(topo.capacities(), vec![6.0, 48.0]);
        assert!(topo.senses(0, 1));
        assert!(!cfg.engine_config(&topo, 1).rts_cts);
    }

    #[test]
    fn rts_defaults_follow_sensing_quality() {
        let cfg = ScenarioConfig::from_json(r#"{"name":"h","generator":"ht"}"#).unwrap();
        let topo = cfg.build_topology().unwrap();
        assert!(cfg.engine_config(&topo, 1).rts_cts);
    }

    #[test]
    fn trace_and_override_checks() {
        let bad = r#"{"name":"h","generator":"ht","capacity_trace":[{"link":5,"steps":[[1,6]]}]}"#;
        assert!(ScenarioConfig::from_json(bad).is_err());
        let bad = r#"{"name":"h","generator":"ht","overrides":{"capacities_mbps":[6]}}"#;
        assert!(ScenarioConfig::from_json(bad).is_err());
        let ok = r#"{"name":"h","generator":"ht","capacity_trace":[{"link":1,"steps":[[60,6]]}]}"#;
        let cfg = ScenarioConfig::from_json(ok).unwrap();
        assert_eq!(cfg.capacity_steps()[0].mbps, 6.0);
    }
}
