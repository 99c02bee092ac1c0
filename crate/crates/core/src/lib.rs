//! Slotted CSMA simulator for comparing O-DCF with DCF and queue-based
//! CSMA variants, plus a proportional-fairness oracle to score them.

pub mod baselines;
pub mod config;
pub mod engine;
pub mod error;
pub mod harness;
pub mod mac;
pub mod metrics;
pub mod odcf;
pub mod oracle;
pub mod protocol;
pub mod reproduce;
pub mod timing;
pub mod topology;

pub use engine::{run, EngineConfig, FlowStats, SimResult};
pub use error::{Result, SimError};
pub use mac::Mac;
pub use protocol::{make_macs, Protocol, ProtocolParams};
pub use timing::TimingParams;
pub use topology::Topology;
