//! Protocol selection and per-link MAC construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineParams, DcfMac, DiffqMac, OcsmaCwMac, OcsmaMuMac};
use crate::error::SimError;
use crate::mac::Mac;
use crate::odcf::{OdcfMac, OdcfParams};
use crate::timing::TimingParams;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Odcf,
    Dcf,
    OcsmaCw,
    OcsmaMu,
    Diffq,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Odcf,
        Protocol::Dcf,
        Protocol::OcsmaCw,
        Protocol::OcsmaMu,
        Protocol::Diffq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Odcf => "odcf",
            Protocol::Dcf => "dcf",
            Protocol::OcsmaCw => "ocsma_cw",
            Protocol::OcsmaMu => "ocsma_mu",
            Protocol::Diffq => "diffq",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                SimError::InvalidArgument(format!(
                    "unknown protocol `{s}` (expected one of odcf, dcf, ocsma_cw, ocsma_mu, diffq)"
                ))
            })
    }
}

/// Tunables of every protocol; only the selected protocol's part is used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolParams {
    pub odcf: OdcfParams,
    pub baselines: BaselineParams,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), SimError> {
        self.odcf.validate().map_err(SimError::Config)?;
        self.baselines
            .validate(self.odcf.queue.q_max)
            .map_err(SimError::Config)
    }
}

/// One MAC instance per link of `topology`.
pub fn make_macs(
    protocol: Protocol,
    topology: &Topology,
    params: &ProtocolParams,
    timing: &TimingParams,
) -> Vec<Box<dyn Mac>> {
    let queue = &params.odcf.queue;
    let base = &params.baselines;
    topology
        .capacities()
        .into_iter()
        .map(|cap| -> Box<dyn Mac> {
            match protocol {
                Protocol::Odcf => Box::new(OdcfMac::new(params.odcf.clone(), timing.clone(), cap)),
                Protocol::Dcf => Box::new(DcfMac::new(base, timing.clone())),
                Protocol::OcsmaCw => Box::new(OcsmaCwMac::new(
                    queue.clone(),
                    params.odcf.c,
                    base,
                    timing.clone(),
                )),
                Protocol::OcsmaMu => Box::new(OcsmaMuMac::new(queue.clone(), base, timing.clone())),
                Protocol::Diffq => Box::new(DiffqMac::new(queue.clone(), base.clone(), timing.clone())),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::make_fc;

    #[test]
    fn names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.as_str().parse::<Protocol>().unwrap(), p);
        }
        assert!("csma".parse::<Protocol>().is_err());
    }

    #[test]
    fn one_mac_per_link() {
        let topo = make_fc(3).unwrap();
        for p in Protocol::ALL {
            let macs = make_macs(p, &topo, &ProtocolParams::default(), &TimingParams::default());
            assert_eq!(macs.len(), 3);
            assert_eq!(macs[0].name(), p.as_str());
        }
    }
}
