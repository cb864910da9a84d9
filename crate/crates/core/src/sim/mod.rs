//! AS-level BGP propagation with per-AS ROV policies.
//!
//! Gao-Rexford import/export rules, ROAs that reach each AS after its own
//! propagation delay, and collector-style snapshots of the vantage point
//! ASes. Route servers are session attributes and never appear in paths.

mod engine;
mod scenarios;
mod topology;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asn::Asn;
use crate::prefix::IpPrefix;
use crate::rpki::Vrp;

pub use engine::{run, Route, Simulator, Timeline, TimelinePoint, SIM_COLLECTOR};
pub use scenarios::{
    plant_scenario, GroundTruth, Scenario, ScenarioKind, ALTERNATE_ORIGIN, EXPERIMENT_PREFIX,
    PREFER_VALID_ORIGINS, PRIMARY_ORIGIN, REFERENCE_PREFIX, SCHEMA_VERSION,
};
pub use topology::{
    AsNode, Link, LinkRelationship, NeighborClass, PolicyScope, PreferValidMode, RovPolicy,
    Session, Topology, DEFAULT_DELAY_RANGE,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("{0} is not part of the topology")]
    UnknownAs(Asn),
    #[error("no convergence within {rounds} rounds; routes still changing at {asn}")]
    NonConvergence { asn: Asn, rounds: usize },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("reading scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    Announce {
        prefix: IpPrefix,
        origin: Asn,
        /// Neighbors to announce to; all neighbors when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sessions: Option<Vec<Asn>>,
    },
    Withdraw {
        prefix: IpPrefix,
        origin: Asn,
    },
    RoaUpdate {
        #[serde(default)]
        add: Vec<Vrp>,
        #[serde(default)]
        remove: Vec<Vrp>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    /// Simulated seconds.
    pub time: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}
