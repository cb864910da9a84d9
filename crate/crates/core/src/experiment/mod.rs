//! Controlled experiments: announce a reference prefix P_R and an
//! experiment prefix P_E, flip P_E's ROA between configurations, and
//! infer ROV policies from what each vantage point sees.
//!
//! * C1: both announcements are valid.
//! * C2: P_E's ROA names a different origin, so its announcement is
//!   invalid.
//!
//! Per vantage point and round the C2 snapshot yields O1 (same route for
//! both prefixes), O2 (different route for P_E) or O3 (no route for P_E).

mod driver;
mod filter;
mod infer;
mod prefer_valid;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asn::Asn;
use crate::prefix::IpPrefix;
use crate::rib::VantagePoint;
use crate::rpki::Vrp;
use crate::sim::SimError;

pub use driver::{Driver, DriverError, RecordedDriver, SimDriver};
pub use filter::{run_filter_experiment, run_withdraw_reannounce_variant, Variant};
pub use infer::{
    infer_filtering, AsVerdict, CandidateSet, EvidenceBasis, PolicyInference, SessionEvidence,
    Verdict, VpConsistency,
};
pub use prefer_valid::{
    run_prefer_valid_experiment, PreferValidOutcome, SwitchEvidence, TrackingObservation,
};

/// Eight hours, enough for slow relying-party refresh cycles.
pub const DEFAULT_HOLD: u64 = 8 * 3600;
pub const DEFAULT_ROUNDS: u32 = 3;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("driver: {0}")]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("no round completed ({0} voided)")]
    NoCompletedRounds(usize),
}

#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum ConfigId {
    C1,
    C2,
}

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfigId::C1 => "C1",
            ConfigId::C2 => "C2",
        })
    }
}

fn default_hold() -> u64 {
    DEFAULT_HOLD
}

fn default_rounds() -> u32 {
    DEFAULT_ROUNDS
}

fn default_schedule() -> Vec<ScheduleStep> {
    vec![
        ScheduleStep {
            config: ConfigId::C1,
            hold: DEFAULT_HOLD,
        },
        ScheduleStep {
            config: ConfigId::C2,
            hold: DEFAULT_HOLD,
        },
    ]
}

#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleStep {
    pub config: ConfigId,
    /// Seconds to keep the configuration before taking a snapshot.
    #[serde(default = "default_hold")]
    pub hold: u64,
}

/// Two origins announcing the same prefixes; C1 validates P_E from the
/// first, C2 from the second.
#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferValidPlan {
    pub origins: [Asn; 2],
    /// Announcement sites per origin: neighbors to announce to, all when
    /// absent.
    #[serde(default)]
    pub sessions: [Option<Vec<Asn>>; 2],
}

#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub reference_prefix: IpPrefix,
    pub experiment_prefix: IpPrefix,
    pub primary_origin: Asn,
    /// The origin P_E's ROA names in C2.
    pub alternate_origin: Asn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub announce_sessions: Option<Vec<Asn>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefer_valid: Option<PreferValidPlan>,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<ScheduleStep>,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Plan(e.to_string()))
    }

    /// Checks the plan against a driver whose slowest AS picks up ROA
    /// changes after `max_roa_delay` seconds.
    pub fn validate(&self, max_roa_delay: u64) -> Result<(), ExperimentError> {
        let err = |m: String| Err(ExperimentError::Plan(m));
        let (r, e) = (self.reference_prefix, self.experiment_prefix);
        if r == e {
            return err("reference and experiment prefix are identical".into());
        }
        if r.family() != e.family() {
            return err("reference and experiment prefix differ in address family".into());
        }
        let block = |p: IpPrefix| p.supernet(p.len().min(16));
        if r.len() < 16 || e.len() < 16 || block(r) != block(e) {
            return err(format!("{r} and {e} are not drawn from one /16 block"));
        }
        if self.rounds == 0 {
            return err("rounds must be at least 1".into());
        }
        for c in [ConfigId::C1, ConfigId::C2] {
            if !self.schedule.iter().any(|s| s.config == c) {
                return err(format!("schedule has no {c} step"));
            }
        }
        if let Some(s) = self.schedule.iter().find(|s| s.hold < max_roa_delay) {
            return err(format!(
                "hold {}s for {} is shorter than the largest ROA delay {max_roa_delay}s",
                s.hold, s.config
            ));
        }
        if self.alternate_origin == self.primary_origin {
            return err("alternate origin equals the primary origin".into());
        }
        if let Some(pv) = &self.prefer_valid {
            if pv.origins[0] == pv.origins[1] {
                return err("prefer-valid origins must differ".into());
            }
            if pv.origins.contains(&self.alternate_origin) {
                return err("alternate origin must differ from the prefer-valid origins".into());
            }
        }
        Ok(())
    }

    /// The experiment-controlled VRPs in configuration `c`.
    pub fn roas(&self, c: ConfigId) -> Vec<Vrp> {
        let (r, e) = (self.reference_prefix, self.experiment_prefix);
        match &self.prefer_valid {
            None => {
                let pe_origin = match c {
                    ConfigId::C1 => self.primary_origin,
                    ConfigId::C2 => self.alternate_origin,
                };
                vec![Vrp::exact(r, self.primary_origin), Vrp::exact(e, pe_origin)]
            }
            Some(pv) => {
                let valid = match c {
                    ConfigId::C1 => pv.origins[0],
                    ConfigId::C2 => pv.origins[1],
                };
                vec![
                    Vrp::exact(r, pv.origins[0]),
                    Vrp::exact(r, pv.origins[1]),
                    Vrp::exact(e, valid),
                ]
            }
        }
    }

    /// Origins and the sessions they announce on.
    pub fn announcements(&self) -> Vec<(Asn, Option<Vec<Asn>>)> {
        match &self.prefer_valid {
            None => vec![(self.primary_origin, self.announce_sessions.clone())],
            Some(pv) => vec![
                (pv.origins[0], pv.sessions[0].clone()),
                (pv.origins[1], pv.sessions[1].clone()),
            ],
        }
    }

    pub fn announcing_origins(&self) -> BTreeSet<Asn> {
        self.announcements().into_iter().map(|(a, _)| a).collect()
    }

    /// Whether `vrp` bears on the experiment prefixes, so that the
    /// experiment, not the environment, decides whether it exists.
    pub fn controls(&self, vrp: &Vrp) -> bool {
        [self.reference_prefix, self.experiment_prefix]
            .iter()
            .any(|p| vrp.prefix.contains(p) || p.contains(&vrp.prefix))
    }
}

#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IneligibleReason {
    /// No route to the reference prefix in C1.
    NoRouteToReference,
    /// The reference and experiment prefixes took different routes in C1.
    DifferingRoutesInC1,
}

#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum ObservationClass {
    #[serde(rename = "O1_same_route")]
    O1,
    #[serde(rename = "O2_different_route")]
    O2,
    #[serde(rename = "O3_no_route")]
    O3,
    #[serde(rename = "ineligible")]
    Ineligible(IneligibleReason),
}

impl ObservationClass {
    pub fn is_eligible(self) -> bool {
        !matches!(self, ObservationClass::Ineligible(_))
    }
}

impl fmt::Display for ObservationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservationClass::O1 => f.write_str("O1"),
            ObservationClass::O2 => f.write_str("O2"),
            ObservationClass::O3 => f.write_str("O3"),
            ObservationClass::Ineligible(r) => write!(f, "ineligible({r:?})"),
        }
    }
}

/// One vantage point's outcome in one round. Paths are prepend-compressed,
/// neighbor first, origin last.
#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub vp: VantagePoint,
    pub round: u32,
    /// The configuration classified (C2 for filter experiments).
    pub config: ConfigId,
    pub class: ObservationClass,
    /// P_R's route in C1, which P_E shared there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_path: Option<Vec<Asn>>,
    /// P_R's route in the classified configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_path: Option<Vec<Asn>>,
    /// P_E's route in the classified configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment_path: Option<Vec<Asn>>,
    /// Whether the vantage point hears its C1 route over a route-server
    /// session, when the driver knows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_hop_via_route_server: Option<bool>,
}

#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub struct VoidedRound {
    pub round: u32,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub observations: Vec<Observation>,
    pub voided_rounds: Vec<VoidedRound>,
    pub completed_rounds: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{plant_scenario, ScenarioKind};

    fn plan() -> ExperimentPlan {
        plant_scenario(ScenarioKind::AdjacentFilter).plan.unwrap()
    }

    #[test]
    fn plan_validation() {
        let p = plan();
        assert!(p.validate(3600).is_ok());
        assert!(p.validate(DEFAULT_HOLD + 1).is_err());
        let mut q = p.clone();
        q.experiment_prefix = q.reference_prefix;
        assert!(q.validate(0).is_err());
        let mut q = p.clone();
        q.experiment_prefix = "184.165.225.0/24".parse().unwrap();
        assert!(q.validate(0).is_err());
        let mut q = p.clone();
        q.rounds = 0;
        assert!(q.validate(0).is_err());
        let mut q = p.clone();
        q.schedule.retain(|s| s.config == ConfigId::C1);
        assert!(q.validate(0).is_err());
    }

    #[test]
    fn plan_json_defaults() {
        let p = ExperimentPlan::from_json(
            r#"{"reference_prefix": "184.164.224.0/24", "experiment_prefix": "184.164.225.0/24",
                "primary_origin": 47065, "alternate_origin": 61574}"#,
        )
        .unwrap();
        assert_eq!(p.rounds, DEFAULT_ROUNDS);
        assert_eq!(p.schedule, default_schedule());
        assert!(ExperimentPlan::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn configuration_roas() {
        let p = plan();
        let c1 = p.roas(ConfigId::C1);
        let c2 = p.roas(ConfigId::C2);
        assert!(c1.iter().all(|v| v.origin_asn == p.primary_origin));
        assert_eq!(c2[1].origin_asn, p.alternate_origin);
    }

    #[test]
    fn controlled_vrps_overlap_the_experiment_prefixes() {
        let p = plan();
        let vrp = |s: &str| Vrp::exact(s.parse().unwrap(), Asn(1));
        assert!(p.controls(&vrp("184.164.224.0/24")));
        assert!(p.controls(&vrp("184.164.224.0/23")));
        assert!(p.controls(&vrp("184.164.225.128/25")));
        assert!(!p.controls(&vrp("184.164.226.0/24")));
        assert!(!p.controls(&vrp("2001:db8::/32")));
    }

    #[test]
    fn observation_class_json() {
        let s = serde_json::to_string(&ObservationClass::Ineligible(IneligibleReason::NoRouteToReference)).unwrap();
        assert_eq!(s, r#"{"ineligible":"no_route_to_reference"}"#);
        assert_eq!(serde_json::to_string(&ObservationClass::O3).unwrap(), r#""O3_no_route""#);
    }
}
