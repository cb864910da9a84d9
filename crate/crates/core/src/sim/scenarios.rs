//! Scenario files and the built-in catalog of planted-policy fixtures.
//!
//! | name                       | planted policy                                              |
//! |----------------------------|-------------------------------------------------------------|
//! | `adjacent-filter`          | AS8283 peers with the origin and drops invalid routes       |
//! | `route-server-filter`      | AS50300 drops invalid routes on route-server sessions only  |
//! | `non-adjacent-filter`      | AS59715 filters one provider hop away from the origin       |
//! | `non-adjacent-filter-2vp`  | as above with a second vantage point behind the filterer    |
//! | `traffic-engineering`      | three multihomed origins, /16 ROAs, /24s to one upstream    |
//! | `prefer-valid`             | AS64530 prefers valid routes from two origins               |
//! | `prefer-valid-filter`      | the same position with a filtering AS                       |
//! | `non-revalidating-filter`  | `adjacent-filter` with a router that never revalidates      |

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::engine::{run, Timeline};
use super::topology::{AsNode, Link, PolicyScope, RovPolicy, Topology};
use super::{EventKind, SimError, SimEvent};
use crate::asn::Asn;
use crate::experiment::{ConfigId, ExperimentPlan, PreferValidPlan, ScheduleStep, DEFAULT_HOLD};
use crate::io::read_input;
use crate::prefix::IpPrefix;
use crate::rpki::{RoaSet, Vrp};

pub const SCHEMA_VERSION: u32 = 1;

/// The announcing testbed AS.
pub const PRIMARY_ORIGIN: Asn = Asn(47065);
/// Origin that the experiment prefix's ROA is moved to in configuration C2.
pub const ALTERNATE_ORIGIN: Asn = Asn(61574);
pub const PREFER_VALID_ORIGINS: [Asn; 2] = [Asn(61575), Asn(61576)];

pub const REFERENCE_PREFIX: &str = "184.164.224.0/24";
pub const EXPERIMENT_PREFIX: &str = "184.164.225.0/24";

/// Policies planted in a scenario, for checking inferences against.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(default)]
    pub filter_invalid: BTreeSet<Asn>,
    #[serde(default)]
    pub prefer_valid: BTreeSet<Asn>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Seeds unset propagation delays.
    #[serde(default)]
    pub seed: u64,
    pub horizon: u64,
    pub nodes: Vec<AsNode>,
    pub links: Vec<Link>,
    /// ROAs every AS knows from time 0.
    #[serde(default)]
    pub initial_roas: Vec<Vrp>,
    #[serde(default)]
    pub events: Vec<SimEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
    /// Default plan for controlled experiments on this topology.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<ExperimentPlan>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let bytes = read_input(path)?;
        Self::from_json(&String::from_utf8_lossy(&bytes))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Schema version, VRP sanity, topology validity and connectivity from
    /// every announcing origin.
    pub fn check(&self) -> Result<(), SimError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SimError::Scenario(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for v in self.initial_roas.iter().chain(self.events.iter().flat_map(|e| match &e.kind {
            EventKind::RoaUpdate { add, remove } => add.iter().chain(remove).collect::<Vec<_>>(),
            _ => Vec::new(),
        })) {
            Vrp::new(v.prefix, v.max_length, v.origin_asn)
                .map_err(|e| SimError::Scenario(e.to_string()))?;
        }
        let topo = self.topology()?;
        for origin in self.origins() {
            topo.check_connected_from(origin)?;
        }
        Ok(())
    }

    /// ASes that announce something in the events or the plan.
    pub fn origins(&self) -> BTreeSet<Asn> {
        let mut out: BTreeSet<Asn> = self
            .events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Announce { origin, .. } => Some(*origin),
                _ => None,
            })
            .collect();
        if let Some(plan) = &self.plan {
            out.extend(plan.announcing_origins());
        }
        out
    }

    pub fn topology(&self) -> Result<Topology, SimError> {
        Topology::new(self.nodes.clone(), self.links.clone(), self.seed)
    }

    pub fn initial_roa_set(&self) -> RoaSet {
        self.initial_roas.iter().copied().collect()
    }

    /// Runs the scenario's own events (stably sorted by time).
    pub fn timeline(&self) -> Result<Timeline, SimError> {
        let mut events = self.events.clone();
        events.sort_by_key(|e| e.time);
        run(&self.topology()?, self.initial_roa_set(), &events, self.horizon)
    }

    /// Planted policies read off the nodes.
    pub fn planted(&self) -> GroundTruth {
        let pick = |p| {
            self.nodes
                .iter()
                .filter(|n| n.rov_policy == p)
                .map(|n| n.asn)
                .collect()
        };
        GroundTruth {
            filter_invalid: pick(RovPolicy::FilterInvalid),
            prefer_valid: pick(RovPolicy::PreferValid),
        }
    }
}

#[derive(Clone, Copy, Debug, Eq, PartialEq, Ord, PartialOrd)]
pub enum ScenarioKind {
    AdjacentFilter,
    RouteServerFilter,
    NonAdjacentFilter,
    NonAdjacentFilterTwoVps,
    TrafficEngineering,
    PreferValid,
    PreferValidFilter,
    NonRevalidatingFilter,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::AdjacentFilter,
        ScenarioKind::RouteServerFilter,
        ScenarioKind::NonAdjacentFilter,
        ScenarioKind::NonAdjacentFilterTwoVps,
        ScenarioKind::TrafficEngineering,
        ScenarioKind::PreferValid,
        ScenarioKind::PreferValidFilter,
        ScenarioKind::NonRevalidatingFilter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::AdjacentFilter => "adjacent-filter",
            ScenarioKind::RouteServerFilter => "route-server-filter",
            ScenarioKind::NonAdjacentFilter => "non-adjacent-filter",
            ScenarioKind::NonAdjacentFilterTwoVps => "non-adjacent-filter-2vp",
            ScenarioKind::TrafficEngineering => "traffic-engineering",
            ScenarioKind::PreferValid => "prefer-valid",
            ScenarioKind::PreferValidFilter => "prefer-valid-filter",
            ScenarioKind::NonRevalidatingFilter => "non-revalidating-filter",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = SimError;

    /// Accepts catalog names and the single-letter aliases `a`-`f`.
    fn from_str(s: &str) -> Result<Self, SimError> {
        let alias = match s {
            "a" => Some(ScenarioKind::AdjacentFilter),
            "b" => Some(ScenarioKind::RouteServerFilter),
            "c" => Some(ScenarioKind::NonAdjacentFilter),
            "d" => Some(ScenarioKind::TrafficEngineering),
            "e" => Some(ScenarioKind::PreferValid),
            "f" => Some(ScenarioKind::NonRevalidatingFilter),
            _ => None,
        };
        alias
            .or_else(|| ScenarioKind::ALL.into_iter().find(|k| k.name() == s))
            .ok_or_else(|| SimError::UnknownScenario(s.to_string()))
    }
}

fn prefix(s: &str) -> IpPrefix {
    s.parse().expect("catalog prefixes are valid")
}

fn filter_plan() -> ExperimentPlan {
    ExperimentPlan {
        reference_prefix: prefix(REFERENCE_PREFIX),
        experiment_prefix: prefix(EXPERIMENT_PREFIX),
        primary_origin: PRIMARY_ORIGIN,
        alternate_origin: ALTERNATE_ORIGIN,
        announce_sessions: None,
        prefer_valid: None,
        schedule: vec![
            ScheduleStep {
                config: ConfigId::C1,
                hold: DEFAULT_HOLD,
            },
            ScheduleStep {
                config: ConfigId::C2,
                hold: DEFAULT_HOLD,
            },
        ],
        rounds: 3,
    }
}

/// One C1 -> C2 cycle of `plan` as plain simulator events, so `simulate`
/// shows what the experiment would see.
fn plan_events(plan: &ExperimentPlan) -> (Vec<Vrp>, Vec<SimEvent>, u64) {
    let c1 = plan.roas(ConfigId::C1);
    let c2 = plan.roas(ConfigId::C2);
    let hold = plan.schedule.iter().map(|s| s.hold).max().unwrap_or(DEFAULT_HOLD);
    let mut events = Vec::new();
    for (origin, sessions) in plan.announcements() {
        for p in [plan.reference_prefix, plan.experiment_prefix] {
            events.push(SimEvent {
                time: 0,
                kind: EventKind::Announce {
                    prefix: p,
                    origin,
                    sessions: sessions.clone(),
                },
            });
        }
    }
    let add: Vec<Vrp> = c2.iter().filter(|v| !c1.contains(v)).copied().collect();
    let remove: Vec<Vrp> = c1.iter().filter(|v| !c2.contains(v)).copied().collect();
    events.push(SimEvent {
        time: hold,
        kind: EventKind::RoaUpdate { add, remove },
    });
    (c1, events, 2 * hold)
}

fn experiment_scenario(
    kind: ScenarioKind,
    description: &str,
    nodes: Vec<AsNode>,
    links: Vec<Link>,
    plan: ExperimentPlan,
) -> Scenario {
    let (initial_roas, events, horizon) = plan_events(&plan);
    let mut s = Scenario {
        schema_version: SCHEMA_VERSION,
        name: kind.name().to_string(),
        description: description.to_string(),
        seed: 1,
        horizon,
        nodes,
        links,
        initial_roas,
        events,
        ground_truth: None,
        plan: Some(plan),
    };
    s.ground_truth = Some(s.planted());
    s
}

/// Builds a catalog scenario. Every call returns the same fixture.
pub fn plant_scenario(kind: ScenarioKind) -> Scenario {
    let o = PRIMARY_ORIGIN.0;
    match kind {
        ScenarioKind::AdjacentFilter | ScenarioKind::NonRevalidatingFilter => {
            let mut filterer = AsNode::new(8283).policy(RovPolicy::FilterInvalid).vp();
            let description = if kind == ScenarioKind::AdjacentFilter {
                "AS8283 peers with the origin and drops invalid routes; AS64503 sits behind it"
            } else {
                filterer = filterer.non_revalidating();
                "AS8283 drops invalid routes but only evaluates them on arrival"
            };
            experiment_scenario(
                kind,
                description,
                vec![
                    AsNode::new(o),
                    filterer,
                    AsNode::new(64501),
                    AsNode::new(64502).vp(),
                    AsNode::new(64503).vp(),
                ],
                vec![
                    Link::peer(8283, o),
                    Link::provider(64501, o),
                    Link::provider(64501, 8283),
                    Link::provider(64501, 64502),
                    Link::provider(8283, 64503),
                ],
                filter_plan(),
            )
        }
        ScenarioKind::RouteServerFilter => experiment_scenario(
            kind,
            "AS50300 filters invalid routes learned over route-server sessions but \
             accepts them from its transit provider",
            vec![
                AsNode::new(o),
                AsNode::new(50300)
                    .policy(RovPolicy::FilterInvalid)
                    .scope(PolicyScope::RouteServerSessionsOnly)
                    .vp(),
                AsNode::new(64511),
                AsNode::new(64512).vp(),
            ],
            vec![
                Link::peer(50300, o).route_server(),
                Link::provider(64511, o),
                Link::provider(64511, 50300),
                Link::provider(50300, 64512),
            ],
            filter_plan(),
        ),
        ScenarioKind::NonAdjacentFilter | ScenarioKind::NonAdjacentFilterTwoVps => {
            let mut nodes = vec![
                AsNode::new(o),
                AsNode::new(64521),
                AsNode::new(59715).policy(RovPolicy::FilterInvalid),
                AsNode::new(64522).vp(),
                AsNode::new(64524).vp(),
            ];
            let mut links = vec![
                Link::provider(64521, o),
                Link::provider(64521, 59715),
                Link::provider(59715, 64522),
                Link::provider(64521, 64524),
            ];
            if kind == ScenarioKind::NonAdjacentFilterTwoVps {
                nodes.push(AsNode::new(64523).vp());
                links.push(Link::provider(59715, 64523));
            }
            experiment_scenario(
                kind,
                "AS59715 filters invalid routes one hop behind the origin's provider AS64521",
                nodes,
                links,
                filter_plan(),
            )
        }
        ScenarioKind::PreferValid | ScenarioKind::PreferValidFilter => {
            let policy = if kind == ScenarioKind::PreferValid {
                RovPolicy::PreferValid
            } else {
                RovPolicy::FilterInvalid
            };
            let [a, b] = PREFER_VALID_ORIGINS;
            let mut plan = filter_plan();
            plan.primary_origin = a;
            plan.prefer_valid = Some(PreferValidPlan {
                origins: [a, b],
                sessions: [None, None],
            });
            experiment_scenario(
                kind,
                "AS64530 hears the same prefixes from two origins, both customers",
                vec![
                    AsNode::new(a.0),
                    AsNode::new(b.0),
                    AsNode::new(64530).policy(policy).vp(),
                    AsNode::new(64531).vp(),
                ],
                vec![
                    Link::provider(64530, a.0),
                    Link::provider(64530, b.0),
                    Link::provider(64530, 64531),
                ],
                plan,
            )
        }
        ScenarioKind::TrafficEngineering => traffic_engineering(),
    }
}

/// Origins 64551-64553 buy transit from the peering tier-1s A=64540 and
/// B=64541, hold ROAs for their /16s only, and send the /16 to B and a
/// /24 to A. Nobody validates anything.
fn traffic_engineering() -> Scenario {
    let (a, b) = (64540, 64541);
    let mut nodes = vec![AsNode::new(a), AsNode::new(b), AsNode::new(64561).vp(), AsNode::new(64563).vp()];
    let mut links = vec![
        Link::peer(a, b),
        Link::provider(a, 64561),
        Link::provider(b, 64561),
        Link::provider(a, 64563),
    ];
    let mut roas = Vec::new();
    let mut events = Vec::new();
    for (i, o) in [64551u32, 64552, 64553].into_iter().enumerate() {
        nodes.push(AsNode::new(o));
        links.push(Link::provider(a, o));
        links.push(Link::provider(b, o));
        let block = prefix(&format!("10.{}.0.0/16", 10 + i));
        let more_specific = prefix(&format!("10.{}.1.0/24", 10 + i));
        roas.push(Vrp::exact(block, Asn(o)));
        for (p, to) in [(block, b), (more_specific, a)] {
            events.push(SimEvent {
                time: 0,
                kind: EventKind::Announce {
                    prefix: p,
                    origin: Asn(o),
                    sessions: Some(vec![Asn(to)]),
                },
            });
        }
    }
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: ScenarioKind::TrafficEngineering.name().to_string(),
        description: "multihomed origins announce a /24 to one upstream and the covering /16 \
                      (the only prefix with a ROA) to the other; no ROV anywhere"
            .to_string(),
        seed: 1,
        horizon: 3600,
        nodes,
        links,
        initial_roas: roas,
        events,
        ground_truth: Some(GroundTruth::default()),
        plan: None,
    }
}
