//! Event-driven propagation with synchronous convergence rounds.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use log::debug;

use super::topology::{NeighborClass, PolicyScope, PreferValidMode, RovPolicy, Session, Topology};
use super::{EventKind, SimError, SimEvent};
use crate::asn::Asn;
use crate::prefix::IpPrefix;
use crate::rib::{AsPath, RibEntry, RibSnapshot, VantagePoint};
use crate::rpki::{RoaSet, ValidationState};

/// Collector name used for simulated vantage points.
pub const SIM_COLLECTOR: &str = "sim";

/// Route preference, lowest wins: validity and relationship class (in the
/// node's configured order), compressed path length, neighbor ASN.
type RankKey = (u8, u8, usize, Asn);

/// A route held by an AS: learned from `from` (`None` for its own
/// origination), with the validation stamp from the ROA view it was last
/// evaluated under.
#[derive(Clone, Debug, Eq, PartialEq)]
pub struct Route {
    /// Neighbor first, origin last; empty for a local route.
    pub path: Vec<Asn>,
    pub from: Option<Asn>,
    pub state: ValidationState,
}

impl Route {
    pub fn origin(&self, local: Asn) -> Asn {
        self.path.last().copied().unwrap_or(local)
    }
}

#[derive(Clone, Debug, Default)]
struct NodeState {
    adj_in: BTreeMap<(IpPrefix, Asn), Route>,
    /// Local originations and the neighbors they go to (`None`: all).
    local: BTreeMap<IpPrefix, Option<BTreeSet<Asn>>>,
    best: BTreeMap<IpPrefix, Route>,
    view: usize,
}

/// Incremental simulator: schedule events, advance the clock, take
/// snapshots. Single-threaded and fully deterministic.
#[derive(Clone, Debug)]
pub struct Simulator {
    topo: Topology,
    state: BTreeMap<Asn, NodeState>,
    /// ROA sets by the time they were published; entry 0 is the initial
    /// set, known to every AS from the start.
    roa_history: Vec<(u64, Arc<RoaSet>)>,
    pending: Vec<SimEvent>,
    now: u64,
    round_limit: usize,
}

impl Simulator {
    pub fn new(topo: Topology, initial_roas: RoaSet) -> Self {
        let state = topo.nodes().map(|n| (n.asn, NodeState::default())).collect();
        let round_limit = 10 * topo.len().max(1);
        Simulator {
            topo,
            state,
            roa_history: vec![(0, Arc::new(initial_roas))],
            pending: Vec::new(),
            now: 0,
            round_limit,
        }
    }

    pub fn with_round_limit(mut self, rounds: usize) -> Self {
        self.round_limit = rounds;
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// The most recently published ROA set.
    pub fn published_roas(&self) -> &RoaSet {
        &self.roa_history.last().expect("initial entry").1
    }

    /// The ROA set `asn` currently acts on.
    pub fn roa_view(&self, asn: Asn) -> Option<&RoaSet> {
        let s = self.state.get(&asn)?;
        Some(&self.roa_history[s.view].1)
    }

    /// Queues an event. Events earlier than the current clock run at the
    /// next processing instant; equal times keep insertion order.
    pub fn schedule(&mut self, event: SimEvent) -> Result<(), SimError> {
        match &event.kind {
            EventKind::Announce { origin, .. } | EventKind::Withdraw { origin, .. } => {
                if self.topo.node(*origin).is_none() {
                    return Err(SimError::UnknownAs(*origin));
                }
            }
            EventKind::RoaUpdate { .. } => {}
        }
        let pos = self.pending.partition_point(|e| e.time <= event.time);
        self.pending.insert(pos, event);
        Ok(())
    }

    fn view_at(&self, asn: Asn, t: u64) -> usize {
        let delay = self.topo.delay(asn);
        self.roa_history
            .iter()
            .rposition(|(pt, _)| pt.saturating_add(delay) <= t)
            .unwrap_or(0)
    }

    /// The next time something happens: a queued event or an AS picking up
    /// a published ROA change.
    pub fn next_instant(&self) -> Option<u64> {
        let ev = self.pending.first().map(|e| e.time.max(self.now));
        let views = self
            .state
            .iter()
            .filter_map(|(asn, s)| {
                let (t, _) = self.roa_history.get(s.view + 1)?;
                Some(t.saturating_add(self.topo.delay(*asn)).max(self.now))
            })
            .min();
        match (ev, views) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Processes every instant up to and including `t`, then sets the clock
    /// to `t`. Returns the instants processed.
    pub fn advance_to(&mut self, t: u64) -> Result<Vec<u64>, SimError> {
        let mut done = Vec::new();
        while let Some(i) = self.next_instant().filter(|&i| i <= t) {
            self.process_instant(i)?;
            done.push(i);
        }
        self.now = self.now.max(t);
        Ok(done)
    }

    fn process_instant(&mut self, t: u64) -> Result<(), SimError> {
        self.now = t;
        let due = self.pending.partition_point(|e| e.time <= t);
        let events: Vec<SimEvent> = self.pending.drain(..due).collect();
        for ev in events {
            debug!("t={t}: {:?}", ev.kind);
            match ev.kind {
                EventKind::Announce {
                    prefix,
                    origin,
                    sessions,
                } => {
                    let s = self.state.get_mut(&origin).ok_or(SimError::UnknownAs(origin))?;
                    s.local.insert(prefix, sessions.map(|v| v.into_iter().collect()));
                }
                EventKind::Withdraw { prefix, origin } => {
                    let s = self.state.get_mut(&origin).ok_or(SimError::UnknownAs(origin))?;
                    s.local.remove(&prefix);
                }
                EventKind::RoaUpdate { add, remove } => {
                    let next = self.published_roas().apply_delta(&add, &remove);
                    self.roa_history.push((t, Arc::new(next)));
                }
            }
        }
        let asns: Vec<Asn> = self.state.keys().copied().collect();
        for asn in asns {
            let view = self.view_at(asn, t);
            let revalidates = self.topo.node(asn).is_none_or(|n| n.revalidates_on_roa_change);
            let roas = self.roa_history[view].1.clone();
            let s = self.state.get_mut(&asn).unwrap();
            if s.view == view {
                continue;
            }
            s.view = view;
            if revalidates {
                for ((prefix, _), r) in s.adj_in.iter_mut() {
                    r.state = roas.validate(r.origin(asn), prefix);
                }
            }
        }
        self.converge()
    }

    fn policy_applies(&self, local: Asn, neighbor: Asn, session: Session) -> bool {
        match &self.topo.node(local).expect("known node").policy_scope {
            PolicyScope::AllSessions => true,
            PolicyScope::RouteServerSessionsOnly => session.via_route_server,
            PolicyScope::ListedSessions(v) => v.contains(&neighbor),
        }
    }

    /// Best route per prefix for `asn` from its current Adj-RIB-In.
    fn select(&self, asn: Asn) -> BTreeMap<IpPrefix, Route> {
        let node = self.topo.node(asn).expect("known node");
        let s = &self.state[&asn];
        let roas = &self.roa_history[s.view].1;
        let mut best: BTreeMap<IpPrefix, (Route, RankKey)> = BTreeMap::new();
        for ((prefix, nbr), r) in &s.adj_in {
            if s.local.contains_key(prefix) || r.path.contains(&asn) {
                continue;
            }
            let session = self.topo.session(asn, *nbr).expect("routes arrive over links");
            let in_scope = self.policy_applies(asn, *nbr, session);
            if in_scope && node.rov_policy == RovPolicy::FilterInvalid && r.state.is_invalid() {
                continue;
            }
            let validity = if in_scope && node.rov_policy == RovPolicy::PreferValid {
                match r.state {
                    ValidationState::Valid => 0,
                    ValidationState::NotFound => 1,
                    ValidationState::Invalid => 2,
                }
            } else {
                0
            };
            let class = match session.class {
                NeighborClass::Customer => 0,
                NeighborClass::Peer => 1,
                NeighborClass::Provider => 2,
            };
            let len = AsPath::new(r.path.clone()).map_or(0, |p| p.compressed().len());
            let key = match node.prefer_valid_mode {
                PreferValidMode::AboveRelationship => (validity, class, len, *nbr),
                PreferValidMode::BelowRelationship => (class, validity, len, *nbr),
            };
            match best.get(prefix) {
                Some((_, k)) if *k <= key => {}
                _ => {
                    best.insert(*prefix, (r.clone(), key));
                }
            }
        }
        let mut out: BTreeMap<IpPrefix, Route> = best.into_iter().map(|(p, (r, _))| (p, r)).collect();
        for prefix in s.local.keys() {
            out.insert(
                *prefix,
                Route {
                    path: Vec::new(),
                    from: None,
                    state: roas.validate(asn, prefix),
                },
            );
        }
        out
    }

    /// Whether `asn` advertises `route` for `prefix` to `nbr`.
    fn exports(&self, asn: Asn, prefix: &IpPrefix, route: &Route, nbr: Asn, to: Session) -> bool {
        if route.from == Some(nbr) || route.path.contains(&nbr) {
            return false;
        }
        match route.from {
            None => match &self.state[&asn].local[prefix] {
                None => true,
                Some(sessions) => sessions.contains(&nbr),
            },
            Some(from) => {
                let learned = self.topo.session(asn, from).expect("linked").class;
                learned == NeighborClass::Customer || to.class == NeighborClass::Customer
            }
        }
    }

    fn converge(&mut self) -> Result<(), SimError> {
        let asns: Vec<Asn> = self.state.keys().copied().collect();
        let mut changed_last = BTreeSet::new();
        for _ in 0..self.round_limit {
            for &asn in &asns {
                let best = self.select(asn);
                self.state.get_mut(&asn).unwrap().best = best;
            }
            let mut inbox: BTreeMap<Asn, BTreeMap<(IpPrefix, Asn), Vec<Asn>>> = BTreeMap::new();
            for &asn in &asns {
                for (prefix, route) in &self.state[&asn].best {
                    for (nbr, _) in self.topo.sessions(asn) {
                        let to = self.topo.session(asn, nbr).expect("linked");
                        if self.exports(asn, prefix, route, nbr, to) {
                            let mut path = Vec::with_capacity(route.path.len() + 1);
                            path.push(asn);
                            path.extend(&route.path);
                            inbox.entry(nbr).or_default().insert((*prefix, asn), path);
                        }
                    }
                }
            }
            let mut changed = BTreeSet::new();
            for &asn in &asns {
                let incoming = inbox.remove(&asn).unwrap_or_default();
                let s = &self.state[&asn];
                let roas = &self.roa_history[s.view].1;
                let mut next = BTreeMap::new();
                for (key, path) in incoming {
                    let route = match s.adj_in.get(&key) {
                        Some(old) if old.path == path => old.clone(),
                        _ => Route {
                            state: roas.validate(*path.last().expect("non-empty"), &key.0),
                            from: Some(key.1),
                            path,
                        },
                    };
                    next.insert(key, route);
                }
                if next != s.adj_in {
                    changed.insert(asn);
                    self.state.get_mut(&asn).unwrap().adj_in = next;
                }
            }
            if changed.is_empty() {
                return Ok(());
            }
            changed_last = changed;
        }
        Err(SimError::NonConvergence {
            asn: changed_last.into_iter().next().unwrap_or(Asn::ZERO),
            rounds: self.round_limit,
        })
    }

    /// The route `asn` currently selects for `prefix`.
    pub fn best_route(&self, asn: Asn, prefix: &IpPrefix) -> Option<&Route> {
        self.state.get(&asn)?.best.get(prefix)
    }

    /// Routes every AS has selected, as (AS, prefix, route).
    pub fn all_best(&self) -> impl Iterator<Item = (Asn, &IpPrefix, &Route)> {
        self.state
            .iter()
            .flat_map(|(a, s)| s.best.iter().map(move |(p, r)| (*a, p, r)))
    }

    /// What a collector peering with every vantage point AS would record.
    pub fn snapshot(&self) -> RibSnapshot {
        let mut entries = Vec::new();
        for node in self.topo.nodes().filter(|n| n.is_vantage_point) {
            let vp = VantagePoint::new(SIM_COLLECTOR, node.asn, node.asn.0.to_string());
            for (prefix, r) in &self.state[&node.asn].best {
                if r.from.is_none() {
                    continue;
                }
                entries.push(RibEntry {
                    vp: vp.clone(),
                    prefix: *prefix,
                    path: AsPath::new(r.path.clone()).expect("learned routes have paths"),
                    timestamp: self.now,
                });
            }
        }
        RibSnapshot::from_entries(entries).0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimelinePoint {
    pub time: u64,
    pub snapshot: RibSnapshot,
}

/// Converged vantage point state after every processing instant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timeline {
    pub points: Vec<TimelinePoint>,
}

impl Timeline {
    /// The state in effect at time `t`.
    pub fn snapshot_at(&self, t: u64) -> Option<&RibSnapshot> {
        let i = self.points.partition_point(|p| p.time <= t);
        i.checked_sub(1).map(|i| &self.points[i].snapshot)
    }
}

/// Runs `events` (stably ordered by time) on `topo` until `horizon`.
pub fn run(
    topo: &Topology,
    initial_roas: RoaSet,
    events: &[SimEvent],
    horizon: u64,
) -> Result<Timeline, SimError> {
    let mut sim = Simulator::new(topo.clone(), initial_roas);
    for e in events {
        sim.schedule(e.clone())?;
    }
    let mut tl = Timeline::default();
    sim.converge()?;
    tl.points.push(TimelinePoint {
        time: 0,
        snapshot: sim.snapshot(),
    });
    while let Some(i) = sim.next_instant().filter(|&i| i <= horizon) {
        sim.process_instant(i)?;
        let snap = sim.snapshot();
        match tl.points.last_mut() {
            Some(p) if p.time == i => p.snapshot = snap,
            _ => tl.points.push(TimelinePoint { time: i, snapshot: snap }),
        }
    }
    Ok(tl)
}
