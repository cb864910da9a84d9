//! AS nodes, business-relationship links and their validation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::asn::Asn;

/// Default ROA propagation delay bounds in seconds (10 to 60 minutes).
pub const DEFAULT_DELAY_RANGE: (u64, u64) = (600, 3600);

#[derive(Clone, Copy, Debug, Default, Eq, Hash, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RovPolicy {
    #[default]
    None,
    FilterInvalid,
    PreferValid,
}

/// Which import sessions the ROV policy applies to.
#[derive(Clone, Debug, Default, Eq, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyScope {
    #[default]
    AllSessions,
    RouteServerSessionsOnly,
    /// Sessions with these neighbors only.
    ListedSessions(Vec<Asn>),
}

/// Where validity ranks relative to the relationship class for
/// prefer-valid nodes.
#[derive(Clone, Copy, Debug, Default, Eq, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferValidMode {
    #[default]
    AboveRelationship,
    BelowRelationship,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsNode {
    pub asn: Asn,
    #[serde(default)]
    pub rov_policy: RovPolicy,
    #[serde(default)]
    pub policy_scope: PolicyScope,
    #[serde(default = "yes")]
    pub revalidates_on_roa_change: bool,
    /// Seconds between a ROA change and this AS acting on it. Unset means
    /// a seeded draw from [`DEFAULT_DELAY_RANGE`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roa_propagation_delay: Option<u64>,
    #[serde(default)]
    pub is_vantage_point: bool,
    #[serde(default)]
    pub prefer_valid_mode: PreferValidMode,
}

impl AsNode {
    pub fn new(asn: u32) -> Self {
        AsNode {
            asn: Asn(asn),
            rov_policy: RovPolicy::None,
            policy_scope: PolicyScope::AllSessions,
            revalidates_on_roa_change: true,
            roa_propagation_delay: None,
            is_vantage_point: false,
            prefer_valid_mode: PreferValidMode::AboveRelationship,
        }
    }

    pub fn vp(mut self) -> Self {
        self.is_vantage_point = true;
        self
    }

    pub fn policy(mut self, policy: RovPolicy) -> Self {
        self.rov_policy = policy;
        self
    }

    pub fn scope(mut self, scope: PolicyScope) -> Self {
        self.policy_scope = scope;
        self
    }

    pub fn delay(mut self, secs: u64) -> Self {
        self.roa_propagation_delay = Some(secs);
        self
    }

    pub fn non_revalidating(mut self) -> Self {
        self.revalidates_on_roa_change = false;
        self
    }
}

#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkRelationship {
    AProviderOfB,
    Peer,
}

#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub a: Asn,
    pub b: Asn,
    pub relationship: LinkRelationship,
    #[serde(default)]
    pub via_route_server: bool,
}

impl Link {
    pub fn provider(provider: u32, customer: u32) -> Self {
        Link {
            a: Asn(provider),
            b: Asn(customer),
            relationship: LinkRelationship::AProviderOfB,
            via_route_server: false,
        }
    }

    pub fn peer(a: u32, b: u32) -> Self {
        Link {
            a: Asn(a),
            b: Asn(b),
            relationship: LinkRelationship::Peer,
            via_route_server: false,
        }
    }

    pub fn route_server(mut self) -> Self {
        self.via_route_server = true;
        self
    }
}

/// A neighbor's role as seen from the local AS. The order is the local
/// preference order.
#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborClass {
    Customer,
    Peer,
    Provider,
}

#[derive(Clone, Copy, Debug, Eq, PartialEq)]
pub struct Session {
    pub class: NeighborClass,
    pub via_route_server: bool,
}

/// A validated topology with resolved per-AS propagation delays.
#[derive(Clone, Debug)]
pub struct Topology {
    nodes: BTreeMap<Asn, AsNode>,
    links: Vec<Link>,
    sessions: BTreeMap<Asn, BTreeMap<Asn, Session>>,
}

impl Topology {
    /// Checks link endpoints and uniqueness and that the customer-provider
    /// graph is acyclic, then fills unset delays from `seed`.
    pub fn new(nodes: Vec<AsNode>, links: Vec<Link>, seed: u64) -> Result<Self, SimError> {
        let mut map = BTreeMap::new();
        for n in nodes {
            let asn = n.asn;
            if map.insert(asn, n).is_some() {
                return Err(SimError::Topology(format!("duplicate node {asn}")));
            }
        }
        let mut sessions: BTreeMap<Asn, BTreeMap<Asn, Session>> =
            map.keys().map(|&a| (a, BTreeMap::new())).collect();
        for l in &links {
            if l.a == l.b {
                return Err(SimError::Topology(format!("self link on {}", l.a)));
            }
            for end in [l.a, l.b] {
                if !map.contains_key(&end) {
                    return Err(SimError::Topology(format!("link references unknown {end}")));
                }
            }
            if sessions[&l.a].contains_key(&l.b) {
                return Err(SimError::Topology(format!(
                    "more than one link between {} and {}",
                    l.a, l.b
                )));
            }
            let (ca, cb) = match l.relationship {
                // b sees a as its provider, a sees b as its customer
                LinkRelationship::AProviderOfB => (NeighborClass::Customer, NeighborClass::Provider),
                LinkRelationship::Peer => (NeighborClass::Peer, NeighborClass::Peer),
            };
            let rs = l.via_route_server;
            sessions.get_mut(&l.a).unwrap().insert(
                l.b,
                Session {
                    class: ca,
                    via_route_server: rs,
                },
            );
            sessions.get_mut(&l.b).unwrap().insert(
                l.a,
                Session {
                    class: cb,
                    via_route_server: rs,
                },
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in map.values_mut() {
            // drawn for every node so one override does not shift the others
            let draw = rng.gen_range(DEFAULT_DELAY_RANGE.0..=DEFAULT_DELAY_RANGE.1);
            n.roa_propagation_delay.get_or_insert(draw);
        }
        let topo = Topology {
            nodes: map,
            links,
            sessions,
        };
        if let Some(a) = topo.provider_cycle() {
            return Err(SimError::Topology(format!(
                "customer-provider cycle through {a}"
            )));
        }
        Ok(topo)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &AsNode> {
        self.nodes.values()
    }

    pub fn node(&self, asn: Asn) -> Option<&AsNode> {
        self.nodes.get(&asn)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn delay(&self, asn: Asn) -> u64 {
        self.nodes[&asn].roa_propagation_delay.unwrap_or(0)
    }

    pub fn max_delay(&self) -> u64 {
        self.nodes().filter_map(|n| n.roa_propagation_delay).max().unwrap_or(0)
    }

    /// Neighbors of `asn` in ascending ASN order.
    pub fn sessions(&self, asn: Asn) -> impl Iterator<Item = (Asn, Session)> + '_ {
        self.sessions
            .get(&asn)
            .into_iter()
            .flat_map(|m| m.iter().map(|(a, s)| (*a, *s)))
    }

    /// How `local` sees `neighbor`, if they are linked.
    pub fn session(&self, local: Asn, neighbor: Asn) -> Option<Session> {
        self.sessions.get(&local)?.get(&neighbor).copied()
    }

    /// ASes reachable from `origin` over any link, ignoring policy.
    pub fn reachable_from(&self, origin: Asn) -> BTreeSet<Asn> {
        let mut seen = BTreeSet::from([origin]);
        let mut queue = VecDeque::from([origin]);
        while let Some(a) = queue.pop_front() {
            for (n, _) in self.sessions(a) {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    pub fn check_connected_from(&self, origin: Asn) -> Result<(), SimError> {
        if !self.nodes.contains_key(&origin) {
            return Err(SimError::Topology(format!("origin {origin} is not a node")));
        }
        let reach = self.reachable_from(origin);
        if let Some(a) = self.nodes.keys().find(|a| !reach.contains(a)) {
            return Err(SimError::Topology(format!(
                "{a} is not connected to origin {origin}"
            )));
        }
        Ok(())
    }

    fn provider_cycle(&self) -> Option<Asn> {
        // Kahn's algorithm over customer -> provider edges
        let mut indeg: BTreeMap<Asn, usize> = self.nodes.keys().map(|&a| (a, 0)).collect();
        for (a, m) in &self.sessions {
            for s in m.values() {
                if s.class == NeighborClass::Provider {
                    *indeg.get_mut(a).unwrap() += 1;
                }
            }
        }
        let mut queue: VecDeque<Asn> = indeg.iter().filter(|(_, d)| **d == 0).map(|(a, _)| *a).collect();
        let mut done = 0;
        while let Some(a) = queue.pop_front() {
            done += 1;
            for (n, s) in self.sessions(a) {
                // a is a provider of n
                if s.class == NeighborClass::Customer {
                    let d = indeg.get_mut(&n).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(n);
                    }
                }
            }
        }
        if done == self.nodes.len() {
            None
        } else {
            indeg.into_iter().find(|(_, d)| *d > 0).map(|(a, _)| a)
        }
    }

    /// Whether a route received by `receiver` with `path` (neighbor
    /// first, origin last) travelled up*, at most one peer link, then
    /// down*. Unknown links count as violations.
    pub fn is_valley_free(&self, receiver: Asn, path: &[Asn]) -> bool {
        let mut hops: Vec<Asn> = path.iter().rev().copied().collect();
        hops.push(receiver);
        hops.dedup();
        let mut descending = false;
        for w in hops.windows(2) {
            let Some(s) = self.session(w[0], w[1]) else {
                return false;
            };
            match s.class {
                // the next AS is the sender's provider: still climbing
                NeighborClass::Provider if !descending => {}
                NeighborClass::Peer if !descending => descending = true,
                NeighborClass::Customer => descending = true,
                _ => return false,
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo(links: Vec<Link>, n: &[u32]) -> Result<Topology, SimError> {
        Topology::new(n.iter().map(|&a| AsNode::new(a)).collect(), links, 1)
    }

    #[test]
    fn rejects_bad_links() {
        assert!(topo(vec![Link::peer(1, 1)], &[1]).is_err());
        assert!(topo(vec![Link::peer(1, 3)], &[1, 2]).is_err());
        assert!(topo(vec![Link::peer(1, 2), Link::provider(2, 1)], &[1, 2]).is_err());
        assert!(Topology::new(vec![AsNode::new(1), AsNode::new(1)], vec![], 0).is_err());
    }

    #[test]
    fn rejects_provider_cycles() {
        let links = vec![Link::provider(1, 2), Link::provider(2, 3), Link::provider(3, 1)];
        assert!(topo(links, &[1, 2, 3]).is_err());
    }

    #[test]
    fn seeded_delays_in_range_and_overridable() {
        let nodes = vec![AsNode::new(1), AsNode::new(2).delay(28800)];
        let t = Topology::new(nodes.clone(), vec![Link::peer(1, 2)], 5).unwrap();
        let d = t.delay(Asn(1));
        assert!((600..=3600).contains(&d));
        assert_eq!(t.delay(Asn(2)), 28800);
        let again = Topology::new(nodes, vec![Link::peer(1, 2)], 5).unwrap();
        assert_eq!(again.delay(Asn(1)), d);
    }

    #[test]
    fn valley_free_patterns() {
        // 1 provider of 2 and 3; 2 peers with 4; 4 provider of 5
        let t = topo(
            vec![
                Link::provider(1, 2),
                Link::provider(1, 3),
                Link::peer(2, 4),
                Link::provider(4, 5),
            ],
            &[1, 2, 3, 4, 5],
        )
        .unwrap();
        // 3 -> 1 -> 2 (up, down)
        assert!(t.is_valley_free(Asn(2), &[Asn(1), Asn(3)]));
        // 5 -> 4 -> 2 -> 1 (up, peer, up): valley
        assert!(!t.is_valley_free(Asn(1), &[Asn(2), Asn(4), Asn(5)]));
        // 3 -> 1 -> 2 -> 4 (up, down, peer): violation
        assert!(!t.is_valley_free(Asn(4), &[Asn(2), Asn(1), Asn(3)]));
        // 2 -> 4 -> 5 (peer, down)
        assert!(t.is_valley_free(Asn(5), &[Asn(4), Asn(2)]));
        assert!(t.check_connected_from(Asn(1)).is_ok());
    }

    #[test]
    fn node_json_defaults() {
        let n: AsNode = serde_json::from_str(r#"{"asn": 5}"#).unwrap();
        assert_eq!(n, AsNode::new(5));
        let n: AsNode = serde_json::from_str(
            r#"{"asn": 5, "rov_policy": "filter_invalid", "policy_scope": {"listed_sessions": [7]}}"#,
        )
        .unwrap();
        assert_eq!(n.policy_scope, PolicyScope::ListedSessions(vec![Asn(7)]));
        assert!(serde_json::from_str::<AsNode>(r#"{"asn": 5, "bogus": 1}"#).is_err());
    }
}
