//! From per-round observations to per-AS verdicts.
//!
//! * A vantage point adjacent to the origin that consistently sees O2 or
//!   O3 must itself be dropping the invalid route.
//! * Further away, the culprit is one of the ASes on the vantage point's
//!   C1 path (the vantage point included). Sessions over which some
//!   vantage point later received the invalid P_E route are ruled out, and
//!   the remaining sets are intersected across vantage points whose paths
//!   enter through the same first-hop AS. A singleton is a verdict;
//!   anything larger stays a candidate set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Observation, ObservationClass};
use crate::asn::Asn;
use crate::rib::VantagePoint;

#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FilterInvalid,
    PreferValid,
    NoRovObserved,
}

#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceBasis {
    /// The AS is a vantage point peering directly with the origin.
    AdjacentToOrigin,
    /// The only remaining candidate after intersection.
    SingletonCandidateSet,
    /// Its route for P_E switched to whichever origin was valid.
    ValidityTracking,
}

#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub struct SessionEvidence {
    /// The neighbor the dropped or demoted route came from.
    pub neighbor: Asn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via_route_server: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsVerdict {
    pub asn: Asn,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<EvidenceBasis>,
    /// Vantage point ASes whose observations support the verdict.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub supporting_vps: BTreeSet<Asn>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sessions: Vec<SessionEvidence>,
    /// `weak` or `strong` for prefer-valid verdicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<super::SwitchEvidence>,
    /// Lowest agreement ratio among the supporting vantage points.
    pub consistency: f64,
}

/// Possible culprits for vantage points whose C1 paths enter through
/// `first_hop` and that saw the same class of change.
///
/// Only sets built from O3 observations can yield a definite verdict: a
/// different route (O2) can also mean a better route appeared elsewhere,
/// so it localizes nothing away from the origin's own sessions.
#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub first_hop: Asn,
    pub observed: ObservationClass,
    pub vps: BTreeSet<Asn>,
    pub candidates: BTreeSet<Asn>,
    pub supporting_observations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VpConsistency {
    pub vp: VantagePoint,
    pub modal_class: ObservationClass,
    pub agreeing: usize,
    pub total: usize,
    pub ratio: f64,
    pub consistent: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyInference {
    /// Sorted by ASN.
    pub verdicts: Vec<AsVerdict>,
    pub candidate_sets: Vec<CandidateSet>,
    pub consistency: Vec<VpConsistency>,
    /// Rounds with at least one eligible observation.
    pub rounds: usize,
}

impl PolicyInference {
    pub fn verdict(&self, asn: Asn) -> Option<&AsVerdict> {
        self.verdicts
            .binary_search_by_key(&asn, |v| v.asn)
            .ok()
            .map(|i| &self.verdicts[i])
    }

    pub fn with_verdict(&self, verdict: Verdict) -> BTreeSet<Asn> {
        self.verdicts
            .iter()
            .filter(|v| v.verdict == verdict)
            .map(|v| v.asn)
            .collect()
    }

    pub fn inconsistent_vps(&self) -> impl Iterator<Item = &VpConsistency> {
        self.consistency.iter().filter(|c| !c.consistent)
    }

    /// Replaces or adds a verdict, keeping the list sorted.
    pub(super) fn set(&mut self, v: AsVerdict) {
        match self.verdicts.binary_search_by_key(&v.asn, |x| x.asn) {
            Ok(i) => self.verdicts[i] = v,
            Err(i) => self.verdicts.insert(i, v),
        }
    }
}

/// `(receiver, sender)` sessions along `[vp] + path`, VP end first.
fn sessions(vp: Asn, path: &[Asn]) -> Vec<(Asn, Asn)> {
    let mut seq = vec![vp];
    seq.extend(path.iter().copied());
    seq.dedup();
    seq.windows(2).map(|w| (w[0], w[1])).collect()
}

/// One entry per neighbor; a known route-server flag wins over an unknown
/// one.
fn add_session(list: &mut Vec<SessionEvidence>, neighbor: Asn, via_route_server: Option<bool>) {
    match list.iter_mut().find(|s| s.neighbor == neighbor) {
        Some(s) => {
            s.via_route_server = s.via_route_server.or(via_route_server);
        }
        None => list.push(SessionEvidence {
            neighbor,
            via_route_server,
        }),
    }
}

fn no_rov(asn: Asn) -> AsVerdict {
    AsVerdict {
        asn,
        verdict: Verdict::NoRovObserved,
        basis: None,
        supporting_vps: BTreeSet::new(),
        sessions: Vec::new(),
        strength: None,
        consistency: 1.0,
    }
}

pub fn infer_filtering(observations: &[Observation]) -> PolicyInference {
    let mut by_vp: BTreeMap<&VantagePoint, Vec<&Observation>> = BTreeMap::new();
    let mut rounds = BTreeSet::new();
    for o in observations.iter().filter(|o| o.class.is_eligible()) {
        by_vp.entry(&o.vp).or_default().push(o);
        rounds.insert(o.round);
    }

    let mut out = PolicyInference {
        rounds: rounds.len(),
        ..Default::default()
    };
    let mut modal: BTreeMap<&VantagePoint, ObservationClass> = BTreeMap::new();
    let mut ratio: BTreeMap<&VantagePoint, f64> = BTreeMap::new();
    for (vp, obs) in &by_vp {
        let mut counts: BTreeMap<ObservationClass, usize> = BTreeMap::new();
        for o in obs {
            *counts.entry(o.class).or_default() += 1;
        }
        // ties go to the lowest class
        let (class, agreeing) = counts
            .iter()
            .fold((ObservationClass::O1, 0), |best, (c, n)| if *n > best.1 { (*c, *n) } else { best });
        let consistent = agreeing == obs.len();
        ratio.insert(vp, agreeing as f64 / obs.len() as f64);
        out.consistency.push(VpConsistency {
            vp: (*vp).clone(),
            modal_class: class,
            agreeing,
            total: obs.len(),
            ratio: ratio[vp],
            consistent,
        });
        if consistent {
            modal.insert(vp, class);
        }
    }

    // sessions that demonstrably carried the invalid P_E route
    let mut carried: BTreeSet<(Asn, Asn)> = BTreeSet::new();
    let mut origins = BTreeSet::new();
    let mut seen = BTreeSet::new();
    for obs in by_vp.values() {
        for o in obs {
            if let Some(p) = &o.experiment_path {
                carried.extend(sessions(o.vp.peer_asn, p));
            }
            if let Some(p) = &o.c1_path {
                origins.extend(p.last().copied());
                for (a, _) in sessions(o.vp.peer_asn, p) {
                    seen.insert(a);
                }
            }
        }
    }

    struct Support {
        vp: Asn,
        adjacent: bool,
        candidates: BTreeSet<Asn>,
        upstream: BTreeMap<Asn, Asn>,
        route_server: Option<bool>,
        observations: usize,
        consistency: f64,
    }
    let mut groups: BTreeMap<(Asn, ObservationClass), Vec<Support>> = BTreeMap::new();
    for (vp, class) in &modal {
        if !matches!(class, ObservationClass::O2 | ObservationClass::O3) {
            continue;
        }
        let obs = &by_vp[vp];
        let mut candidates: Option<BTreeSet<Asn>> = None;
        let mut upstream = BTreeMap::new();
        let mut first_hop = None;
        let mut adjacent = true;
        for o in obs {
            let Some(path) = &o.c1_path else { continue };
            let edges = sessions(vp.peer_asn, path);
            upstream.extend(edges.iter().copied());
            // An AS whose C1 session still carries P_E in C2 keeps offering
            // it downstream, so the culprit sits between the VP and the
            // lowest such AS.
            let cut = edges
                .iter()
                .skip(1)
                .position(|e| carried.contains(e))
                .map_or(edges.len(), |i| i + 1);
            let s: BTreeSet<Asn> = edges[..cut]
                .iter()
                .filter(|e| !carried.contains(e))
                .map(|&(a, _)| a)
                .collect();
            candidates = Some(match candidates {
                None => s,
                Some(c) => c.intersection(&s).copied().collect(),
            });
            adjacent &= path.len() == 1;
            first_hop = Some(if path.len() >= 2 { path[path.len() - 2] } else { vp.peer_asn });
        }
        let (Some(candidates), Some(first_hop)) = (candidates, first_hop) else {
            continue;
        };
        let candidates = if adjacent { BTreeSet::from([vp.peer_asn]) } else { candidates };
        groups.entry((first_hop, *class)).or_default().push(Support {
            vp: vp.peer_asn,
            adjacent,
            candidates,
            upstream,
            route_server: obs[0].first_hop_via_route_server,
            observations: obs.len(),
            consistency: ratio[vp],
        });
    }

    let mut definite: BTreeMap<Asn, AsVerdict> = BTreeMap::new();
    for ((first_hop, class), members) in &groups {
        for m in members.iter().filter(|m| m.adjacent) {
            let v = definite.entry(m.vp).or_insert_with(|| AsVerdict {
                basis: Some(EvidenceBasis::AdjacentToOrigin),
                verdict: Verdict::FilterInvalid,
                ..no_rov(m.vp)
            });
            v.supporting_vps.insert(m.vp);
            add_session(
                &mut v.sessions,
                m.upstream.get(&m.vp).copied().unwrap_or(*first_hop),
                m.route_server,
            );
            v.consistency = v.consistency.min(m.consistency);
        }
        let mut inter: Option<BTreeSet<Asn>> = None;
        for m in members {
            inter = Some(match inter {
                None => m.candidates.clone(),
                Some(c) => c.intersection(&m.candidates).copied().collect(),
            });
        }
        let inter = inter.unwrap_or_default();
        out.candidate_sets.push(CandidateSet {
            first_hop: *first_hop,
            observed: *class,
            vps: members.iter().map(|m| m.vp).collect(),
            candidates: inter.clone(),
            supporting_observations: members.iter().map(|m| m.observations).sum(),
        });
        if *class == ObservationClass::O3 && inter.len() == 1 && members.iter().any(|m| !m.adjacent) {
            let x = *inter.iter().next().unwrap();
            let v = definite.entry(x).or_insert_with(|| AsVerdict {
                basis: Some(EvidenceBasis::SingletonCandidateSet),
                verdict: Verdict::FilterInvalid,
                ..no_rov(x)
            });
            for m in members {
                v.supporting_vps.insert(m.vp);
                v.consistency = v.consistency.min(m.consistency);
                if let Some(&neighbor) = m.upstream.get(&x) {
                    let rs = if x == m.vp { m.route_server } else { None };
                    add_session(&mut v.sessions, neighbor, rs);
                }
            }
        }
    }

    for a in seen.difference(&origins) {
        out.set(definite.remove(a).unwrap_or_else(|| no_rov(*a)));
    }
    for (_, v) in definite {
        out.set(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{run_filter_experiment, ConfigId, SimDriver, Variant};
    use crate::rpki::RoaSet;
    use crate::sim::{plant_scenario, ScenarioKind};

    fn infer_scenario(kind: ScenarioKind) -> PolicyInference {
        let s = plant_scenario(kind);
        let mut d = SimDriver::new(s.topology().unwrap(), RoaSet::empty());
        let out = run_filter_experiment(&mut d, s.plan.as_ref().unwrap(), Variant::Base).unwrap();
        infer_filtering(&out.observations)
    }

    fn obs(vp: u32, round: u32, class: ObservationClass, c1: &[u32], exp: Option<&[u32]>) -> Observation {
        let path = |v: &[u32]| v.iter().map(|&a| Asn(a)).collect::<Vec<_>>();
        Observation {
            vp: VantagePoint::new("c", Asn(vp), vp.to_string()),
            round,
            config: ConfigId::C2,
            class,
            c1_path: Some(path(c1)),
            reference_path: Some(path(c1)),
            experiment_path: exp.map(path),
            first_hop_via_route_server: None,
        }
    }

    #[test]
    fn adjacent_filter_verdict() {
        let inf = infer_scenario(ScenarioKind::AdjacentFilter);
        assert_eq!(inf.with_verdict(Verdict::FilterInvalid), BTreeSet::from([Asn(8283)]));
        let v = inf.verdict(Asn(8283)).unwrap();
        assert_eq!(v.consistency, 1.0);
        assert_eq!(v.basis, Some(EvidenceBasis::AdjacentToOrigin));
        assert_eq!(inf.verdict(Asn(64501)).unwrap().verdict, Verdict::NoRovObserved);
        assert!(inf.verdict(Asn(47065)).is_none());
        assert_eq!(inf.rounds, 3);
    }

    #[test]
    fn route_server_verdict_names_session() {
        let inf = infer_scenario(ScenarioKind::RouteServerFilter);
        let v = inf.verdict(Asn(50300)).unwrap();
        assert_eq!(v.verdict, Verdict::FilterInvalid);
        assert_eq!(
            v.sessions,
            vec![SessionEvidence {
                neighbor: Asn(47065),
                via_route_server: Some(true)
            }]
        );
    }

    #[test]
    fn non_adjacent_localization() {
        let one = infer_scenario(ScenarioKind::NonAdjacentFilter);
        assert!(one.with_verdict(Verdict::FilterInvalid).is_empty());
        let set = &one.candidate_sets[0];
        assert!(set.candidates.contains(&Asn(59715)));
        assert!(set.candidates.len() >= 2);
        let two = infer_scenario(ScenarioKind::NonAdjacentFilterTwoVps);
        assert_eq!(two.with_verdict(Verdict::FilterInvalid), BTreeSet::from([Asn(59715)]));
        assert_eq!(two.candidate_sets[0].candidates, BTreeSet::from([Asn(59715)]));
    }

    #[test]
    fn all_o1_means_no_rov_everywhere() {
        let o = [
            obs(1, 0, ObservationClass::O1, &[2, 9], Some(&[2, 9])),
            obs(3, 0, ObservationClass::O1, &[9], Some(&[9])),
        ];
        let inf = infer_filtering(&o);
        assert_eq!(inf.with_verdict(Verdict::NoRovObserved), BTreeSet::from([Asn(1), Asn(2), Asn(3)]));
        assert!(inf.candidate_sets.is_empty());
    }

    #[test]
    fn inconsistent_vp_gives_no_verdict() {
        let o = [
            obs(1, 0, ObservationClass::O3, &[9], None),
            obs(1, 1, ObservationClass::O1, &[9], Some(&[9])),
            obs(1, 2, ObservationClass::O3, &[9], None),
        ];
        let inf = infer_filtering(&o);
        assert!(inf.with_verdict(Verdict::FilterInvalid).is_empty());
        let c = inf.inconsistent_vps().next().unwrap();
        assert_eq!((c.agreeing, c.total), (2, 3));
        assert_eq!(c.modal_class, ObservationClass::O3);
    }

    #[test]
    fn sessions_that_carried_invalid_are_cleared() {
        // VP 1 behind 2 behind 3 loses P_E; VP 4 hears it through 3
        let o = [
            obs(1, 0, ObservationClass::O3, &[2, 3, 9], None),
            obs(4, 0, ObservationClass::O1, &[3, 9], Some(&[3, 9])),
        ];
        let inf = infer_filtering(&o);
        assert_eq!(inf.candidate_sets[0].candidates, BTreeSet::from([Asn(1), Asn(2)]));
        assert!(inf.with_verdict(Verdict::FilterInvalid).is_empty());
    }

    #[test]
    fn same_as_on_another_session_is_not_cleared() {
        // 2 accepts the invalid route from 5 but not from 3
        let o = [
            obs(1, 0, ObservationClass::O3, &[2, 3, 9], None),
            obs(10, 0, ObservationClass::O3, &[11, 2, 3, 9], None),
            obs(4, 0, ObservationClass::O1, &[2, 5, 9], Some(&[2, 5, 9])),
            obs(6, 0, ObservationClass::O1, &[3, 9], Some(&[3, 9])),
        ];
        let inf = infer_filtering(&o);
        assert_eq!(inf.candidate_sets.len(), 1);
        assert_eq!(inf.candidate_sets[0].candidates, BTreeSet::from([Asn(2)]));
        assert_eq!(inf.with_verdict(Verdict::FilterInvalid), BTreeSet::from([Asn(2)]));
    }

    #[test]
    fn different_route_away_from_origin_localizes_nothing() {
        // 7 moves to a shorter route that appeared in C2; nothing on its
        // old path needs to filter
        let o = [
            obs(7, 0, ObservationClass::O2, &[8, 2, 3, 9], Some(&[5, 9])),
            obs(6, 0, ObservationClass::O1, &[3, 9], Some(&[3, 9])),
        ];
        let inf = infer_filtering(&o);
        assert_eq!(inf.candidate_sets.len(), 1);
        assert_eq!(inf.candidate_sets[0].observed, ObservationClass::O2);
        assert_eq!(inf.candidate_sets[0].candidates, BTreeSet::from([Asn(2), Asn(7), Asn(8)]));
        assert!(inf.with_verdict(Verdict::FilterInvalid).is_empty());
    }

    #[test]
    fn candidates_stop_at_lowest_session_still_carrying() {
        // 3 still hears P_E from 4, so 4 and above are not candidates even
        // though (4, 9) is never observed
        let o = [
            obs(1, 0, ObservationClass::O3, &[2, 3, 4, 9], None),
            obs(5, 0, ObservationClass::O1, &[3, 4, 12, 9], Some(&[3, 4, 12, 9])),
        ];
        let inf = infer_filtering(&o);
        assert_eq!(inf.candidate_sets[0].candidates, BTreeSet::from([Asn(1), Asn(2)]));
    }
}
