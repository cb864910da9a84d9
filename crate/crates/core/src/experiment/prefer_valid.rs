//! The prefer-valid experiment: two origins announce the same prefixes and
//! take turns being the valid origin for P_E.
//!
//! A pre-check announces both prefixes from each origin alone while P_E is
//! invalid from both. Vantage points must hear both prefixes from both
//! origins to be considered; the pre-check observations also run through
//! the filtering inference, which is what separates a filtering AS from a
//! preferring one (a filter drops the lone invalid route, a preference
//! keeps it).

use std::collections::{BTreeMap, BTreeSet};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::driver::Driver;
use super::filter::compressed;
use super::infer::{infer_filtering, AsVerdict, EvidenceBasis, PolicyInference, Verdict};
use super::{
    ConfigId, ExperimentError, ExperimentOutcome, ExperimentPlan, IneligibleReason, Observation,
    ObservationClass, VoidedRound,
};
use crate::asn::Asn;
use crate::rib::{RibSnapshot, VantagePoint};
use crate::rpki::Vrp;

#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchEvidence {
    /// P_E moved to the newly valid origin once.
    Weak,
    /// P_E followed the valid origin in every configuration, switching back
    /// and forth.
    Strong,
}

#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub struct TrackedConfig {
    pub round: u32,
    pub config: ConfigId,
    pub valid_origin: Asn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment_path: Option<Vec<Asn>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_path: Option<Vec<Asn>>,
}

#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub struct TrackingObservation {
    pub vp: VantagePoint,
    pub configs: Vec<TrackedConfig>,
    pub reference_stable: bool,
    /// Consecutive configurations where P_E moved to the newly valid
    /// origin.
    pub switches: usize,
    pub tracks_validity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<SwitchEvidence>,
    /// Where the two P_E routes part ways, seen from the vantage point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deciding_as: Option<Asn>,
}

#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub struct ExcludedVp {
    pub vp: VantagePoint,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferValidOutcome {
    /// Exclusive-announcement phases, one "round" per origin.
    pub precheck: ExperimentOutcome,
    pub excluded: Vec<ExcludedVp>,
    pub tracking: Vec<TrackingObservation>,
    pub voided_rounds: Vec<VoidedRound>,
    pub inference: PolicyInference,
}

fn origin_of(path: &Option<Vec<Asn>>) -> Option<Asn> {
    path.as_ref().and_then(|p| p.last().copied())
}

/// The last AS two routes share, walking from the vantage point.
fn split_point(vp: Asn, a: &[Asn], b: &[Asn]) -> Asn {
    let mut last = vp;
    for (x, y) in a.iter().zip(b) {
        if x != y {
            break;
        }
        last = *x;
    }
    last
}

fn precheck_observations(snap: &RibSnapshot, plan: &ExperimentPlan, phase: u32) -> Vec<Observation> {
    let (pr, pe) = (plan.reference_prefix, plan.experiment_prefix);
    snap.vantage_points()
        .map(|vp| {
            let r = compressed(snap, vp, &pr);
            let e = compressed(snap, vp, &pe);
            let class = match (&r, &e) {
                (None, _) => ObservationClass::Ineligible(IneligibleReason::NoRouteToReference),
                (Some(_), None) => ObservationClass::O3,
                (Some(r), Some(e)) if r == e => ObservationClass::O1,
                _ => ObservationClass::O2,
            };
            Observation {
                vp: vp.clone(),
                round: phase,
                config: ConfigId::C2,
                class,
                c1_path: r.clone(),
                reference_path: r,
                experiment_path: e,
                first_hop_via_route_server: None,
            }
        })
        .collect()
}

pub fn run_prefer_valid_experiment(
    driver: &mut dyn Driver,
    plan: &ExperimentPlan,
) -> Result<PreferValidOutcome, ExperimentError> {
    let pv = plan
        .prefer_valid
        .clone()
        .ok_or_else(|| ExperimentError::Plan("plan has no prefer_valid section".into()))?;
    plan.validate(driver.max_roa_delay())?;
    let (pr, pe) = (plan.reference_prefix, plan.experiment_prefix);
    let hold = plan.schedule.iter().map(|s| s.hold).max().unwrap_or(super::DEFAULT_HOLD);
    let both_invalid = vec![
        Vrp::exact(pr, pv.origins[0]),
        Vrp::exact(pr, pv.origins[1]),
        Vrp::exact(pe, plan.alternate_origin),
    ];
    driver.set_roas(&both_invalid)?;
    driver.wait(hold)?;

    // exclusivity pre-check
    let mut precheck = ExperimentOutcome::default();
    let mut phase_snaps = Vec::new();
    for (i, origin) in pv.origins.iter().enumerate() {
        let sessions = pv.sessions[i].as_deref();
        driver.announce(pr, *origin, sessions)?;
        driver.announce(pe, *origin, sessions)?;
        driver.wait(hold)?;
        let snap = driver.snapshot()?;
        precheck.observations.extend(precheck_observations(&snap, plan, i as u32));
        precheck.completed_rounds += 1;
        phase_snaps.push(snap);
        driver.withdraw(pr, *origin)?;
        driver.withdraw(pe, *origin)?;
        driver.wait(hold)?;
    }
    let mut excluded = Vec::new();
    let mut considered = BTreeSet::new();
    let all_vps: BTreeSet<VantagePoint> = phase_snaps
        .iter()
        .flat_map(|s| s.vantage_points().cloned())
        .collect();
    for vp in all_vps {
        let missing: Vec<String> = phase_snaps
            .iter()
            .zip(pv.origins)
            .flat_map(|(s, o)| {
                [(pr, "reference"), (pe, "experiment")]
                    .into_iter()
                    .filter(|(p, _)| s.route(&vp, p).is_none())
                    .map(move |(_, name)| format!("no {name} route when announced only from {o}"))
            })
            .collect();
        if missing.is_empty() {
            considered.insert(vp);
        } else {
            excluded.push(ExcludedVp {
                vp,
                reason: missing.join("; "),
            });
        }
    }
    let mut inference = infer_filtering(&precheck.observations);

    // simultaneous announcements, alternating configurations
    for (i, origin) in pv.origins.iter().enumerate() {
        let sessions = pv.sessions[i].as_deref();
        driver.announce(pr, *origin, sessions)?;
        driver.announce(pe, *origin, sessions)?;
    }
    driver.wait(hold)?;
    let mut runs: Vec<(u32, ConfigId, RibSnapshot)> = Vec::new();
    let mut voided_rounds = Vec::new();
    for round in 0..plan.rounds {
        let mut this = Vec::new();
        let res: Result<(), ExperimentError> = (|| {
            for step in &plan.schedule {
                driver.set_roas(&plan.roas(step.config))?;
                driver.wait(step.hold)?;
                this.push((round, step.config, driver.snapshot()?));
            }
            Ok(())
        })();
        match res {
            Ok(()) => runs.extend(this),
            Err(e) => {
                warn!("round {round} voided: {e}");
                voided_rounds.push(VoidedRound {
                    round,
                    reason: e.to_string(),
                });
            }
        }
    }
    if runs.is_empty() {
        return Err(ExperimentError::NoCompletedRounds(voided_rounds.len()));
    }

    let valid_origin = |c: ConfigId| match c {
        ConfigId::C1 => pv.origins[0],
        ConfigId::C2 => pv.origins[1],
    };
    let mut tracking = Vec::new();
    for vp in &considered {
        let configs: Vec<TrackedConfig> = runs
            .iter()
            .map(|(round, config, snap)| TrackedConfig {
                round: *round,
                config: *config,
                valid_origin: valid_origin(*config),
                experiment_path: compressed(snap, vp, &pe),
                reference_path: compressed(snap, vp, &pr),
            })
            .collect();
        let reference_stable = configs[0].reference_path.is_some()
            && configs.iter().all(|c| c.reference_path == configs[0].reference_path);
        let tracks_validity = configs
            .iter()
            .all(|c| origin_of(&c.experiment_path) == Some(c.valid_origin));
        let switch_pairs: Vec<(&TrackedConfig, &TrackedConfig)> = configs
            .windows(2)
            .map(|w| (&w[0], &w[1]))
            .filter(|(a, b)| {
                let (oa, ob) = (origin_of(&a.experiment_path), origin_of(&b.experiment_path));
                oa != ob && ob == Some(b.valid_origin)
            })
            .collect();
        let switches = switch_pairs.len();
        let evidence = match (reference_stable, tracks_validity, switches) {
            (false, _, _) | (_, _, 0) => None,
            (true, true, s) if s >= 2 => Some(SwitchEvidence::Strong),
            _ => Some(SwitchEvidence::Weak),
        };
        let deciding_as = switch_pairs.first().and_then(|(a, b)| {
            let (pa, pb) = (a.experiment_path.as_ref()?, b.experiment_path.as_ref()?);
            Some(split_point(vp.peer_asn, pa, pb))
        });
        tracking.push(TrackingObservation {
            vp: vp.clone(),
            configs,
            reference_stable,
            switches,
            tracks_validity,
            evidence: evidence.filter(|_| deciding_as.is_some()),
            deciding_as,
        });
    }

    // prefer-valid verdicts per deciding AS, never overriding a filter
    let mut support: BTreeMap<Asn, (SwitchEvidence, BTreeSet<Asn>)> = BTreeMap::new();
    for t in &tracking {
        if let (Some(ev), Some(asn)) = (t.evidence, t.deciding_as) {
            let e = support.entry(asn).or_insert((ev, BTreeSet::new()));
            if ev == SwitchEvidence::Strong {
                e.0 = SwitchEvidence::Strong;
            }
            e.1.insert(t.vp.peer_asn);
        }
    }
    for (asn, (strength, vps)) in support {
        if inference.verdict(asn).is_some_and(|v| v.verdict == Verdict::FilterInvalid) {
            continue;
        }
        inference.set(AsVerdict {
            asn,
            verdict: Verdict::PreferValid,
            basis: Some(EvidenceBasis::ValidityTracking),
            supporting_vps: vps,
            sessions: Vec::new(),
            strength: Some(strength),
            consistency: 1.0,
        });
    }
    info!(
        "prefer-valid: {} vantage points considered, {} excluded",
        considered.len(),
        excluded.len()
    );
    Ok(PreferValidOutcome {
        precheck,
        excluded,
        tracking,
        voided_rounds,
        inference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::SimDriver;
    use crate::rpki::RoaSet;
    use crate::sim::{plant_scenario, RovPolicy, ScenarioKind};

    fn run(kind: ScenarioKind, strip_policy: bool) -> PreferValidOutcome {
        let mut s = plant_scenario(kind);
        if strip_policy {
            for n in &mut s.nodes {
                n.rov_policy = RovPolicy::None;
            }
        }
        let mut d = SimDriver::new(s.topology().unwrap(), RoaSet::empty());
        run_prefer_valid_experiment(&mut d, s.plan.as_ref().unwrap()).unwrap()
    }

    #[test]
    fn split_point_walks_from_vp() {
        let a = [Asn(2), Asn(3), Asn(9)];
        let b = [Asn(2), Asn(4), Asn(8)];
        assert_eq!(split_point(Asn(1), &a, &b), Asn(2));
        assert_eq!(split_point(Asn(1), &[Asn(9)], &[Asn(8)]), Asn(1));
    }

    #[test]
    fn planted_prefer_valid_is_strong() {
        let out = run(ScenarioKind::PreferValid, false);
        assert!(out.excluded.is_empty());
        let v = out.inference.verdict(Asn(64530)).unwrap();
        assert_eq!(v.verdict, Verdict::PreferValid);
        assert_eq!(v.strength, Some(SwitchEvidence::Strong));
        for t in &out.tracking {
            assert!(t.reference_stable);
            assert!(t.tracks_validity);
            assert_eq!(t.deciding_as, Some(Asn(64530)));
        }
        assert!(out.inference.with_verdict(Verdict::FilterInvalid).is_empty());
    }

    #[test]
    fn planted_filter_is_not_prefer_valid() {
        let out = run(ScenarioKind::PreferValidFilter, false);
        assert_eq!(
            out.inference.with_verdict(Verdict::FilterInvalid),
            BTreeSet::from([Asn(64530)])
        );
        assert!(out.inference.with_verdict(Verdict::PreferValid).is_empty());
        assert_eq!(out.excluded.len(), 2);
    }

    #[test]
    fn no_policy_never_tracks() {
        let out = run(ScenarioKind::PreferValid, true);
        assert!(out.tracking.iter().all(|t| t.evidence.is_none() && !t.tracks_validity));
        assert!(out.inference.with_verdict(Verdict::PreferValid).is_empty());
    }
}
