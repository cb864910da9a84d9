//! The filtering experiment and its withdraw-reannounce variant.

use std::collections::{BTreeMap, BTreeSet};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::driver::{Driver, DriverError};
use super::{
    ConfigId, ExperimentError, ExperimentOutcome, ExperimentPlan, IneligibleReason, Observation,
    ObservationClass, VoidedRound,
};
use crate::asn::Asn;
use crate::prefix::IpPrefix;
use crate::rib::{RibSnapshot, VantagePoint};

#[derive(Clone, Copy, Debug, Default, Eq, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Change ROAs under standing announcements.
    #[default]
    Base,
    /// Withdraw P_E before each ROA change and announce it again once the
    /// change has propagated, so routers that never revalidate still see a
    /// fresh announcement.
    WithdrawReannounce,
}

pub(super) fn compressed(snap: &RibSnapshot, vp: &VantagePoint, prefix: &IpPrefix) -> Option<Vec<Asn>> {
    snap.route(vp, prefix).map(|e| e.path.compressed().asns().to_vec())
}

/// Classifies one round from its C1 and C2 snapshots. Eligibility depends
/// on C1 only; a reference route that changes or disappears between the two
/// at an eligible vantage point voids the round.
pub(super) fn classify_round(
    round: u32,
    c1: &RibSnapshot,
    c2: &RibSnapshot,
    plan: &ExperimentPlan,
    driver: &dyn Driver,
) -> Result<Vec<Observation>, String> {
    let (pr, pe) = (plan.reference_prefix, plan.experiment_prefix);
    let vps: BTreeSet<&VantagePoint> = c1.vantage_points().chain(c2.vantage_points()).collect();
    let mut out = Vec::new();
    for vp in vps {
        let mut obs = Observation {
            vp: vp.clone(),
            round,
            config: ConfigId::C2,
            class: ObservationClass::O1,
            c1_path: None,
            reference_path: None,
            experiment_path: None,
            first_hop_via_route_server: None,
        };
        // eligibility is decided on C1 alone
        let Some(r1) = compressed(c1, vp, &pr) else {
            obs.class = ObservationClass::Ineligible(IneligibleReason::NoRouteToReference);
            out.push(obs);
            continue;
        };
        let r2 = compressed(c2, vp, &pr);
        obs.first_hop_via_route_server = driver.session_via_route_server(vp.peer_asn, r1[0]);
        obs.c1_path = Some(r1.clone());
        obs.reference_path = r2.clone();
        let e2 = compressed(c2, vp, &pe);
        obs.experiment_path = e2.clone();
        if compressed(c1, vp, &pe).as_ref() != Some(&r1) {
            obs.class = ObservationClass::Ineligible(IneligibleReason::DifferingRoutesInC1);
            out.push(obs);
            continue;
        }
        if r2.as_ref() != Some(&r1) {
            return Err(format!("reference route changed between C1 and C2 at {vp}"));
        }
        obs.class = match e2 {
            None => ObservationClass::O3,
            Some(p) if p == r1 => ObservationClass::O1,
            Some(_) => ObservationClass::O2,
        };
        out.push(obs);
    }
    Ok(out)
}

fn announce_all(driver: &mut dyn Driver, plan: &ExperimentPlan, prefix: IpPrefix) -> Result<(), DriverError> {
    for (origin, sessions) in plan.announcements() {
        driver.announce(prefix, origin, sessions.as_deref())?;
    }
    Ok(())
}

fn withdraw_all(driver: &mut dyn Driver, plan: &ExperimentPlan, prefix: IpPrefix) -> Result<(), DriverError> {
    for (origin, _) in plan.announcements() {
        driver.withdraw(prefix, origin)?;
    }
    Ok(())
}

/// Runs one round of the schedule; the last snapshot per configuration is
/// kept.
pub(super) fn run_round(
    driver: &mut dyn Driver,
    plan: &ExperimentPlan,
    variant: Variant,
) -> Result<BTreeMap<ConfigId, RibSnapshot>, DriverError> {
    let mut snaps = BTreeMap::new();
    for step in &plan.schedule {
        match variant {
            Variant::Base => {
                driver.set_roas(&plan.roas(step.config))?;
                driver.wait(step.hold)?;
            }
            Variant::WithdrawReannounce => {
                withdraw_all(driver, plan, plan.experiment_prefix)?;
                driver.set_roas(&plan.roas(step.config))?;
                driver.wait(step.hold)?;
                announce_all(driver, plan, plan.experiment_prefix)?;
                driver.wait(step.hold)?;
            }
        }
        snaps.insert(step.config, driver.snapshot()?);
    }
    Ok(snaps)
}

/// Announces both prefixes under C1, then runs `plan.rounds` rounds and
/// classifies every vantage point per completed round.
pub fn run_filter_experiment(
    driver: &mut dyn Driver,
    plan: &ExperimentPlan,
    variant: Variant,
) -> Result<ExperimentOutcome, ExperimentError> {
    plan.validate(driver.max_roa_delay())?;
    driver.set_roas(&plan.roas(ConfigId::C1))?;
    announce_all(driver, plan, plan.reference_prefix)?;
    announce_all(driver, plan, plan.experiment_prefix)?;
    let mut outcome = ExperimentOutcome::default();
    for round in 0..plan.rounds {
        let snaps = match run_round(driver, plan, variant) {
            Ok(s) => s,
            Err(e) => {
                warn!("round {round} voided: {e}");
                outcome.voided_rounds.push(VoidedRound {
                    round,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match classify_round(round, &snaps[&ConfigId::C1], &snaps[&ConfigId::C2], plan, driver) {
            Ok(obs) => {
                outcome.observations.extend(obs);
                outcome.completed_rounds += 1;
            }
            Err(reason) => {
                warn!("round {round} voided: {reason}");
                outcome.voided_rounds.push(VoidedRound { round, reason });
            }
        }
    }
    info!(
        "{} rounds completed, {} voided, {} observations",
        outcome.completed_rounds,
        outcome.voided_rounds.len(),
        outcome.observations.len()
    );
    if outcome.completed_rounds == 0 {
        return Err(ExperimentError::NoCompletedRounds(outcome.voided_rounds.len()));
    }
    Ok(outcome)
}

pub fn run_withdraw_reannounce_variant(
    driver: &mut dyn Driver,
    plan: &ExperimentPlan,
) -> Result<ExperimentOutcome, ExperimentError> {
    run_filter_experiment(driver, plan, Variant::WithdrawReannounce)
}
