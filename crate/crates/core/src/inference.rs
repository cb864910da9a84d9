//! Passive ROV inference from collector RIBs.
//!
//! Three steps over the routes each vantage point exports:
//!
//! 1. every AS seen on the path of an Invalid route is *non-enforcing*,
//!    except for routes the vantage point's AS (or a customer) originates;
//! 2. for each origin with both non-invalid and Invalid routes at a
//!    vantage point, an AS present on a non-invalid path but absent from an
//!    Invalid one is a *candidate* for that origin, provided it is the only
//!    such AS and is not non-enforcing;
//! 3. candidates marked for at least `threshold` origins are *enforcing*.
//!
//! Paths are compared as AS sets, so prepending does not matter. The
//! vantage point's own AS and the origin never receive flags or marks.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asn::Asn;
use crate::relationships::AsRelationships;
use crate::rib::{RibSnapshot, VantagePoint};
use crate::rpki::{RoaSet, ValidationState};

pub const DEFAULT_THRESHOLD: u32 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InferenceError {
    #[error("threshold must be at least 1, got {0}")]
    BadThreshold(u32),
    #[error("vantage point index {0} out of range")]
    BadSubset(usize),
}

/// How far the customer exception for the vantage point's AS reaches.
#[derive(Clone, Copy, Debug, Default, Eq, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CustomerScope {
    #[default]
    Direct,
    Cone,
}

#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub threshold: u32,
    pub non_enforcing: BTreeSet<Asn>,
    /// Candidate AS -> origins it was marked for.
    pub candidates: BTreeMap<Asn, BTreeSet<Asn>>,
    pub enforcing: BTreeSet<Asn>,
}

struct OriginGroup {
    non_invalid: Vec<usize>,
    invalid: Vec<usize>,
}

/// Precomputed per-entry validation and per-VP grouping, so the pipeline
/// can be rerun cheaply on many VP subsets.
pub struct Pipeline<'a> {
    snapshot: &'a RibSnapshot,
    states: Vec<ValidationState>,
    /// Sorted path members per entry, without the VP's AS.
    members: Vec<Vec<Asn>>,
    vps: Vec<&'a VantagePoint>,
    vp_entries: Vec<&'a [usize]>,
    vp_groups: Vec<Vec<OriginGroup>>,
    exceptions: Vec<BTreeSet<Asn>>,
}

impl<'a> Pipeline<'a> {
    /// Without relationship data the customer exception covers only the
    /// vantage point's own AS.
    pub fn new(
        snapshot: &'a RibSnapshot,
        roas: &RoaSet,
        rels: Option<&AsRelationships>,
        scope: CustomerScope,
    ) -> Self {
        if rels.is_none() {
            warn!("no AS relationship data: customer exception limited to the vantage point's own AS");
        }
        let entries = snapshot.entries();
        let states: Vec<ValidationState> = entries
            .par_iter()
            .map(|e| roas.validate(e.origin(), &e.prefix))
            .collect();
        let members = entries
            .iter()
            .map(|e| {
                let mut m: Vec<Asn> = e
                    .path
                    .asns()
                    .iter()
                    .copied()
                    .filter(|&a| a != e.vp.peer_asn)
                    .collect();
                m.sort_unstable();
                m.dedup();
                m
            })
            .collect();
        let mut vps = Vec::new();
        let mut vp_entries = Vec::new();
        let mut vp_groups = Vec::new();
        let mut exceptions = Vec::new();
        for (vp, idx) in snapshot.vp_groups() {
            let mut by_origin: BTreeMap<Asn, OriginGroup> = BTreeMap::new();
            for &i in idx {
                let g = by_origin.entry(entries[i].origin()).or_insert(OriginGroup {
                    non_invalid: Vec::new(),
                    invalid: Vec::new(),
                });
                if states[i].is_invalid() {
                    g.invalid.push(i);
                } else {
                    g.non_invalid.push(i);
                }
            }
            let mut exc = BTreeSet::from([vp.peer_asn]);
            if let Some(r) = rels {
                match scope {
                    CustomerScope::Direct => exc.extend(r.customers(vp.peer_asn)),
                    CustomerScope::Cone => exc.extend(r.customer_cone(vp.peer_asn)),
                }
            }
            vps.push(vp);
            vp_entries.push(idx);
            vp_groups.push(
                by_origin
                    .into_values()
                    .filter(|g| !g.invalid.is_empty() && !g.non_invalid.is_empty())
                    .collect(),
            );
            exceptions.push(exc);
        }
        Pipeline {
            snapshot,
            states,
            members,
            vps,
            vp_entries,
            vp_groups,
            exceptions,
        }
    }

    pub fn snapshot(&self) -> &RibSnapshot {
        self.snapshot
    }

    pub fn vantage_points(&self) -> &[&'a VantagePoint] {
        &self.vps
    }

    pub fn vp_count(&self) -> usize {
        self.vps.len()
    }

    /// Validation state of each snapshot entry, in snapshot order.
    pub fn states(&self) -> &[ValidationState] {
        &self.states
    }

    fn subset(&self, subset: Option<&[usize]>) -> Result<Vec<usize>, InferenceError> {
        match subset {
            None => Ok((0..self.vps.len()).collect()),
            Some(s) => {
                if let Some(&bad) = s.iter().find(|&&i| i >= self.vps.len()) {
                    return Err(InferenceError::BadSubset(bad));
                }
                Ok(s.to_vec())
            }
        }
    }

    fn flags_for_vp(&self, v: usize) -> BTreeSet<Asn> {
        let entries = self.snapshot.entries();
        let mut flags = BTreeSet::new();
        for &i in self.vp_entries[v] {
            if !self.states[i].is_invalid() {
                continue;
            }
            let origin = entries[i].origin();
            if self.exceptions[v].contains(&origin) {
                continue;
            }
            flags.extend(self.members[i].iter().copied().filter(|&a| a != origin));
        }
        flags
    }

    fn candidates_for_vp(&self, v: usize, flagged: &BTreeSet<Asn>) -> BTreeMap<Asn, BTreeSet<Asn>> {
        let entries = self.snapshot.entries();
        let mut out: BTreeMap<Asn, BTreeSet<Asn>> = BTreeMap::new();
        for g in &self.vp_groups[v] {
            for &ok in &g.non_invalid {
                let origin = entries[ok].origin();
                for &bad in &g.invalid {
                    if let Some(asn) = sole_difference(&self.members[ok], &self.members[bad]) {
                        if asn != origin && !flagged.contains(&asn) {
                            out.entry(asn).or_default().insert(origin);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn flag_non_enforcing(&self, subset: Option<&[usize]>) -> Result<BTreeSet<Asn>, InferenceError> {
        let vps = self.subset(subset)?;
        Ok(vps
            .par_iter()
            .map(|&v| self.flags_for_vp(v))
            .reduce(BTreeSet::new, |mut a, b| {
                a.extend(b);
                a
            }))
    }

    pub fn mark_candidates(
        &self,
        subset: Option<&[usize]>,
        flagged: &BTreeSet<Asn>,
    ) -> Result<BTreeMap<Asn, BTreeSet<Asn>>, InferenceError> {
        let vps = self.subset(subset)?;
        Ok(vps
            .par_iter()
            .map(|&v| self.candidates_for_vp(v, flagged))
            .reduce(BTreeMap::new, merge_candidates))
    }

    /// Runs all three steps on the given VP indexes (all when `None`).
    pub fn run(&self, subset: Option<&[usize]>, threshold: u32) -> Result<InferenceResult, InferenceError> {
        if threshold < 1 {
            return Err(InferenceError::BadThreshold(threshold));
        }
        let non_enforcing = self.flag_non_enforcing(subset)?;
        let candidates = self.mark_candidates(subset, &non_enforcing)?;
        let enforcing = classify(&candidates, threshold)?;
        Ok(InferenceResult {
            threshold,
            non_enforcing,
            candidates,
            enforcing,
        })
    }
}

fn merge_candidates(
    mut a: BTreeMap<Asn, BTreeSet<Asn>>,
    b: BTreeMap<Asn, BTreeSet<Asn>>,
) -> BTreeMap<Asn, BTreeSet<Asn>> {
    for (k, v) in b {
        a.entry(k).or_default().extend(v);
    }
    a
}

/// The single element of `a \ b`, if there is exactly one. Both sorted.
fn sole_difference(a: &[Asn], b: &[Asn]) -> Option<Asn> {
    let mut found = None;
    for x in a {
        if b.binary_search(x).is_err() {
            if found.is_some() {
                return None;
            }
            found = Some(*x);
        }
    }
    found
}

/// ASes marked for at least `threshold` distinct origins.
pub fn classify(
    candidates: &BTreeMap<Asn, BTreeSet<Asn>>,
    threshold: u32,
) -> Result<BTreeSet<Asn>, InferenceError> {
    if threshold < 1 {
        return Err(InferenceError::BadThreshold(threshold));
    }
    Ok(candidates
        .iter()
        .filter(|(_, origins)| origins.len() >= threshold as usize)
        .map(|(a, _)| *a)
        .collect())
}

pub fn flag_non_enforcing(
    snapshot: &RibSnapshot,
    roas: &RoaSet,
    rels: Option<&AsRelationships>,
    scope: CustomerScope,
) -> BTreeSet<Asn> {
    Pipeline::new(snapshot, roas, rels, scope)
        .flag_non_enforcing(None)
        .expect("full subset")
}

pub fn mark_candidates(
    snapshot: &RibSnapshot,
    roas: &RoaSet,
    flagged: &BTreeSet<Asn>,
) -> BTreeMap<Asn, BTreeSet<Asn>> {
    Pipeline::new(snapshot, roas, None, CustomerScope::Direct)
        .mark_candidates(None, flagged)
        .expect("full subset")
}

/// The whole pipeline on every vantage point of `snapshot`.
pub fn infer(
    snapshot: &RibSnapshot,
    roas: &RoaSet,
    rels: Option<&AsRelationships>,
    scope: CustomerScope,
    threshold: u32,
) -> Result<InferenceResult, InferenceError> {
    Pipeline::new(snapshot, roas, rels, scope).run(None, threshold)
}
