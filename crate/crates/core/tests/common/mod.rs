//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rovscope::experiment::{
    infer_filtering, run_filter_experiment, ExperimentOutcome, PolicyInference, SimDriver,
    Variant,
};
use rovscope::sim::{
    plant_scenario, AsNode, GroundTruth, Link, RovPolicy, Scenario, ScenarioKind, PRIMARY_ORIGIN, SCHEMA_VERSION,
};
use rovscope::{Asn, RoaSet};

pub const O: u32 = 64496;
pub const A: u32 = 64497;
pub const C: u32 = 64498;
pub const D: u32 = 64499;
pub const E: u32 = 64500;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Catalog scenarios are also checked in as JSON files; set
/// `ROVSCOPE_BLESS=1` to rewrite them after a catalog change.
pub fn scenario_fixture(kind: ScenarioKind) -> PathBuf {
    let path = fixture(&format!("scenarios/{}.json", kind.name()));
    let json = plant_scenario(kind).to_json();
    if std::env::var_os("ROVSCOPE_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &json).unwrap();
    }
    path
}

pub fn rovscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rovscope"))
        .args(args)
        .env_remove("ROVSCOPE_DATA_DIR")
        .output()
        .expect("binary runs")
}

pub fn asns(v: &[u32]) -> BTreeSet<Asn> {
    v.iter().map(|&a| Asn(a)).collect()
}

/// A random valley-free topology around the experiment origin.
///
/// A clique of 3-5 top-tier ASes; every later AS buys transit from 1-3
/// earlier ones and sometimes peers with another; the origin is a customer
/// of 1-3 ASes and may also peer, sometimes over a route server. Roughly
/// 40% of origin neighbors filter invalid routes, and a fraction
/// `elsewhere` of all other ASes; half the ASes are vantage points, origin
/// neighbors more often.
pub fn random_filter_scenario(seed: u64, elsewhere: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(20..=60usize);
    let transit: Vec<u32> = (0..n as u32 - 1).map(|i| 65001 + i).collect();
    let tier1 = rng.gen_range(3..=5usize);
    let origin = PRIMARY_ORIGIN.0;
    let mut links = Vec::new();
    let mut linked = BTreeSet::new();
    let mut add = |links: &mut Vec<Link>, l: Link| {
        let key = (l.a.min(l.b), l.a.max(l.b));
        if l.a != l.b && linked.insert(key) {
            links.push(l);
        }
    };
    for i in 0..tier1 {
        for j in i + 1..tier1 {
            add(&mut links, Link::peer(transit[i], transit[j]));
        }
    }
    for i in tier1..transit.len() {
        let k = rng.gen_range(1..=3usize).min(i);
        for &p in transit[..i].choose_multiple(&mut rng, k) {
            add(&mut links, Link::provider(p, transit[i]));
        }
        if rng.gen_bool(0.2) {
            let q = transit[rng.gen_range(0..i)];
            add(&mut links, Link::peer(q, transit[i]));
        }
    }
    let k = rng.gen_range(1..=3usize);
    let upstreams: Vec<u32> = transit.choose_multiple(&mut rng, k).copied().collect();
    for &u in &upstreams {
        add(&mut links, Link::provider(u, origin));
    }
    let mut neighbors: BTreeSet<u32> = upstreams.iter().copied().collect();
    if rng.gen_bool(0.5) {
        let p = transit[rng.gen_range(0..transit.len())];
        if !neighbors.contains(&p) {
            let l = Link::peer(p, origin);
            add(&mut links, if rng.gen_bool(0.5) { l.route_server() } else { l });
            neighbors.insert(p);
        }
    }
    let mut nodes = vec![AsNode::new(origin)];
    for &t in &transit {
        let adjacent = neighbors.contains(&t);
        let mut node = AsNode::new(t);
        if rng.gen_bool(if adjacent { 0.8 } else { 0.5 }) {
            node = node.vp();
        }
        if rng.gen_bool(if adjacent { 0.4 } else { elsewhere }) {
            node = node.policy(RovPolicy::FilterInvalid);
        }
        nodes.push(node);
    }
    let mut s = Scenario {
        schema_version: SCHEMA_VERSION,
        name: format!("random-{seed}"),
        description: String::new(),
        seed,
        horizon: 0,
        nodes,
        links,
        initial_roas: Vec::new(),
        events: Vec::new(),
        ground_truth: None,
        plan: plant_scenario(ScenarioKind::AdjacentFilter).plan,
    };
    s.ground_truth = Some(s.planted());
    s
}

pub struct FilterRun {
    pub scenario: Scenario,
    pub outcome: ExperimentOutcome,
    pub inference: PolicyInference,
}

pub fn run_filter(scenario: Scenario, variant: Variant) -> FilterRun {
    let mut d = SimDriver::new(scenario.topology().unwrap(), RoaSet::empty());
    let outcome = run_filter_experiment(&mut d, scenario.plan.as_ref().unwrap(), variant).unwrap();
    let inference = infer_filtering(&outcome.observations);
    FilterRun {
        scenario,
        outcome,
        inference,
    }
}

/// Planted filters adjacent to the origin that are vantage points with an
/// eligible observation over their direct session with the origin.
pub fn observable_adjacent_filters(run: &FilterRun) -> BTreeSet<Asn> {
    let truth: GroundTruth = run.scenario.planted();
    let origin = PRIMARY_ORIGIN;
    run.outcome
        .observations
        .iter()
        .filter(|o| o.class.is_eligible())
        .filter(|o| truth.filter_invalid.contains(&o.vp.peer_asn))
        .filter(|o| o.c1_path.as_deref() == Some(&[origin][..]))
        .map(|o| o.vp.peer_asn)
        .collect()
}
