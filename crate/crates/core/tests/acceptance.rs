//! Acceptance checks. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits nonzero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use rovscope::analysis::{sample_vps, SampleConfig};
use rovscope::experiment::{
    infer_filtering, run_filter_experiment, run_prefer_valid_experiment, ObservationClass, SimDriver,
    SwitchEvidence, Variant, Verdict,
};
use rovscope::inference::{infer, CustomerScope};
use rovscope::report::strip_header;
use rovscope::rib::ParseOptions;
use rovscope::sim::{plant_scenario, ScenarioKind};
use rovscope::{Asn, IpPrefix, RibSnapshot, RoaSet, ValidationState, Vrp};

use common::{
    asns, fixture, observable_adjacent_filters, random_filter_scenario, rovscope, run_filter, scenario_fixture,
    A, C, D, E, O,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    } else {
        Ok(())
    }
}

fn run_ok(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = rovscope(args);
    if out.status.success() {
        Ok(out.stdout)
    } else {
        Err(format!(
            "rovscope {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn asn_list(v: &Value) -> BTreeSet<u32> {
    v.as_array()
        .map(|a| a.iter().filter_map(Value::as_u64).map(|x| x as u32).collect())
        .unwrap_or_default()
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

// 1. RFC 6811 against a scan-everything oracle

fn to_bits(addr: IpAddr) -> u128 {
    match addr {
        IpAddr::V4(a) => (u32::from(a) as u128) << 96,
        IpAddr::V6(a) => u128::from(a),
    }
}

fn naive_validate(vrps: &[Vrp], origin: Asn, route: &IpPrefix) -> ValidationState {
    let mut covered = false;
    for v in vrps {
        let same_family = v.prefix.addr().is_ipv4() == route.addr().is_ipv4();
        let len = u32::from(v.prefix.len());
        let shared = len == 0 || (to_bits(v.prefix.addr()) ^ to_bits(route.addr())) >> (128 - len) == 0;
        if same_family && v.prefix.len() <= route.len() && shared {
            covered = true;
            if v.origin_asn.0 != 0 && v.origin_asn == origin && route.len() <= v.max_length {
                return ValidationState::Valid;
            }
        }
    }
    if covered {
        ValidationState::Invalid
    } else {
        ValidationState::NotFound
    }
}

fn random_prefix(rng: &mut ChaCha8Rng, v6: bool, min_len: u8) -> IpPrefix {
    // addresses from a narrow block so that prefixes overlap often
    let (addr, max) = if v6 {
        let a = Ipv6Addr::from((0x2001_0db8u128 << 96) | (rng.gen::<u128>() >> 44));
        (IpAddr::V6(a), 64)
    } else {
        let a = Ipv4Addr::from(0x0a00_0000u32 | (rng.gen::<u32>() >> 14));
        (IpAddr::V4(a), 32)
    };
    let base = if v6 { 32 } else { 8 };
    IpPrefix::truncating(addr, rng.gen_range(base.max(min_len)..=max)).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6811);
    let mut counts = BTreeMap::new();
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let v6 = rng.gen_bool(0.3);
        let vrps: Vec<Vrp> = (0..rng.gen_range(0..12))
            .map(|_| {
                let family_v6 = v6 ^ rng.gen_bool(0.1);
                let p = random_prefix(&mut rng, family_v6, 0);
                let top = if p.addr().is_ipv4() { 32 } else { 128 };
                let maxlen = rng.gen_range(p.len()..=top.min(p.len() + 8));
                Vrp::new(p, maxlen, Asn(rng.gen_range(0..4))).unwrap()
            })
            .collect();
        let route = random_prefix(&mut rng, v6, 12);
        let origin = Asn(rng.gen_range(0..4));
        let roas: RoaSet = vrps.iter().copied().collect();
        let got = roas.validate(origin, &route);
        let want = naive_validate(&vrps, origin, &route);
        if got != want {
            mismatches += 1;
        }
        *counts.entry(want).or_insert(0u32) += 1;
    }
    ensure!(mismatches == 0, "{mismatches} mismatches");
    ensure!(counts.len() == 3, "not every state exercised: {counts:?}");
    within(start, Duration::from_secs(10))?;
    Ok(format!("0 of 10000 differ ({counts:?}) in {:.1?}", start.elapsed()))
}

// 2. the four-path worked example

fn criterion_2(tmp: &Path) -> Outcome {
    let vrps = fixture("worked_example_vrps.csv");
    let mut outputs = Vec::new();
    for (i, rib) in ["worked_example.jsonl", "worked_example.jsonl", "worked_example.jsonl.gz"]
        .iter()
        .enumerate()
    {
        // reports name their manifest, so reruns share the file name
        let out = tmp.join(format!("c2-{i}")).join("infer.json");
        run_ok(&["infer", "--rib", s(&fixture(rib)), "--vrps", s(&vrps), "--out", s(&out)])?;
        outputs.push(fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure!(outputs.windows(2).all(|w| w[0] == w[1]), "reruns differ");
    let v: Value = serde_json::from_slice(&outputs[0]).map_err(|e| e.to_string())?;
    let candidates: BTreeMap<String, BTreeSet<u32>> = v["candidates"]
        .as_object()
        .ok_or("no candidates")?
        .iter()
        .map(|(k, v)| (k.clone(), asn_list(v)))
        .collect();
    let want = BTreeMap::from([(C.to_string(), BTreeSet::from([O])), (E.to_string(), BTreeSet::from([O]))]);
    ensure!(candidates == want, "candidates {candidates:?}");
    let flagged = asn_list(&v["non_enforcing"]);
    ensure!(flagged == BTreeSet::from([A, D]), "non-enforcing {flagged:?}");
    Ok("candidates {C: [O], E: [O]}, non-enforcing {A, D}, three runs byte-identical (plain and gzip)".into())
}

// 3. threshold

/// A vantage point reaching `k` origins both through AS 10 (valid /16) and
/// directly through AS 20 (invalid /24): AS 10 is marked for each.
fn marked_for(k: u32) -> RibSnapshot {
    let mut lines = String::new();
    for o in 0..k {
        let origin = 1001 + o;
        for (prefix, path) in [
            (format!("10.{o}.0.0/16"), format!("[10,20,{origin}]")),
            (format!("10.{o}.1.0/24"), format!("[20,{origin}]")),
        ] {
            lines.push_str(&format!(
                "{{\"collector\":\"rrc00\",\"peer_asn\":9,\"peer_id\":\"p9\",\"prefix\":\"{prefix}\",\"path\":{path},\"ts\":0}}\n"
            ));
        }
    }
    RibSnapshot::parse_jsonl(lines.as_bytes(), ParseOptions::default()).unwrap().0
}

fn roas_for(k: u32) -> RoaSet {
    (0..k)
        .map(|o| Vrp::exact(format!("10.{o}.0.0/16").parse().unwrap(), Asn(1001 + o)))
        .collect()
}

fn criterion_3() -> Outcome {
    let mut seen = Vec::new();
    for k in [2, 3] {
        let r = infer(&marked_for(k), &roas_for(k), None, CustomerScope::Direct, 3).map_err(|e| e.to_string())?;
        let marks = r.candidates.get(&Asn(10)).map_or(0, BTreeSet::len);
        ensure!(marks == k as usize, "AS10 marked for {marks} origins, expected {k}");
        seen.push((k, r.enforcing.contains(&Asn(10))));
    }
    ensure!(seen == vec![(2, false), (3, true)], "{seen:?}");
    Ok("marked for 2 origins: not enforcing; for 3: enforcing".into())
}

// 4. subset misclassification

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let load = |name: &str| fs::read(fixture(name)).unwrap();
    let (snap, _) = RibSnapshot::parse_jsonl(&load("sixty_vp.jsonl")[..], ParseOptions::default())
        .map_err(|e| e.to_string())?;
    let roas = RoaSet::from_csv(&load("sixty_vp_vrps.csv")[..]).map_err(|e| e.to_string())?;
    ensure!(snap.vp_count() == 60, "{} vantage points", snap.vp_count());
    let cfg = SampleConfig {
        sample_size: 44,
        samples: 5000,
        seed: 2016,
        ..SampleConfig::default()
    };
    let a = sample_vps(&snap, &roas, None, cfg).map_err(|e| e.to_string())?;
    let b = sample_vps(&snap, &roas, None, cfg).map_err(|e| e.to_string())?;
    ensure!(a == b, "same seed, different reports");
    let with_fp = a.rows.iter().filter(|r| r.false_positives > 0).count();
    ensure!(with_fp >= 1, "no sample misclassifies");
    // on the full set no AS is both enforcing and non-enforcing, and nothing
    // here actually validates
    ensure!(a.full.enforcing.is_disjoint(&a.full.non_enforcing), "full run contradicts itself");
    ensure!(a.full.enforcing.is_empty(), "full run calls {:?} enforcing", a.full.enforcing);
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "{with_fp} of 5000 samples of 44 have false positives, full set 0; deterministic; {:.1?}",
        start.elapsed()
    ))
}

// 5. traffic engineering through simulator and passive pipeline

fn last_snapshot(dir: &Path) -> Result<PathBuf, String> {
    let mut snaps: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("snapshot-"))
        .collect();
    snaps.sort();
    snaps.pop().ok_or_else(|| "no snapshots".into())
}

fn criterion_5(tmp: &Path) -> Outcome {
    let dir = tmp.join("c5");
    let scenario = scenario_fixture(ScenarioKind::TrafficEngineering);
    run_ok(&["simulate", "--scenario", s(&scenario), "--out-snapshots", s(&dir)])?;
    let truth = read_json(&dir.join("ground_truth.json"))?;
    ensure!(
        asn_list(&truth["filter_invalid"]).is_empty() && asn_list(&truth["prefer_valid"]).is_empty(),
        "planted truth not empty"
    );
    let rib = last_snapshot(&dir)?;
    let vrps = dir.join("vrps.csv");
    let out = tmp.join("c5-infer.json");
    run_ok(&["infer", "--rib", s(&rib), "--vrps", s(&vrps), "--out", s(&out)])?;
    let enforcing = asn_list(&read_json(&out)?["enforcing"]);
    ensure!(!enforcing.is_empty(), "nothing classified enforcing");
    let div = tmp.join("c5-div.csv");
    run_ok(&["divergence", "--rib", s(&rib), "--vrps", s(&vrps), "--out", s(&div)])?;
    let text = fs::read_to_string(&div).map_err(|e| e.to_string())?;
    let (_, body) = strip_header(&text).ok_or("no header")?;
    let mut totals = BTreeMap::new();
    for line in body.lines().skip(1).filter(|l| l.starts_with("*,")) {
        let f: Vec<&str> = line.split(',').collect();
        totals.insert(f[4].to_string(), f[5].parse::<u64>().map_err(|e| e.to_string())?);
    }
    let all: u64 = totals.values().sum();
    ensure!(all > 0, "no coverage pairs");
    ensure!(totals.get("1") == Some(&all), "histogram {totals:?}");
    Ok(format!("enforcing {enforcing:?} with no ROV planted; {all} of {all} coverage pairs diverge at hop 1"))
}

// 6. random topologies

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (mut verdicts, mut needed, mut planted_total) = (0, 0, 0);
    for seed in 0..100u64 {
        let run = run_filter(random_filter_scenario(seed, 0.0), Variant::Base);
        let planted = run.scenario.planted().filter_invalid;
        let found = run.inference.with_verdict(Verdict::FilterInvalid);
        let fp: Vec<_> = found.difference(&planted).collect();
        ensure!(fp.is_empty(), "seed {seed}: false positives {fp:?}");
        let observable = observable_adjacent_filters(&run);
        let missed: Vec<_> = observable.difference(&found).collect();
        ensure!(missed.is_empty(), "seed {seed}: missed {missed:?}");
        verdicts += found.len();
        needed += observable.len();
        planted_total += planted.len();
    }
    within(start, Duration::from_secs(300))?;
    Ok(format!(
        "100 topologies: {verdicts} filter_invalid verdicts, 0 false; {needed} observable of {planted_total} planted, 0 missed; {:.1?}",
        start.elapsed()
    ))
}

// 7. route-server filtering

fn criterion_7(tmp: &Path) -> Outcome {
    let scenario = scenario_fixture(ScenarioKind::RouteServerFilter);
    let dir = tmp.join("c7");
    run_ok(&["simulate", "--scenario", s(&scenario), "--out-snapshots", s(&dir)])?;
    let out = tmp.join("c7-infer.json");
    let vrps = dir.join("vrps.csv");
    run_ok(&["infer", "--rib", s(&last_snapshot(&dir)?), "--vrps", s(&vrps), "--out", s(&out)])?;
    let flagged = asn_list(&read_json(&out)?["non_enforcing"]);
    ensure!(flagged.contains(&50300), "passive pipeline does not flag AS50300: {flagged:?}");

    let exp = tmp.join("c7-exp.json");
    run_ok(&["experiment", "--scenario", s(&scenario), "--out", s(&exp)])?;
    let report = read_json(&exp)?;
    let verdict = report["inference"]["verdicts"]
        .as_array()
        .and_then(|v| v.iter().find(|v| v["asn"] == 50300))
        .ok_or("no verdict for AS50300")?;
    ensure!(verdict["verdict"] == "filter_invalid", "verdict {}", verdict["verdict"]);
    let sessions = verdict["sessions"].as_array().cloned().unwrap_or_default();
    ensure!(
        !sessions.is_empty() && sessions.iter().all(|s| s["via_route_server"] == true),
        "sessions {sessions:?}"
    );
    Ok("AS50300 non-enforcing passively, filter_invalid on its route-server session".into())
}

// 8. non-adjacent localization

fn criterion_8() -> Outcome {
    let one = run_filter(plant_scenario(ScenarioKind::NonAdjacentFilter), Variant::Base);
    let set = one
        .inference
        .candidate_sets
        .iter()
        .find(|c| c.observed == ObservationClass::O3)
        .ok_or("no O3 candidate set")?;
    ensure!(set.candidates.contains(&Asn(59715)), "candidates {:?}", set.candidates);
    let two = run_filter(plant_scenario(ScenarioKind::NonAdjacentFilterTwoVps), Variant::Base);
    let o3: Vec<_> = two
        .inference
        .candidate_sets
        .iter()
        .filter(|c| c.observed == ObservationClass::O3)
        .collect();
    ensure!(
        o3.len() == 1 && o3[0].candidates == asns(&[59715]),
        "two-VP candidate sets {o3:?}"
    );
    ensure!(
        two.inference.with_verdict(Verdict::FilterInvalid) == asns(&[59715]),
        "two-VP verdicts {:?}",
        two.inference.verdicts
    );
    Ok(format!("one VP: {:?}; two VPs: {{59715}}", set.candidates))
}

// 9. prefer-valid versus filtering

fn criterion_9() -> Outcome {
    let run = |kind| {
        let s = plant_scenario(kind);
        let mut d = SimDriver::new(s.topology().unwrap(), RoaSet::empty());
        run_prefer_valid_experiment(&mut d, s.plan.as_ref().unwrap()).map_err(|e| e.to_string())
    };
    let pv = run(ScenarioKind::PreferValid)?;
    let v = pv.inference.verdict(Asn(64530)).ok_or("no verdict for AS64530")?;
    ensure!(
        v.verdict == Verdict::PreferValid && v.strength == Some(SwitchEvidence::Strong),
        "verdict {v:?}"
    );
    let t = pv
        .tracking
        .iter()
        .find(|t| t.vp.peer_asn == Asn(64530))
        .ok_or("AS64530 not tracked")?;
    let configs: Vec<String> = t.configs.iter().map(|c| c.config.to_string()).collect();
    ensure!(configs.join(",").contains("C1,C2,C1"), "configs {configs:?}");
    ensure!(t.reference_stable && t.tracks_validity, "tracking {t:?}");

    let filt = run(ScenarioKind::PreferValidFilter)?;
    ensure!(
        filt.inference.with_verdict(Verdict::PreferValid).is_empty(),
        "filter scenario yields prefer_valid"
    );
    ensure!(
        filt.inference.with_verdict(Verdict::FilterInvalid).contains(&Asn(64530)),
        "filter scenario verdicts {:?}",
        filt.inference.verdicts
    );
    Ok(format!(
        "strong prefer_valid ({} switches over {}, P_R stable); filtering twin: filter_invalid",
        t.switches,
        configs.join("→")
    ))
}

// 10. withdraw and re-announce

fn criterion_10() -> Outcome {
    let class_of = |variant| -> Result<(BTreeSet<ObservationClass>, BTreeSet<Asn>), String> {
        let s = plant_scenario(ScenarioKind::NonRevalidatingFilter);
        let mut d = SimDriver::new(s.topology().unwrap(), RoaSet::empty());
        let out = run_filter_experiment(&mut d, s.plan.as_ref().unwrap(), variant).map_err(|e| e.to_string())?;
        let classes = out
            .observations
            .iter()
            .filter(|o| o.vp.peer_asn == Asn(8283))
            .map(|o| o.class)
            .collect();
        Ok((classes, infer_filtering(&out.observations).with_verdict(Verdict::FilterInvalid)))
    };
    let (base, base_found) = class_of(Variant::Base)?;
    let (wr, wr_found) = class_of(Variant::WithdrawReannounce)?;
    ensure!(base == BTreeSet::from([ObservationClass::O1]), "base classes {base:?}");
    ensure!(!base_found.contains(&Asn(8283)), "base finds AS8283");
    ensure!(wr == BTreeSet::from([ObservationClass::O3]), "variant classes {wr:?}");
    ensure!(wr_found == asns(&[8283]), "variant verdicts {wr_found:?}");
    Ok("base: O1, missed; withdraw-reannounce: O3, filter_invalid".into())
}

// 11. determinism across thread counts

fn report_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in walk(dir) {
        let name = e.strip_prefix(dir).unwrap().display().to_string();
        if !name.ends_with("manifest.json") {
            out.insert(name, fs::read(&e).unwrap());
        }
    }
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap().flatten() {
        let p = e.path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn run_ids(dir: &Path) -> BTreeMap<String, String> {
    walk(dir)
        .into_iter()
        .filter(|p| p.to_string_lossy().ends_with("manifest.json"))
        .map(|p| {
            let m = read_json(&p).unwrap();
            (
                p.strip_prefix(dir).unwrap().display().to_string(),
                m["run_id"].as_str().unwrap_or_default().to_string(),
            )
        })
        .collect()
}

fn all_subcommands(dir: &Path, threads: &str) -> Result<Vec<u8>, String> {
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let o = |name: &str| dir.join(name).display().to_string();
    let rib = fixture("sixty_vp.jsonl").display().to_string();
    let vrps = fixture("sixty_vp_vrps.csv").display().to_string();
    let worked = fixture("worked_example.jsonl.gz").display().to_string();
    let worked_vrps = fixture("worked_example_vrps.csv").display().to_string();
    let scen = |k| scenario_fixture(k).display().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["validate".into(), "--vrps".into(), worked_vrps.clone(), "--rib".into(), worked.clone(), "--out".into(), o("validate.csv")],
        vec!["infer".into(), "--rib".into(), rib.clone(), "--vrps".into(), vrps.clone(), "--out".into(), o("infer.json")],
        vec![
            "sample".into(), "--rib".into(), rib.clone(), "--vrps".into(), vrps.clone(), "--k".into(), "300".into(),
            "--seed".into(), "7".into(), "--out".into(), o("sample.csv"),
        ],
        vec![
            "visibility".into(), "--rib".into(), rib.clone(), "--vrps".into(), vrps.clone(), "--out".into(), o("vis.csv"),
            "--completeness-out".into(), o("completeness.csv"),
        ],
        vec!["coverage".into(), "--rib".into(), rib.clone(), "--vrps".into(), vrps.clone(), "--out".into(), o("coverage.csv")],
        vec!["divergence".into(), "--rib".into(), rib.clone(), "--vrps".into(), vrps, "--out".into(), o("divergence.csv")],
        vec!["simulate".into(), "--scenario".into(), scen(ScenarioKind::TrafficEngineering), "--out-snapshots".into(), o("sim-d")],
        vec!["simulate".into(), "--scenario".into(), scen(ScenarioKind::AdjacentFilter), "--out-snapshots".into(), o("sim-a")],
        vec!["experiment".into(), "--scenario".into(), scen(ScenarioKind::RouteServerFilter), "--out".into(), o("exp-b.json")],
        vec![
            "experiment".into(), "--scenario".into(), scen(ScenarioKind::NonRevalidatingFilter), "--variant".into(),
            "withdraw-reannounce".into(), "--out".into(), o("exp-f.json"),
        ],
        vec![
            "experiment".into(), "--scenario".into(), scen(ScenarioKind::PreferValid), "--variant".into(), "prefer-valid".into(),
            "--out".into(), o("exp-e.json"),
        ],
    ];
    for r in &runs {
        let mut args: Vec<&str> = vec!["--threads", threads];
        args.extend(r.iter().map(String::as_str));
        run_ok(&args)?;
    }
    // single-route validation prints to stdout
    run_ok(&["--threads", threads, "validate", "--vrps", &worked_vrps, "--prefix", "10.2.4.0/24", "--origin", "64496"])
}

fn criterion_11(tmp: &Path) -> Outcome {
    let (one, eight) = (tmp.join("c11-t1"), tmp.join("c11-t8"));
    let stdout1 = all_subcommands(&one, "1")?;
    let stdout8 = all_subcommands(&eight, "8")?;
    ensure!(stdout1 == stdout8, "validate stdout differs");
    let (a, b) = (report_files(&one), report_files(&eight));
    ensure!(a.keys().eq(b.keys()), "different report files: {:?} vs {:?}", a.keys(), b.keys());
    let differing: Vec<&String> = a.keys().filter(|k| a[*k] != b[*k]).collect();
    ensure!(differing.is_empty(), "reports differ: {differing:?}");
    let (ia, ib) = (run_ids(&one), run_ids(&eight));
    ensure!(ia.len() == 11 && ia == ib, "run ids {ia:?} vs {ib:?}");
    Ok(format!(
        "8 subcommands, {} reports and {} manifests: byte-identical with --threads 1 and 8, same run ids",
        a.len(),
        ia.len()
    ))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let t = tmp.path();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("RFC 6811 oracle equivalence", Box::new(criterion_1)),
        ("worked example", Box::new(|| criterion_2(t))),
        ("threshold", Box::new(criterion_3)),
        ("subset misclassification", Box::new(criterion_4)),
        ("traffic-engineering false positive", Box::new(|| criterion_5(t))),
        ("controlled soundness and completeness", Box::new(criterion_6)),
        ("route-server filtering", Box::new(|| criterion_7(t))),
        ("non-adjacent localization", Box::new(criterion_8)),
        ("prefer-valid discrimination", Box::new(criterion_9)),
        ("withdraw-reannounce variant", Box::new(criterion_10)),
        ("determinism", Box::new(|| criterion_11(t))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
