//! The `rovscope` command line.
//!
//! Exit status: 0 on success, 1 on usage errors (with help text), 2 on
//! data errors (unreadable or malformed inputs, failed runs).

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use serde_json::Value;

use crate::analysis::{self, SampleConfig};
use crate::asn::Asn;
use crate::experiment::{
    run_filter_experiment, run_prefer_valid_experiment, Driver, ExperimentOutcome, ExperimentPlan,
    PolicyInference, RecordedDriver, SimDriver, Variant, Verdict,
};
use crate::inference::{CustomerScope, Pipeline, DEFAULT_THRESHOLD};
use crate::io::{read_input, resolve_input};
use crate::prefix::IpPrefix;
use crate::relationships::AsRelationships;
use crate::report::{manifest_path_for, write_json_report, write_text_report, RunManifest};
use crate::rib::{ParseOptions, ParseStats, RibSnapshot};
use crate::rpki::RoaSet;
use crate::sim::{plant_scenario, EventKind, GroundTruth, Scenario, ScenarioKind};

#[derive(Debug, Parser)]
#[command(
    name = "rovscope",
    version,
    about = "Measure RPKI route origin validation adoption",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Seed for every random choice (sampling, simulated delays).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// RFC 6811 validation of RIB entries or a single route.
    Validate(ValidateArgs),
    /// Passive, collector-based ROV inference.
    Infer(InferArgs),
    /// Rerun the passive inference on random vantage point subsets.
    Sample(SampleArgs),
    /// Prefixes and origins seen per vantage point.
    Visibility(VisibilityArgs),
    /// Invalid routes covered by a less-specific non-invalid route.
    Coverage(PathArgs),
    /// Where covered invalid routes diverge from their covering route.
    Divergence(PathArgs),
    /// Run a topology scenario and write collector snapshots.
    Simulate(SimulateArgs),
    /// Run a controlled announcement/ROA experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct RibInputs {
    /// Canonical JSONL RIB (plain or gzip).
    #[arg(long)]
    pub rib: PathBuf,
    /// VRP CSV with prefix,maxlen,asn columns (plain or gzip).
    #[arg(long)]
    pub vrps: PathBuf,
    /// Fraction of malformed RIB records tolerated.
    #[arg(long, default_value_t = 0.10)]
    pub max_malformed: f64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// VRP CSV with prefix,maxlen,asn columns (plain or gzip).
    #[arg(long)]
    pub vrps: PathBuf,
    /// RIB whose entries to validate (requires --out).
    #[arg(long, requires = "out", conflicts_with_all = ["prefix", "origin"])]
    pub rib: Option<PathBuf>,
    /// Validate one route instead of a RIB.
    #[arg(long, requires = "origin")]
    pub prefix: Option<IpPrefix>,
    /// Origin AS of the single route, with or without an `AS` prefix.
    #[arg(long, requires = "prefix")]
    pub origin: Option<Asn>,
    /// Fraction of malformed RIB records tolerated.
    #[arg(long, default_value_t = 0.10)]
    pub max_malformed: f64,
    /// Per-entry CSV report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScopeArg {
    /// The vantage point's AS and its direct customers.
    Direct,
    /// The vantage point's AS and its whole customer cone.
    Cone,
}

impl From<ScopeArg> for CustomerScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Direct => CustomerScope::Direct,
            ScopeArg::Cone => CustomerScope::Cone,
        }
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub input: RibInputs,
    /// AS relationships (`a|b|-1` provider-customer, `a|b|0` peers).
    #[arg(long)]
    pub rels: Option<PathBuf>,
    /// Distinct origins an AS must be marked for to count as enforcing.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: u32,
    /// Restrict to these vantage points: a file or a comma-separated list
    /// of peer ASNs or `collector/peer_id` names.
    #[arg(long)]
    pub vps: Option<String>,
    #[arg(long, value_enum, default_value = "direct")]
    pub customer_scope: ScopeArg,
    /// JSON report; a manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub input: RibInputs,
    /// AS relationships (`a|b|-1` provider-customer, `a|b|0` peers).
    #[arg(long)]
    pub rels: Option<PathBuf>,
    /// Vantage points per sample.
    #[arg(long, default_value_t = 44)]
    pub n: usize,
    /// Number of samples.
    #[arg(long, default_value_t = 5000)]
    pub k: usize,
    /// Distinct origins an AS must be marked for to count as enforcing.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: u32,
    #[arg(long, value_enum, default_value = "direct")]
    pub customer_scope: ScopeArg,
    /// Per-sample CSV report; a manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VisibilityArgs {
    #[command(flatten)]
    pub input: RibInputs,
    /// Per-vantage-point CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV: fraction of vantage points needed to see N invalid
    /// origins.
    #[arg(long)]
    pub completeness_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub input: RibInputs,
    /// Compare paths without removing prepending.
    #[arg(long)]
    pub raw_paths: bool,
    /// CSV report; a manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON file or catalog name (a-f, adjacent-filter, ...).
    #[arg(long)]
    pub scenario: String,
    /// Directory for snapshot-NNNN-tT.jsonl files, vrps.csv and the
    /// manifest.
    #[arg(long)]
    pub out_snapshots: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DriverArg {
    Sim,
    Recorded,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Base,
    WithdrawReannounce,
    PreferValid,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Plan JSON; defaults to the scenario's embedded plan.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Substrate the experiment runs on.
    #[arg(long, value_enum, default_value = "sim")]
    pub driver: DriverArg,
    /// Scenario JSON file or catalog name; required for the sim driver.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Recorded snapshots (JSONL files, or directories of them, in schedule
    /// order); required for the recorded driver.
    #[arg(long, num_args = 1..)]
    pub recorded: Vec<PathBuf>,
    /// Which experiment to run.
    #[arg(long, value_enum, default_value = "base")]
    pub variant: VariantArg,
    /// Override the plan's number of rounds.
    #[arg(long)]
    pub rounds: Option<u32>,
    /// JSON report; a manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

/// Why a run stopped.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn data<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data(format!("{context}: {e}"))
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    init_logging(&cli.log_level);
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) | CliError::Data(m) => m,
            };
            eprintln!("error: {msg}");
            e.exit_code()
        }
    }
}

fn init_logging(level: &str) {
    let _ = env_logger::Builder::new()
        .parse_filters(level)
        .target(env_logger::Target::Stderr)
        .try_init();
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(data("thread pool"))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Validate(a) => cmd_validate(cli, a),
        Command::Infer(a) => cmd_infer(cli, a),
        Command::Sample(a) => cmd_sample(cli, a),
        Command::Visibility(a) => cmd_visibility(cli, a),
        Command::Coverage(a) => cmd_coverage(cli, a, false),
        Command::Divergence(a) => cmd_coverage(cli, a, true),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Experiment(a) => cmd_experiment(cli, a),
    }
}

// manifest plumbing

fn path_value(p: &Path) -> Value {
    Value::from(p.display().to_string())
}

fn base_flags(cli: &Cli) -> BTreeMap<String, Value> {
    BTreeMap::from([
        ("seed".into(), cli.seed.map(Value::from).unwrap_or(Value::Null)),
        ("threads".into(), cli.threads.map(Value::from).unwrap_or(Value::Null)),
        ("log_level".into(), Value::from(cli.log_level.clone())),
    ])
}

fn load(manifest: &mut RunManifest, flag: &str, path: &Path) -> CliResult<Vec<u8>> {
    let resolved = resolve_input(path);
    let bytes = read_input(&resolved).map_err(data(format!("reading {}", resolved.display())))?;
    manifest.add_input(flag, &resolved, &bytes);
    Ok(bytes)
}

fn load_roas(manifest: &mut RunManifest, path: &Path) -> CliResult<RoaSet> {
    let bytes = load(manifest, "vrps", path)?;
    RoaSet::from_csv(&bytes[..]).map_err(data(format!("parsing {}", path.display())))
}

fn load_rib(manifest: &mut RunManifest, path: &Path, max_malformed: f64) -> CliResult<(RibSnapshot, ParseStats)> {
    let bytes = load(manifest, "rib", path)?;
    let opts = ParseOptions {
        max_malformed_fraction: max_malformed,
    };
    let (snap, stats) =
        RibSnapshot::parse_jsonl(&bytes[..], opts).map_err(data(format!("parsing {}", path.display())))?;
    if stats.malformed > 0 {
        warn!("{}: {} malformed records skipped", path.display(), stats.malformed);
    }
    info!(
        "{}: {} entries from {} vantage points",
        path.display(),
        snap.len(),
        snap.vp_count()
    );
    Ok((snap, stats))
}

fn load_rels(manifest: &mut RunManifest, path: Option<&Path>) -> CliResult<Option<AsRelationships>> {
    let Some(path) = path else { return Ok(None) };
    let bytes = load(manifest, "rels", path)?;
    AsRelationships::parse(&bytes[..])
        .map(Some)
        .map_err(data(format!("parsing {}", path.display())))
}

fn finish(manifest: &mut RunManifest, manifest_file: &Path) -> CliResult<()> {
    manifest
        .finish(manifest_file)
        .map_err(data(format!("writing {}", manifest_file.display())))
}

fn write_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("writing {}: {e}", path.display()))
}

fn csv_io(e: analysis::AnalysisError) -> io::Error {
    io::Error::other(e.to_string())
}

fn rib_flags(flags: &mut BTreeMap<String, Value>, input: &RibInputs) {
    flags.insert("rib".into(), path_value(&input.rib));
    flags.insert("vrps".into(), path_value(&input.vrps));
    flags.insert("max_malformed".into(), Value::from(input.max_malformed));
}

// validate

fn cmd_validate(cli: &Cli, a: &ValidateArgs) -> CliResult<()> {
    let mut flags = base_flags(cli);
    flags.insert("vrps".into(), path_value(&a.vrps));
    flags.insert("rib".into(), a.rib.as_deref().map(path_value).unwrap_or(Value::Null));
    flags.insert("prefix".into(), a.prefix.map(|p| Value::from(p.to_string())).unwrap_or(Value::Null));
    flags.insert("origin".into(), a.origin.map(|o| Value::from(o.0)).unwrap_or(Value::Null));
    flags.insert("max_malformed".into(), Value::from(a.max_malformed));
    flags.insert("out".into(), a.out.as_deref().map(path_value).unwrap_or(Value::Null));
    let mut manifest = RunManifest::new("validate", flags);
    let roas = load_roas(&mut manifest, &a.vrps)?;

    if let (Some(prefix), Some(origin)) = (a.prefix, a.origin) {
        let v = roas.validate_with_witness(origin, &prefix);
        match v.witness {
            Some(w) => println!("{prefix} {origin} {} {w}", v.state),
            None => println!("{prefix} {origin} {}", v.state),
        }
        return Ok(());
    }
    let (Some(rib), Some(out)) = (&a.rib, &a.out) else {
        return Err(CliError::Usage(
            "validate needs either --rib with --out, or --prefix with --origin".into(),
        ));
    };
    let (snap, _) = load_rib(&mut manifest, rib, a.max_malformed)?;
    let mpath = manifest_path_for(out);
    write_text_report(out, &mut manifest, &mpath, |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["collector", "peer_id", "peer_asn", "prefix", "origin", "state", "matched_vrp"])?;
        for e in snap.entries() {
            let v = roas.validate_with_witness(e.origin(), &e.prefix);
            wr.write_record([
                e.vp.collector.clone(),
                e.vp.peer_id.clone(),
                e.vp.peer_asn.0.to_string(),
                e.prefix.to_string(),
                e.origin().0.to_string(),
                v.state.to_string(),
                v.witness.map(|w| w.to_string()).unwrap_or_default(),
            ])?;
        }
        wr.flush()
    })
    .map_err(write_err(out))?;
    finish(&mut manifest, &mpath)
}

// infer

fn parse_vp_selection(spec: &str) -> CliResult<Vec<String>> {
    let path = resolve_input(Path::new(spec));
    let text = if path.is_file() {
        String::from_utf8_lossy(&read_input(&path).map_err(data(format!("reading {}", path.display())))?)
            .into_owned()
    } else {
        spec.to_string()
    };
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split([',', ' ', '\t']))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect())
}

fn select_vps(pipeline: &Pipeline, tokens: &[String]) -> CliResult<Vec<usize>> {
    let vps = pipeline.vantage_points();
    let mut chosen = BTreeSet::new();
    for t in tokens {
        let hits: Vec<usize> = match t.parse::<Asn>() {
            Ok(asn) => (0..vps.len()).filter(|&i| vps[i].peer_asn == asn).collect(),
            Err(_) => (0..vps.len())
                .filter(|&i| format!("{}/{}", vps[i].collector, vps[i].peer_id) == *t)
                .collect(),
        };
        if hits.is_empty() {
            return Err(CliError::Data(format!("vantage point {t:?} not in the RIB")));
        }
        chosen.extend(hits);
    }
    Ok(chosen.into_iter().collect())
}

#[derive(Serialize)]
struct InferReport<'a> {
    threshold: u32,
    customer_scope: CustomerScope,
    vantage_points: Vec<String>,
    entries: usize,
    parse: &'a ParseStats,
    non_enforcing: &'a BTreeSet<Asn>,
    /// Candidate AS -> origins it was marked for.
    candidates: &'a BTreeMap<Asn, BTreeSet<Asn>>,
    enforcing: &'a BTreeSet<Asn>,
}

fn cmd_infer(cli: &Cli, a: &InferArgs) -> CliResult<()> {
    let mut flags = base_flags(cli);
    rib_flags(&mut flags, &a.input);
    flags.insert("rels".into(), a.rels.as_deref().map(path_value).unwrap_or(Value::Null));
    flags.insert("threshold".into(), Value::from(a.threshold));
    flags.insert("vps".into(), a.vps.clone().map(Value::from).unwrap_or(Value::Null));
    flags.insert("customer_scope".into(), Value::from(format!("{:?}", a.customer_scope).to_lowercase()));
    flags.insert("out".into(), path_value(&a.out));
    let mut manifest = RunManifest::new("infer", flags);
    let (snap, stats) = load_rib(&mut manifest, &a.input.rib, a.input.max_malformed)?;
    let roas = load_roas(&mut manifest, &a.input.vrps)?;
    let rels = load_rels(&mut manifest, a.rels.as_deref())?;
    let scope: CustomerScope = a.customer_scope.into();
    let pipeline = Pipeline::new(&snap, &roas, rels.as_ref(), scope);
    let subset = match &a.vps {
        Some(spec) => {
            let tokens = parse_vp_selection(spec)?;
            Some(select_vps(&pipeline, &tokens)?)
        }
        None => None,
    };
    let result = pipeline
        .run(subset.as_deref(), a.threshold)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let vps = pipeline.vantage_points();
    let used: Vec<String> = match &subset {
        Some(s) => s.iter().map(|&i| vps[i].to_string()).collect(),
        None => vps.iter().map(|v| v.to_string()).collect(),
    };
    let report = InferReport {
        threshold: result.threshold,
        customer_scope: scope,
        vantage_points: used,
        entries: snap.len(),
        parse: &stats,
        non_enforcing: &result.non_enforcing,
        candidates: &result.candidates,
        enforcing: &result.enforcing,
    };
    let mpath = manifest_path_for(&a.out);
    write_json_report(&a.out, &mut manifest, &mpath, &report).map_err(write_err(&a.out))?;
    finish(&mut manifest, &mpath)
}

// vantage point analyses

fn cmd_sample(cli: &Cli, a: &SampleArgs) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(0);
    let mut flags = base_flags(cli);
    rib_flags(&mut flags, &a.input);
    flags.insert("rels".into(), a.rels.as_deref().map(path_value).unwrap_or(Value::Null));
    flags.insert("n".into(), Value::from(a.n));
    flags.insert("k".into(), Value::from(a.k));
    flags.insert("threshold".into(), Value::from(a.threshold));
    flags.insert("customer_scope".into(), Value::from(format!("{:?}", a.customer_scope).to_lowercase()));
    flags.insert("out".into(), path_value(&a.out));
    let mut manifest = RunManifest::new("sample", flags);
    manifest.add_seed("sample", seed);
    let (snap, _) = load_rib(&mut manifest, &a.input.rib, a.input.max_malformed)?;
    let roas = load_roas(&mut manifest, &a.input.vrps)?;
    let rels = load_rels(&mut manifest, a.rels.as_deref())?;
    let cfg = SampleConfig {
        sample_size: a.n,
        samples: a.k,
        seed,
        threshold: a.threshold,
        scope: a.customer_scope.into(),
    };
    let report = analysis::sample_vps(&snap, &roas, rels.as_ref(), cfg).map_err(data("sampling"))?;
    info!(
        "{} of {} samples have false positives",
        report.rows.iter().filter(|r| r.false_positives > 0).count(),
        report.rows.len()
    );
    let mpath = manifest_path_for(&a.out);
    write_text_report(&a.out, &mut manifest, &mpath, |w| report.write_csv(w).map_err(csv_io))
        .map_err(write_err(&a.out))?;
    finish(&mut manifest, &mpath)
}

fn cmd_visibility(cli: &Cli, a: &VisibilityArgs) -> CliResult<()> {
    let mut flags = base_flags(cli);
    rib_flags(&mut flags, &a.input);
    flags.insert("out".into(), path_value(&a.out));
    flags.insert(
        "completeness_out".into(),
        a.completeness_out.as_deref().map(path_value).unwrap_or(Value::Null),
    );
    let mut manifest = RunManifest::new("visibility", flags);
    let (snap, _) = load_rib(&mut manifest, &a.input.rib, a.input.max_malformed)?;
    let roas = load_roas(&mut manifest, &a.input.vrps)?;
    let report = analysis::prefix_visibility(&snap, &roas);
    let mpath = manifest_path_for(&a.out);
    write_text_report(&a.out, &mut manifest, &mpath, |w| report.write_csv(w).map_err(csv_io))
        .map_err(write_err(&a.out))?;
    if let Some(c) = &a.completeness_out {
        write_text_report(c, &mut manifest, &mpath, |w| {
            report.write_completeness_csv(w).map_err(csv_io)
        })
        .map_err(write_err(c))?;
    }
    finish(&mut manifest, &mpath)
}

fn cmd_coverage(cli: &Cli, a: &PathArgs, divergence_only: bool) -> CliResult<()> {
    let name = if divergence_only { "divergence" } else { "coverage" };
    let mut flags = base_flags(cli);
    rib_flags(&mut flags, &a.input);
    flags.insert("raw_paths".into(), Value::from(a.raw_paths));
    flags.insert("out".into(), path_value(&a.out));
    let mut manifest = RunManifest::new(name, flags);
    let (snap, _) = load_rib(&mut manifest, &a.input.rib, a.input.max_malformed)?;
    let roas = load_roas(&mut manifest, &a.input.vrps)?;
    let report = analysis::coverage(&snap, &roas, a.raw_paths);
    info!("{} covered invalid routes", report.pair_count());
    let mpath = manifest_path_for(&a.out);
    write_text_report(&a.out, &mut manifest, &mpath, |w| {
        if divergence_only {
            report.write_divergence_csv(w).map_err(csv_io)
        } else {
            report.write_coverage_csv(w).map_err(csv_io)
        }
    })
    .map_err(write_err(&a.out))?;
    finish(&mut manifest, &mpath)
}

// simulation

/// A catalog name, or else a scenario file; the file's digest goes into
/// the manifest.
fn load_scenario(manifest: &mut RunManifest, spec: &str) -> CliResult<Scenario> {
    let path = resolve_input(Path::new(spec));
    if path.is_file() {
        let bytes = load(manifest, "scenario", &path)?;
        return Scenario::from_json(&String::from_utf8_lossy(&bytes)).map_err(data(format!("scenario {spec}")));
    }
    match spec.parse::<ScenarioKind>() {
        Ok(kind) => Ok(plant_scenario(kind)),
        Err(e) => Err(CliError::Data(format!("{e} (and no such file)"))),
    }
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<()> {
    let mut flags = base_flags(cli);
    flags.insert("scenario".into(), Value::from(a.scenario.clone()));
    flags.insert("out_snapshots".into(), path_value(&a.out_snapshots));
    let mut manifest = RunManifest::new("simulate", flags);
    let mut scenario = load_scenario(&mut manifest, &a.scenario)?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    manifest.add_seed("delays", scenario.seed);
    let timeline = scenario.timeline().map_err(data("simulation"))?;

    let dir = &a.out_snapshots;
    fs::create_dir_all(dir).map_err(write_err(dir))?;
    let mpath = dir.join("manifest.json");
    for (seq, point) in timeline.points.iter().enumerate() {
        let path = dir.join(format!("snapshot-{seq:04}-t{}.jsonl", point.time));
        write_text_report(&path, &mut manifest, &mpath, |w| point.snapshot.write_jsonl(w))
            .map_err(write_err(&path))?;
    }
    // the ROAs published by the end of the run
    let mut roas = scenario.initial_roa_set();
    for e in scenario.events.iter().filter(|e| e.time <= scenario.horizon) {
        if let EventKind::RoaUpdate { add, remove } = &e.kind {
            roas = roas.apply_delta(add, remove);
        }
    }
    let vrp_path = dir.join("vrps.csv");
    write_text_report(&vrp_path, &mut manifest, &mpath, |w| w.write_all(roas.to_csv().as_bytes()))
        .map_err(write_err(&vrp_path))?;
    let truth_path = dir.join("ground_truth.json");
    let truth = scenario.ground_truth.clone().unwrap_or_else(|| scenario.planted());
    write_json_report(&truth_path, &mut manifest, &mpath, &truth).map_err(write_err(&truth_path))?;
    info!("{} snapshots written to {}", timeline.points.len(), dir.display());
    finish(&mut manifest, &mpath)
}

// controlled experiments

#[derive(Serialize)]
struct GroundTruthCheck {
    /// Definite filter_invalid / prefer_valid verdicts not planted.
    false_positives: BTreeSet<Asn>,
    /// Planted policies with no matching verdict (not necessarily
    /// observable with this plan's vantage points).
    not_identified: BTreeSet<Asn>,
}

fn check_truth(inference: &PolicyInference, truth: &GroundTruth) -> GroundTruthCheck {
    let mut fp = BTreeSet::new();
    let mut missed = BTreeSet::new();
    for (verdict, planted) in [
        (Verdict::FilterInvalid, &truth.filter_invalid),
        (Verdict::PreferValid, &truth.prefer_valid),
    ] {
        let found = inference.with_verdict(verdict);
        fp.extend(found.difference(planted).copied());
        missed.extend(planted.difference(&found).copied());
    }
    GroundTruthCheck {
        false_positives: fp,
        not_identified: missed,
    }
}

#[derive(Serialize)]
struct ExperimentReport<'a> {
    scenario: Option<String>,
    driver: &'static str,
    variant: &'static str,
    plan: &'a ExperimentPlan,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<&'a ExperimentOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prefer_valid: Option<&'a crate::experiment::PreferValidOutcome>,
    inference: &'a PolicyInference,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_truth: Option<GroundTruth>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_truth_check: Option<GroundTruthCheck>,
}

fn recorded_snapshots(manifest: &mut RunManifest, paths: &[PathBuf]) -> CliResult<Vec<RibSnapshot>> {
    let mut files = Vec::new();
    for p in paths {
        let p = resolve_input(p);
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(&p)
                .map_err(data(format!("reading {}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    let name = f.file_name().unwrap_or_default().to_string_lossy();
                    name.ends_with(".jsonl") || name.ends_with(".jsonl.gz")
                })
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p);
        }
    }
    let mut out = Vec::new();
    for (i, f) in files.iter().enumerate() {
        let bytes = load(manifest, &format!("recorded[{i}]"), f)?;
        let (snap, _) = RibSnapshot::parse_jsonl(&bytes[..], ParseOptions::default())
            .map_err(data(format!("parsing {}", f.display())))?;
        out.push(snap);
    }
    Ok(out)
}

fn cmd_experiment(cli: &Cli, a: &ExperimentArgs) -> CliResult<()> {
    let variant_name = match a.variant {
        VariantArg::Base => "base",
        VariantArg::WithdrawReannounce => "withdraw-reannounce",
        VariantArg::PreferValid => "prefer-valid",
    };
    let driver_name = match a.driver {
        DriverArg::Sim => "sim",
        DriverArg::Recorded => "recorded",
    };
    let mut flags = base_flags(cli);
    flags.insert("plan".into(), a.plan.as_deref().map(path_value).unwrap_or(Value::Null));
    flags.insert("driver".into(), Value::from(driver_name));
    flags.insert("scenario".into(), a.scenario.clone().map(Value::from).unwrap_or(Value::Null));
    flags.insert("recorded".into(), Value::from(a.recorded.iter().map(|p| path_value(p)).collect::<Vec<_>>()));
    flags.insert("variant".into(), Value::from(variant_name));
    flags.insert("rounds".into(), a.rounds.map(Value::from).unwrap_or(Value::Null));
    flags.insert("out".into(), path_value(&a.out));
    let mut manifest = RunManifest::new("experiment", flags);

    let mut scenario = match &a.scenario {
        Some(s) => Some(load_scenario(&mut manifest, s)?),
        None => None,
    };
    if let (Some(s), Some(seed)) = (scenario.as_mut(), cli.seed) {
        s.seed = seed;
    }
    if let Some(s) = &scenario {
        manifest.add_seed("delays", s.seed);
        if !s.events.is_empty() {
            info!("scenario events are not replayed; the plan drives the announcements");
        }
    }
    let mut plan = match (&a.plan, &scenario) {
        (Some(p), _) => {
            let bytes = load(&mut manifest, "plan", p)?;
            ExperimentPlan::from_json(&String::from_utf8_lossy(&bytes)).map_err(data(format!("plan {}", p.display())))?
        }
        (None, Some(s)) => s
            .plan
            .clone()
            .ok_or_else(|| CliError::Data(format!("scenario {} has no plan; pass --plan", s.name)))?,
        (None, None) => return Err(CliError::Usage("experiment needs --plan or --scenario".into())),
    };
    if let Some(r) = a.rounds {
        plan.rounds = r;
    }

    let mut driver: Box<dyn Driver> = match a.driver {
        DriverArg::Sim => {
            let s = scenario
                .as_ref()
                .ok_or_else(|| CliError::Usage("--driver sim needs --scenario".into()))?;
            let topo = s.topology().map_err(data("topology"))?;
            // a scenario's own ROAs for the experiment prefixes belong to its
            // event replay; the plan sets those itself
            let base: RoaSet = s.initial_roas.iter().filter(|v| !plan.controls(v)).copied().collect();
            Box::new(SimDriver::new(topo, base))
        }
        DriverArg::Recorded => {
            if a.recorded.is_empty() {
                return Err(CliError::Usage("--driver recorded needs --recorded <files>".into()));
            }
            Box::new(RecordedDriver::new(recorded_snapshots(&mut manifest, &a.recorded)?))
        }
    };

    let (outcome, pv, inference) = match a.variant {
        VariantArg::PreferValid => {
            let out = run_prefer_valid_experiment(driver.as_mut(), &plan).map_err(data("experiment"))?;
            let inf = out.inference.clone();
            (None, Some(out), inf)
        }
        VariantArg::Base | VariantArg::WithdrawReannounce => {
            let variant = match a.variant {
                VariantArg::Base => Variant::Base,
                _ => Variant::WithdrawReannounce,
            };
            let out = run_filter_experiment(driver.as_mut(), &plan, variant).map_err(data("experiment"))?;
            let inf = crate::experiment::infer_filtering(&out.observations);
            (Some(out), None, inf)
        }
    };
    let truth = scenario.as_ref().and_then(|s| s.ground_truth.clone());
    let report = ExperimentReport {
        scenario: scenario.as_ref().map(|s| s.name.clone()),
        driver: driver_name,
        variant: variant_name,
        plan: &plan,
        outcome: outcome.as_ref(),
        prefer_valid: pv.as_ref(),
        inference: &inference,
        ground_truth_check: truth.as_ref().map(|t| check_truth(&inference, t)),
        ground_truth: truth,
    };
    for v in &inference.verdicts {
        if v.verdict != Verdict::NoRovObserved {
            info!("{}: {:?}", v.asn, v.verdict);
        }
    }
    let mpath = manifest_path_for(&a.out);
    write_json_report(&a.out, &mut manifest, &mpath, &report).map_err(write_err(&a.out))?;
    finish(&mut manifest, &mpath)
}
