//! How much the passive inference depends on which vantage points and
//! prefixes happen to be visible, and how often invalid routes look like
//! traffic engineering rather than filtering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::asn::Asn;
use crate::inference::{CustomerScope, InferenceError, InferenceResult, Pipeline, DEFAULT_THRESHOLD};
use crate::prefix::IpPrefix;
use crate::relationships::AsRelationships;
use crate::rib::{AsPath, RibSnapshot, VantagePoint};
use crate::rpki::{RoaSet, ValidationState};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("sample size {sample_size} exceeds the {available} available vantage points")]
    SampleTooLarge { sample_size: usize, available: usize },
    #[error("sample size must be positive")]
    EmptySample,
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("writing report: {0}")]
    Csv(#[from] csv::Error),
}

// ---------------------------------------------------------------------------
// Vantage point sampling

#[derive(Clone, Copy, Debug)]
pub struct SampleConfig {
    pub sample_size: usize,
    pub samples: usize,
    pub seed: u64,
    pub threshold: u32,
    pub scope: CustomerScope,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            sample_size: 44,
            samples: 5000,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            scope: CustomerScope::Direct,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleRow {
    pub sample: usize,
    /// Truncated SHA-256 over the sampled vantage point identifiers.
    pub vp_digest: String,
    pub non_enforcing: usize,
    pub candidates: usize,
    pub enforcing: usize,
    /// Enforcing in the sample but non-enforcing on the full snapshot.
    pub false_positives: usize,
    pub false_positive_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleReport {
    pub seed: u64,
    pub sample_size: usize,
    pub threshold: u32,
    pub full: InferenceResult,
    pub rows: Vec<SampleRow>,
}

impl SampleReport {
    /// Fraction of samples whose false-positive ratio is at least `ratio`.
    pub fn fraction_with_ratio_at_least(&self, ratio: f64) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let n = self
            .rows
            .iter()
            .filter(|r| r.enforcing > 0 && r.false_positive_ratio >= ratio)
            .count();
        n as f64 / self.rows.len() as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), AnalysisError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "sample",
            "seed",
            "sample_size",
            "vp_digest",
            "non_enforcing",
            "candidates",
            "enforcing",
            "false_positives",
            "false_positive_ratio",
        ])?;
        for r in &self.rows {
            wr.write_record([
                r.sample.to_string(),
                self.seed.to_string(),
                self.sample_size.to_string(),
                r.vp_digest.clone(),
                r.non_enforcing.to_string(),
                r.candidates.to_string(),
                r.enforcing.to_string(),
                r.false_positives.to_string(),
                format!("{:.6}", r.false_positive_ratio),
            ])?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Per-sample PRNG: the stream index keeps samples independent of each
/// other and of the thread that computes them.
fn sample_rng(seed: u64, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    rng
}

fn vp_digest(vps: &[&VantagePoint]) -> String {
    let mut h = Sha256::new();
    for vp in vps {
        h.update(format!("{}\t{}\t{}\n", vp.collector, vp.peer_id, vp.peer_asn.0));
    }
    hex::encode(&h.finalize()[..8])
}

/// Runs the passive inference on `samples` random subsets of
/// `sample_size` vantage points (without replacement within a sample) and
/// counts ASes classified enforcing in the subset but non-enforcing on the
/// whole snapshot.
pub fn sample_vps(
    snapshot: &RibSnapshot,
    roas: &RoaSet,
    rels: Option<&AsRelationships>,
    cfg: SampleConfig,
) -> Result<SampleReport, AnalysisError> {
    let pipeline = Pipeline::new(snapshot, roas, rels, cfg.scope);
    let n = pipeline.vp_count();
    if cfg.sample_size == 0 {
        return Err(AnalysisError::EmptySample);
    }
    if cfg.sample_size > n {
        return Err(AnalysisError::SampleTooLarge {
            sample_size: cfg.sample_size,
            available: n,
        });
    }
    let full = pipeline.run(None, cfg.threshold)?;
    let rows = (0..cfg.samples)
        .into_par_iter()
        .map(|i| -> Result<SampleRow, AnalysisError> {
            let mut rng = sample_rng(cfg.seed, i);
            let mut picked = rand::seq::index::sample(&mut rng, n, cfg.sample_size).into_vec();
            picked.sort_unstable();
            let r = pipeline.run(Some(&picked), cfg.threshold)?;
            let fp = r.enforcing.intersection(&full.non_enforcing).count();
            let vps: Vec<&VantagePoint> = picked.iter().map(|&j| pipeline.vantage_points()[j]).collect();
            Ok(SampleRow {
                sample: i,
                vp_digest: vp_digest(&vps),
                non_enforcing: r.non_enforcing.len(),
                candidates: r.candidates.len(),
                enforcing: r.enforcing.len(),
                false_positives: fp,
                false_positive_ratio: if r.enforcing.is_empty() {
                    0.0
                } else {
                    fp as f64 / r.enforcing.len() as f64
                },
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampleReport {
        seed: cfg.seed,
        sample_size: cfg.sample_size,
        threshold: cfg.threshold,
        full,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Prefix visibility

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VpVisibility {
    pub vp: VantagePoint,
    pub prefixes: usize,
    pub origins: usize,
    pub invalid_prefixes: usize,
    pub invalid_origins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OriginCompleteness {
    pub vp: VantagePoint,
    pub origin: Asn,
    pub prefixes_at_vp: usize,
    pub prefixes_global: usize,
    /// `prefixes_at_vp / prefixes_global`, in `[0, 1]`.
    pub completeness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VisibilityReport {
    pub per_vp: Vec<VpVisibility>,
    pub completeness: Vec<OriginCompleteness>,
}

impl VisibilityReport {
    /// Fraction of vantage points that see invalid routes from fewer than
    /// `needed` distinct origins.
    pub fn fraction_below_invalid_origins(&self, needed: usize) -> f64 {
        if self.per_vp.is_empty() {
            return 0.0;
        }
        let n = self.per_vp.iter().filter(|v| v.invalid_origins < needed).count();
        n as f64 / self.per_vp.len() as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), AnalysisError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "collector",
            "peer_id",
            "peer_asn",
            "prefixes",
            "origins",
            "invalid_prefixes",
            "invalid_origins",
        ])?;
        for v in &self.per_vp {
            wr.write_record([
                v.vp.collector.clone(),
                v.vp.peer_id.clone(),
                v.vp.peer_asn.0.to_string(),
                v.prefixes.to_string(),
                v.origins.to_string(),
                v.invalid_prefixes.to_string(),
                v.invalid_origins.to_string(),
            ])?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_completeness_csv<W: Write>(&self, w: W) -> Result<(), AnalysisError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "collector",
            "peer_id",
            "peer_asn",
            "origin",
            "prefixes_at_vp",
            "prefixes_global",
            "completeness",
        ])?;
        for c in &self.completeness {
            wr.write_record([
                c.vp.collector.clone(),
                c.vp.peer_id.clone(),
                c.vp.peer_asn.0.to_string(),
                c.origin.0.to_string(),
                c.prefixes_at_vp.to_string(),
                c.prefixes_global.to_string(),
                format!("{:.6}", c.completeness),
            ])?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn prefix_visibility(snapshot: &RibSnapshot, roas: &RoaSet) -> VisibilityReport {
    let mut global: BTreeMap<Asn, BTreeSet<IpPrefix>> = BTreeMap::new();
    for e in snapshot.entries() {
        global.entry(e.origin()).or_default().insert(e.prefix);
    }
    let mut per_vp = Vec::new();
    let mut completeness = Vec::new();
    for vp in snapshot.vantage_points() {
        let mut by_origin: BTreeMap<Asn, BTreeSet<IpPrefix>> = BTreeMap::new();
        let mut invalid_prefixes = BTreeSet::new();
        let mut invalid_origins = BTreeSet::new();
        for e in snapshot.for_vp(vp) {
            by_origin.entry(e.origin()).or_default().insert(e.prefix);
            if roas.validate(e.origin(), &e.prefix).is_invalid() {
                invalid_prefixes.insert(e.prefix);
                invalid_origins.insert(e.origin());
            }
        }
        per_vp.push(VpVisibility {
            vp: vp.clone(),
            prefixes: by_origin.values().map(BTreeSet::len).sum(),
            origins: by_origin.len(),
            invalid_prefixes: invalid_prefixes.len(),
            invalid_origins: invalid_origins.len(),
        });
        for (origin, prefixes) in by_origin {
            let g = global[&origin].len();
            completeness.push(OriginCompleteness {
                vp: vp.clone(),
                origin,
                prefixes_at_vp: prefixes.len(),
                prefixes_global: g,
                completeness: prefixes.len() as f64 / g as f64,
            });
        }
    }
    VisibilityReport {
        per_vp,
        completeness,
    }
}

// ---------------------------------------------------------------------------
// Coverage and divergence

/// Where two routes from the same origin part ways, counted in AS hops
/// from the origin (the origin's neighbor is hop 1).
#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceBucket {
    SamePath,
    Hop(usize),
}

impl fmt::Display for DivergenceBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceBucket::SamePath => f.write_str("same_path"),
            DivergenceBucket::Hop(k) => write!(f, "{k}"),
        }
    }
}

/// Compares two paths aligned at the origin end. A shorter path that
/// agrees on the whole shared segment diverges at the first hop it lacks.
/// Different origins give `Hop(0)`.
pub fn divergence_hop(a: &AsPath, b: &AsPath) -> DivergenceBucket {
    let x: Vec<Asn> = a.asns().iter().rev().copied().collect();
    let y: Vec<Asn> = b.asns().iter().rev().copied().collect();
    if x == y {
        return DivergenceBucket::SamePath;
    }
    let k = x
        .iter()
        .zip(&y)
        .position(|(p, q)| p != q)
        .unwrap_or_else(|| x.len().min(y.len()));
    DivergenceBucket::Hop(k)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveragePair {
    pub vp: VantagePoint,
    pub origin: Asn,
    pub invalid_prefix: IpPrefix,
    pub covering_prefix: IpPrefix,
    pub bucket: DivergenceBucket,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VpCoverage {
    pub vp: VantagePoint,
    pub invalid_prefixes: usize,
    pub covered: usize,
    /// `None` when the vantage point has no invalid routes.
    pub covered_fraction: Option<f64>,
    pub histogram: BTreeMap<DivergenceBucket, u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub per_vp: Vec<VpCoverage>,
    pub pairs: Vec<CoveragePair>,
    pub histogram: BTreeMap<DivergenceBucket, u64>,
}

impl CoverageReport {
    pub fn pair_count(&self) -> u64 {
        self.pairs.len() as u64
    }

    pub fn write_coverage_csv<W: Write>(&self, w: W) -> Result<(), AnalysisError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "collector",
            "peer_id",
            "peer_asn",
            "invalid_prefixes",
            "covered",
            "covered_fraction",
        ])?;
        for v in &self.per_vp {
            wr.write_record([
                v.vp.collector.clone(),
                v.vp.peer_id.clone(),
                v.vp.peer_asn.0.to_string(),
                v.invalid_prefixes.to_string(),
                v.covered.to_string(),
                v.covered_fraction.map(|f| format!("{f:.6}")).unwrap_or_default(),
            ])?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Long format: one row per (vantage point, bucket), then `*` rows with
    /// the totals over all vantage points.
    pub fn write_divergence_csv<W: Write>(&self, w: W) -> Result<(), AnalysisError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["collector", "peer_id", "peer_asn", "invalid_prefixes", "bucket", "pairs"])?;
        for v in &self.per_vp {
            for (b, n) in &v.histogram {
                wr.write_record([
                    v.vp.collector.clone(),
                    v.vp.peer_id.clone(),
                    v.vp.peer_asn.0.to_string(),
                    v.invalid_prefixes.to_string(),
                    b.to_string(),
                    n.to_string(),
                ])?;
            }
        }
        for (b, n) in &self.histogram {
            wr.write_record(["*", "*", "*", "*", &b.to_string(), &n.to_string()])?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Coverage of invalid prefixes by strictly less specific non-invalid
/// prefixes from the same origin at the same vantage point, plus where each
/// (invalid, covering) route pair diverges. Paths are prepend-compressed
/// unless `raw_paths` is set.
pub fn coverage(snapshot: &RibSnapshot, roas: &RoaSet, raw_paths: bool) -> CoverageReport {
    let per: Vec<(VpCoverage, Vec<CoveragePair>)> = snapshot
        .vantage_points()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|vp| vp_coverage(snapshot, roas, vp, raw_paths))
        .collect();
    let mut histogram = BTreeMap::new();
    let mut per_vp = Vec::new();
    let mut pairs = Vec::new();
    for (v, p) in per {
        for (b, n) in &v.histogram {
            *histogram.entry(*b).or_insert(0) += n;
        }
        per_vp.push(v);
        pairs.extend(p);
    }
    CoverageReport {
        per_vp,
        pairs,
        histogram,
    }
}

/// The divergence histogram alone.
pub fn divergence(
    snapshot: &RibSnapshot,
    roas: &RoaSet,
    raw_paths: bool,
) -> BTreeMap<DivergenceBucket, u64> {
    coverage(snapshot, roas, raw_paths).histogram
}

fn vp_coverage(
    snapshot: &RibSnapshot,
    roas: &RoaSet,
    vp: &VantagePoint,
    raw_paths: bool,
) -> (VpCoverage, Vec<CoveragePair>) {
    let mut invalid = Vec::new();
    let mut non_invalid = Vec::new();
    for e in snapshot.for_vp(vp) {
        match roas.validate(e.origin(), &e.prefix) {
            ValidationState::Invalid => invalid.push(e),
            _ => non_invalid.push(e),
        }
    }
    let path = |p: &AsPath| if raw_paths { p.clone() } else { p.compressed() };
    let mut covered = 0;
    let mut pairs = Vec::new();
    let mut histogram = BTreeMap::new();
    for bad in &invalid {
        let mut any = false;
        for ok in &non_invalid {
            if ok.origin() == bad.origin()
                && ok.prefix.len() < bad.prefix.len()
                && ok.prefix.contains(&bad.prefix)
            {
                any = true;
                let bucket = divergence_hop(&path(&bad.path), &path(&ok.path));
                *histogram.entry(bucket).or_insert(0) += 1;
                pairs.push(CoveragePair {
                    vp: vp.clone(),
                    origin: bad.origin(),
                    invalid_prefix: bad.prefix,
                    covering_prefix: ok.prefix,
                    bucket,
                });
            }
        }
        if any {
            covered += 1;
        }
    }
    let cov = VpCoverage {
        vp: vp.clone(),
        invalid_prefixes: invalid.len(),
        covered,
        covered_fraction: (!invalid.is_empty()).then(|| covered as f64 / invalid.len() as f64),
        histogram,
    };
    (cov, pairs)
}
