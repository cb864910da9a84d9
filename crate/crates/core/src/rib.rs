//! Vantage-point RIB snapshots.
//!
//! The ingestion format is one JSON object per line:
//!
//! ```text
//! {"collector": "rrc00", "peer_asn": 64510, "peer_id": "192.0.2.1",
//!  "prefix": "10.0.0.0/16", "path": [64498, 64497, 64496], "ts": 1477411200}
//! ```
//!
//! `path` starts at the vantage point's neighbor and ends at the origin. An
//! element that is itself an array is an AS-set; such records are skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asn::Asn;
use crate::prefix::IpPrefix;

#[derive(Debug, Error)]
pub enum RibError {
    #[error("reading RIB input: {0}")]
    Io(#[from] std::io::Error),
    #[error(
        "{malformed} of {records} RIB records malformed (limit {limit:.1}%); first errors: {samples:?}"
    )]
    TooManyMalformed {
        malformed: u64,
        records: u64,
        limit: f64,
        samples: Vec<String>,
    },
    #[error("AS path must not be empty")]
    EmptyPath,
}

/// One BGP session feeding a route collector.
#[derive(Clone, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct VantagePoint {
    pub collector: String,
    pub peer_asn: Asn,
    pub peer_id: String,
}

impl VantagePoint {
    pub fn new(collector: impl Into<String>, peer_asn: Asn, peer_id: impl Into<String>) -> Self {
        VantagePoint {
            collector: collector.into(),
            peer_asn,
            peer_id: peer_id.into(),
        }
    }
}

impl fmt::Display for VantagePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}({})", self.collector, self.peer_id, self.peer_asn)
    }
}

/// An AS path, neighbor of the vantage point first and origin last.
#[derive(Clone, Debug, Eq, Hash, Ord, PartialEq, PartialOrd)]
pub struct AsPath {
    asns: Vec<Asn>,
    prepend_compressed: bool,
}

impl AsPath {
    pub fn new(asns: Vec<Asn>) -> Result<Self, RibError> {
        if asns.is_empty() {
            return Err(RibError::EmptyPath);
        }
        let prepend_compressed = asns.windows(2).all(|w| w[0] != w[1]);
        Ok(AsPath {
            asns,
            prepend_compressed,
        })
    }

    pub fn from_u32s(v: &[u32]) -> Result<Self, RibError> {
        Self::new(v.iter().map(|&a| Asn(a)).collect())
    }

    pub fn asns(&self) -> &[Asn] {
        &self.asns
    }

    /// True when no AS appears twice in a row.
    pub fn is_prepend_compressed(&self) -> bool {
        self.prepend_compressed
    }

    pub fn origin(&self) -> Asn {
        *self.asns.last().expect("non-empty path")
    }

    pub fn neighbor(&self) -> Asn {
        self.asns[0]
    }

    /// Never zero: [`AsPath::new`] rejects empty paths.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.asns.len()
    }

    pub fn contains(&self, asn: Asn) -> bool {
        self.asns.contains(&asn)
    }

    pub fn as_set(&self) -> BTreeSet<Asn> {
        self.asns.iter().copied().collect()
    }

    pub fn compressed(&self) -> AsPath {
        compress_prepending(self)
    }
}

impl fmt::Display for AsPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in &self.asns {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{}", a.0)?;
            first = false;
        }
        Ok(())
    }
}

impl Serialize for AsPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.asns.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AsPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<Asn>::deserialize(d)?;
        AsPath::new(v).map_err(serde::de::Error::custom)
    }
}

/// Collapses runs of the same AS (prepending). Idempotent.
pub fn compress_prepending(path: &AsPath) -> AsPath {
    if path.prepend_compressed {
        return path.clone();
    }
    let mut asns = path.asns.clone();
    asns.dedup();
    AsPath {
        asns,
        prepend_compressed: true,
    }
}

/// A route as exported by one vantage point.
#[derive(Clone, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub struct RibEntry {
    pub vp: VantagePoint,
    pub prefix: IpPrefix,
    pub path: AsPath,
    pub timestamp: u64,
}

impl RibEntry {
    pub fn origin(&self) -> Asn {
        self.path.origin()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParseOptions {
    /// Fraction of malformed records above which parsing fails.
    pub max_malformed_fraction: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_malformed_fraction: 0.10,
        }
    }
}

/// Loss accounting for one parse: `records == loaded + skipped() + malformed`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParseStats {
    pub records: u64,
    pub loaded: u64,
    pub as_set_skipped: u64,
    pub duplicates: u64,
    pub malformed: u64,
    /// The first few malformed-record diagnostics.
    pub errors: Vec<String>,
}

impl ParseStats {
    pub fn skipped(&self) -> u64 {
        self.as_set_skipped + self.duplicates
    }
}

const MAX_ERROR_SAMPLES: usize = 10;

#[derive(Deserialize)]
#[serde(untagged)]
enum PathElem {
    Asn(u32),
    // contents are irrelevant; the entry is skipped
    Set(#[allow(dead_code)] Vec<u32>),
}

#[derive(Deserialize)]
struct RawRecord {
    collector: String,
    peer_asn: u32,
    peer_id: String,
    prefix: String,
    path: Vec<PathElem>,
    ts: u64,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    collector: &'a str,
    peer_asn: u32,
    peer_id: &'a str,
    prefix: String,
    path: Vec<u32>,
    ts: u64,
}

/// A set of RIB entries, at most one per (vantage point, prefix), with
/// lookup indexes.
#[derive(Clone, Debug, Default)]
pub struct RibSnapshot {
    entries: Vec<RibEntry>,
    by_vp: BTreeMap<VantagePoint, Vec<usize>>,
    by_vp_origin: BTreeMap<(VantagePoint, Asn), Vec<usize>>,
    by_prefix: BTreeMap<IpPrefix, Vec<usize>>,
}

impl PartialEq for RibSnapshot {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl RibSnapshot {
    /// Builds a snapshot, keeping the newest entry per (vantage point,
    /// prefix). Returns the snapshot and the number of dropped duplicates.
    ///
    /// Equal timestamps resolve to the lexicographically smallest path so
    /// the result does not depend on input order.
    pub fn from_entries(entries: impl IntoIterator<Item = RibEntry>) -> (Self, u64) {
        let mut latest: BTreeMap<(VantagePoint, IpPrefix), RibEntry> = BTreeMap::new();
        let mut duplicates = 0;
        for e in entries {
            let key = (e.vp.clone(), e.prefix);
            match latest.get_mut(&key) {
                None => {
                    latest.insert(key, e);
                }
                Some(cur) => {
                    duplicates += 1;
                    let newer = e.timestamp > cur.timestamp
                        || (e.timestamp == cur.timestamp && e.path < cur.path);
                    if newer {
                        *cur = e;
                    }
                }
            }
        }
        let mut snap = RibSnapshot {
            entries: latest.into_values().collect(),
            ..Default::default()
        };
        snap.build_indexes();
        (snap, duplicates)
    }

    fn build_indexes(&mut self) {
        for (i, e) in self.entries.iter().enumerate() {
            self.by_vp.entry(e.vp.clone()).or_default().push(i);
            self.by_vp_origin
                .entry((e.vp.clone(), e.origin()))
                .or_default()
                .push(i);
            self.by_prefix.entry(e.prefix).or_default().push(i);
        }
    }

    pub fn entries(&self) -> &[RibEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Vantage points in sorted order.
    pub fn vantage_points(&self) -> impl Iterator<Item = &VantagePoint> {
        self.by_vp.keys()
    }

    pub fn vp_count(&self) -> usize {
        self.by_vp.len()
    }

    pub fn for_vp<'a>(&'a self, vp: &VantagePoint) -> impl Iterator<Item = &'a RibEntry> + 'a {
        self.by_vp
            .get(vp)
            .into_iter()
            .flatten()
            .map(move |&i| &self.entries[i])
    }

    /// Entry indexes per vantage point.
    pub fn vp_groups(&self) -> impl Iterator<Item = (&VantagePoint, &[usize])> {
        self.by_vp.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn for_vp_origin<'a>(
        &'a self,
        vp: &VantagePoint,
        origin: Asn,
    ) -> impl Iterator<Item = &'a RibEntry> + 'a {
        self.by_vp_origin
            .get(&(vp.clone(), origin))
            .into_iter()
            .flatten()
            .map(move |&i| &self.entries[i])
    }

    pub fn for_prefix<'a>(&'a self, prefix: &IpPrefix) -> impl Iterator<Item = &'a RibEntry> + 'a {
        self.by_prefix
            .get(prefix)
            .into_iter()
            .flatten()
            .map(move |&i| &self.entries[i])
    }

    /// The entry a vantage point has for `prefix`, if any.
    pub fn route(&self, vp: &VantagePoint, prefix: &IpPrefix) -> Option<&RibEntry> {
        self.for_vp(vp).find(|e| e.prefix == *prefix)
    }

    /// The first vantage point whose peer AS is `asn`.
    pub fn vp_by_asn(&self, asn: Asn) -> Option<&VantagePoint> {
        self.by_vp.keys().find(|vp| vp.peer_asn == asn)
    }

    /// A snapshot holding only the given vantage points.
    pub fn restrict(&self, vps: &BTreeSet<VantagePoint>) -> RibSnapshot {
        let (snap, _) = RibSnapshot::from_entries(
            self.entries
                .iter()
                .filter(|e| vps.contains(&e.vp))
                .cloned(),
        );
        snap
    }

    /// Parses canonical JSONL. Malformed lines are counted, not fatal,
    /// unless they exceed `opts.max_malformed_fraction` of all records.
    pub fn parse_jsonl<R: BufRead>(
        reader: R,
        opts: ParseOptions,
    ) -> Result<(RibSnapshot, ParseStats), RibError> {
        let mut stats = ParseStats::default();
        let mut entries = Vec::new();
        let mut identities: BTreeMap<(String, String), u32> = BTreeMap::new();
        let malformed = |stats: &mut ParseStats, lineno: usize, msg: String| {
            stats.malformed += 1;
            if stats.errors.len() < MAX_ERROR_SAMPLES {
                stats.errors.push(format!("line {lineno}: {msg}"));
            }
        };
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            // blank lines and `#` header comments are not records
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            stats.records += 1;
            let raw: RawRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    malformed(&mut stats, lineno, e.to_string());
                    continue;
                }
            };
            let prefix: IpPrefix = match raw.prefix.parse() {
                Ok(p) => p,
                Err(e) => {
                    malformed(&mut stats, lineno, format!("{e}"));
                    continue;
                }
            };
            let mut asns = Vec::with_capacity(raw.path.len());
            let mut has_set = false;
            for el in &raw.path {
                match el {
                    PathElem::Asn(a) => asns.push(Asn(*a)),
                    PathElem::Set(_) => has_set = true,
                }
            }
            if has_set {
                stats.as_set_skipped += 1;
                continue;
            }
            let path = match AsPath::new(asns) {
                Ok(p) => p,
                Err(e) => {
                    malformed(&mut stats, lineno, e.to_string());
                    continue;
                }
            };
            let key = (raw.collector.clone(), raw.peer_id.clone());
            match identities.get(&key) {
                Some(&asn) if asn != raw.peer_asn => {
                    malformed(
                        &mut stats,
                        lineno,
                        format!(
                            "session {}/{} already seen with peer AS{asn}",
                            raw.collector, raw.peer_id
                        ),
                    );
                    continue;
                }
                Some(_) => {}
                None => {
                    identities.insert(key, raw.peer_asn);
                }
            }
            entries.push(RibEntry {
                vp: VantagePoint::new(raw.collector, Asn(raw.peer_asn), raw.peer_id),
                prefix,
                path,
                timestamp: raw.ts,
            });
        }
        if stats.records > 0 {
            let frac = stats.malformed as f64 / stats.records as f64;
            if frac > opts.max_malformed_fraction {
                return Err(RibError::TooManyMalformed {
                    malformed: stats.malformed,
                    records: stats.records,
                    limit: opts.max_malformed_fraction * 100.0,
                    samples: stats.errors.clone(),
                });
            }
        }
        let parsed = entries.len() as u64;
        let (snap, duplicates) = RibSnapshot::from_entries(entries);
        stats.duplicates = duplicates;
        stats.loaded = parsed - duplicates;
        Ok((snap, stats))
    }

    /// Writes canonical JSONL, one line per entry in snapshot order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.entries {
            let rec = OutRecord {
                collector: &e.vp.collector,
                peer_asn: e.vp.peer_asn.0,
                peer_id: &e.vp.peer_id,
                prefix: e.prefix.to_string(),
                path: e.path.asns().iter().map(|a| a.0).collect(),
                ts: e.timestamp,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}
