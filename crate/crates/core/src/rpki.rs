//! Validated ROA payloads and route origin validation (RFC 6811).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asn::Asn;
use crate::prefix::{Family, IpPrefix};

#[derive(Debug, Error)]
pub enum RpkiError {
    #[error("max length {max_length} invalid for prefix {prefix}")]
    InvalidMaxLength { prefix: IpPrefix, max_length: u8 },
    #[error("VRP input line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("VRP input: {0}")]
    Csv(#[from] csv::Error),
}

/// A validated ROA payload: `origin_asn` may originate `prefix` and any
/// more-specific down to `max_length`.
#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Vrp {
    pub prefix: IpPrefix,
    pub max_length: u8,
    #[serde(rename = "asn")]
    pub origin_asn: Asn,
}

impl Vrp {
    pub fn new(prefix: IpPrefix, max_length: u8, origin_asn: Asn) -> Result<Self, RpkiError> {
        if max_length < prefix.len() || max_length > prefix.family().max_len() {
            return Err(RpkiError::InvalidMaxLength { prefix, max_length });
        }
        Ok(Vrp {
            prefix,
            max_length,
            origin_asn,
        })
    }

    /// A VRP whose max length equals the prefix length.
    pub fn exact(prefix: IpPrefix, origin_asn: Asn) -> Self {
        Vrp {
            prefix,
            max_length: prefix.len(),
            origin_asn,
        }
    }

    /// Whether this VRP authorizes `origin` to announce `prefix`.
    ///
    /// Assumes the VRP already covers `prefix`.
    fn matches(&self, origin: Asn, prefix: &IpPrefix) -> bool {
        self.origin_asn != Asn::ZERO && self.origin_asn == origin && prefix.len() <= self.max_length
    }
}

impl fmt::Display for Vrp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{} {}", self.prefix, self.max_length, self.origin_asn)
    }
}

#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationState {
    Valid,
    Invalid,
    NotFound,
}

impl ValidationState {
    pub fn is_invalid(self) -> bool {
        self == ValidationState::Invalid
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ValidationState::Valid => "valid",
            ValidationState::Invalid => "invalid",
            ValidationState::NotFound => "not_found",
        }
    }
}

impl fmt::Display for ValidationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of validating one route, with the VRP that made it valid.
#[derive(Clone, Copy, Debug, Eq, PartialEq)]
pub struct Validation {
    pub state: ValidationState,
    pub witness: Option<Vrp>,
}

/// An immutable, deduplicated set of VRPs indexed for covering lookups.
#[derive(Clone, Debug, Default)]
pub struct RoaSet {
    vrps: Vec<Vrp>,
    index: HashMap<(Family, u8, u128), Vec<usize>>,
    v4_lens: BTreeSet<u8>,
    v6_lens: BTreeSet<u8>,
}

impl PartialEq for RoaSet {
    fn eq(&self, other: &Self) -> bool {
        self.vrps == other.vrps
    }
}

impl Eq for RoaSet {}

impl FromIterator<Vrp> for RoaSet {
    fn from_iter<I: IntoIterator<Item = Vrp>>(iter: I) -> Self {
        let set: BTreeSet<Vrp> = iter.into_iter().collect();
        let vrps: Vec<Vrp> = set.into_iter().collect();
        let mut index: HashMap<(Family, u8, u128), Vec<usize>> = HashMap::new();
        let mut v4_lens = BTreeSet::new();
        let mut v6_lens = BTreeSet::new();
        for (i, v) in vrps.iter().enumerate() {
            let p = v.prefix;
            index.entry((p.family(), p.len(), p.bits())).or_default().push(i);
            match p.family() {
                Family::V4 => v4_lens.insert(p.len()),
                Family::V6 => v6_lens.insert(p.len()),
            };
        }
        RoaSet {
            vrps,
            index,
            v4_lens,
            v6_lens,
        }
    }
}

impl RoaSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.vrps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vrps.is_empty()
    }

    /// All VRPs in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &Vrp> {
        self.vrps.iter()
    }

    /// A new set with `add` inserted and `remove` deleted.
    pub fn apply_delta(&self, add: &[Vrp], remove: &[Vrp]) -> RoaSet {
        let removed: BTreeSet<&Vrp> = remove.iter().collect();
        self.vrps
            .iter()
            .filter(|v| !removed.contains(v))
            .chain(add.iter())
            .copied()
            .collect()
    }

    /// Every VRP whose prefix covers `prefix`, least specific first.
    pub fn covering<'a>(&'a self, prefix: &IpPrefix) -> impl Iterator<Item = &'a Vrp> + 'a {
        let lens = match prefix.family() {
            Family::V4 => &self.v4_lens,
            Family::V6 => &self.v6_lens,
        };
        let family = prefix.family();
        let prefix = *prefix;
        lens.range(..=prefix.len())
            .filter_map(move |&len| {
                let sup = prefix.supernet(len)?;
                self.index.get(&(family, len, sup.bits()))
            })
            .flatten()
            .map(move |&i| &self.vrps[i])
    }

    pub fn validate(&self, origin: Asn, prefix: &IpPrefix) -> ValidationState {
        self.validate_with_witness(origin, prefix).state
    }

    /// Validates a route and returns the first matching VRP when valid.
    pub fn validate_with_witness(&self, origin: Asn, prefix: &IpPrefix) -> Validation {
        let mut covered = false;
        for vrp in self.covering(prefix) {
            covered = true;
            if vrp.matches(origin, prefix) {
                return Validation {
                    state: ValidationState::Valid,
                    witness: Some(*vrp),
                };
            }
        }
        Validation {
            state: if covered {
                ValidationState::Invalid
            } else {
                ValidationState::NotFound
            },
            witness: None,
        }
    }

    /// Reads `prefix,maxlen,asn` CSV. A blank max length means the prefix
    /// length; the ASN may carry an `AS` prefix.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, RpkiError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize, RpkiError> {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| RpkiError::Parse {
                    line: 1,
                    msg: format!("missing column {name:?}"),
                })
        };
        let (ip, im, ia) = (col("prefix")?, col("maxlen")?, col("asn")?);
        let mut vrps = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let err = |msg: String| RpkiError::Parse { line, msg };
            let field = |i: usize| rec.get(i).ok_or_else(|| err(format!("missing field {i}")));
            let prefix: IpPrefix = field(ip)?.parse().map_err(|e| err(format!("{e}")))?;
            let maxlen = field(im)?;
            let max_length = if maxlen.is_empty() {
                prefix.len()
            } else {
                maxlen
                    .parse::<u8>()
                    .map_err(|_| err(format!("bad maxlen {maxlen:?}")))?
            };
            let asn: Asn = field(ia)?.parse().map_err(|e| err(format!("{e}")))?;
            vrps.push(Vrp::new(prefix, max_length, asn).map_err(|e| err(e.to_string()))?);
        }
        Ok(vrps.into_iter().collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("prefix,maxlen,asn\n");
        for v in &self.vrps {
            out.push_str(&format!("{},{},{}\n", v.prefix, v.max_length, v.origin_asn.0));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> IpPrefix {
        s.parse().unwrap()
    }

    fn set(v: &[(&str, u8, u32)]) -> RoaSet {
        v.iter()
            .map(|(pf, ml, a)| Vrp::new(p(pf), *ml, Asn(*a)).unwrap())
            .collect()
    }

    #[test]
    fn valid_exact_match() {
        let roas = set(&[("10.0.0.0/16", 16, 47065)]);
        assert_eq!(
            roas.validate(Asn(47065), &p("10.0.0.0/16")),
            ValidationState::Valid
        );
    }

    #[test]
    fn subprefix_beyond_maxlen_is_invalid() {
        let roas = set(&[("10.0.0.0/16", 16, 47065)]);
        assert_eq!(
            roas.validate(Asn(47065), &p("10.0.5.0/24")),
            ValidationState::Invalid
        );
    }

    #[test]
    fn wrong_origin_is_invalid_and_uncovered_is_not_found() {
        let roas = set(&[("10.0.0.0/16", 24, 47065)]);
        assert_eq!(
            roas.validate(Asn(1), &p("10.0.5.0/24")),
            ValidationState::Invalid
        );
        assert_eq!(
            roas.validate(Asn(47065), &p("10.1.0.0/16")),
            ValidationState::NotFound
        );
        assert_eq!(
            RoaSet::empty().validate(Asn(47065), &p("10.0.0.0/16")),
            ValidationState::NotFound
        );
    }

    #[test]
    fn as0_never_validates() {
        let roas = set(&[("10.0.0.0/16", 24, 0)]);
        assert_eq!(
            roas.validate(Asn(0), &p("10.0.0.0/16")),
            ValidationState::Invalid
        );
        assert_eq!(
            roas.validate(Asn(5), &p("10.0.0.0/16")),
            ValidationState::Invalid
        );
        let both = set(&[("10.0.0.0/16", 24, 0), ("10.0.0.0/16", 16, 5)]);
        assert_eq!(
            both.validate(Asn(5), &p("10.0.0.0/16")),
            ValidationState::Valid
        );
    }

    #[test]
    fn witness_is_returned_for_valid() {
        let roas = set(&[("10.0.0.0/8", 8, 7), ("10.0.0.0/16", 24, 5)]);
        let v = roas.validate_with_witness(Asn(5), &p("10.0.1.0/24"));
        assert_eq!(v.state, ValidationState::Valid);
        assert_eq!(v.witness, Some(Vrp::new(p("10.0.0.0/16"), 24, Asn(5)).unwrap()));
        assert_eq!(roas.validate_with_witness(Asn(7), &p("10.0.1.0/24")).witness, None);
    }

    #[test]
    fn duplicates_are_collapsed() {
        let roas = set(&[("10.0.0.0/16", 16, 1), ("10.0.0.0/16", 16, 1)]);
        assert_eq!(roas.len(), 1);
    }

    #[test]
    fn invalid_max_length_rejected() {
        assert!(Vrp::new(p("10.0.0.0/16"), 15, Asn(1)).is_err());
        assert!(Vrp::new(p("10.0.0.0/16"), 33, Asn(1)).is_err());
        assert!(Vrp::new(p("2001:db8::/32"), 128, Asn(1)).is_ok());
    }

    #[test]
    fn csv_parsing() {
        let text = "prefix,maxlen,asn\n10.0.0.0/16,,AS47065\n10.1.0.0/16,24,64500\n# note\n2001:db8::/32,48,as65000\n";
        let roas = RoaSet::from_csv(text.as_bytes()).unwrap();
        assert_eq!(roas.len(), 3);
        assert!(roas.iter().any(|v| v.prefix == p("10.0.0.0/16") && v.max_length == 16));
        assert_eq!(
            roas.validate(Asn(65000), &p("2001:db8:1::/48")),
            ValidationState::Valid
        );
        let back = RoaSet::from_csv(roas.to_csv().as_bytes()).unwrap();
        assert_eq!(back, roas);
    }

    #[test]
    fn csv_errors_carry_line() {
        let text = "prefix,maxlen,asn\n10.0.0.0/16,16,1\n10.0.0.0/16,8,1\n";
        match RoaSet::from_csv(text.as_bytes()) {
            Err(RpkiError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(RoaSet::from_csv("pfx,maxlen,asn\n".as_bytes()).is_err());
    }

    #[test]
    fn delta() {
        let a = set(&[("10.0.0.0/16", 16, 1)]);
        let b = a.apply_delta(
            &[Vrp::exact(p("10.1.0.0/16"), Asn(2))],
            &[Vrp::exact(p("10.0.0.0/16"), Asn(1))],
        );
        assert_eq!(b.len(), 1);
        assert_eq!(b.validate(Asn(2), &p("10.1.0.0/16")), ValidationState::Valid);
    }

    // -- properties over small, heavily overlapping VRP sets ----------------

    use proptest::prelude::*;
    use std::net::{IpAddr, Ipv4Addr};

    /// Prefixes inside 10.0.0.0/8 that differ only in six bits, so covering
    /// relations are common.
    fn prefix() -> impl Strategy<Value = IpPrefix> {
        (0u32..64, 8u8..=24).prop_map(|(r, len)| {
            IpPrefix::truncating(IpAddr::V4(Ipv4Addr::from(0x0A00_0000 | (r << 10))), len).unwrap()
        })
    }

    /// Origins 0-3, so AS0 VRPs show up regularly.
    fn vrp() -> impl Strategy<Value = Vrp> {
        (prefix(), 0u8..4, 0u32..4)
            .prop_map(|(p, extra, a)| Vrp::new(p, (p.len() + extra).min(32), Asn(a)).unwrap())
    }

    fn vrps() -> impl Strategy<Value = Vec<Vrp>> {
        prop::collection::vec(vrp(), 0..24)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn covering_lookup_matches_linear_scan(v in vrps(), q in prefix()) {
            let roas: RoaSet = v.iter().copied().collect();
            let mut got: Vec<Vrp> = roas.covering(&q).copied().collect();
            got.sort();
            let mut want: Vec<Vrp> = v.iter().copied().filter(|x| x.prefix.contains(&q)).collect();
            want.sort();
            want.dedup();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn valid_results_carry_a_witness(v in vrps(), q in prefix(), origin in 0u32..5) {
            let roas: RoaSet = v.into_iter().collect();
            let r = roas.validate_with_witness(Asn(origin), &q);
            match r.state {
                ValidationState::Valid => {
                    let w = r.witness.unwrap();
                    prop_assert!(roas.iter().any(|x| *x == w));
                    prop_assert!(w.prefix.contains(&q) && q.len() <= w.max_length);
                    prop_assert!(w.origin_asn == Asn(origin) && origin != 0);
                }
                _ => prop_assert!(r.witness.is_none()),
            }
        }

        #[test]
        fn validation_ignores_vrp_order(
            v in vrps().prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())),
            q in prefix(),
            origin in 0u32..5,
        ) {
            let (a, b): (RoaSet, RoaSet) = (v.0.into_iter().collect(), v.1.into_iter().collect());
            prop_assert_eq!(a.validate(Asn(origin), &q), b.validate(Asn(origin), &q));
        }

        #[test]
        fn validation_is_monotone(
            v in vrps(),
            keep in prop::collection::vec(any::<bool>(), 24),
            q in prefix(),
            origin in 0u32..5,
        ) {
            let full: RoaSet = v.iter().copied().collect();
            let sub: RoaSet = v.iter().zip(&keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect();
            let (big, small) = (full.validate(Asn(origin), &q), sub.validate(Asn(origin), &q));
            // removing VRPs keeps NotFound; adding VRPs keeps Valid
            if big == ValidationState::NotFound {
                prop_assert_eq!(small, ValidationState::NotFound);
            }
            if small == ValidationState::Valid {
                prop_assert_eq!(big, ValidationState::Valid);
            }
        }
    }
}
