//! AS relationships in CAIDA serial format (`a|b|-1` provider-customer,
//! `a|b|0` peers).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asn::Asn;

#[derive(Debug, Error)]
pub enum RelError {
    #[error("reading relationships: {0}")]
    Io(#[from] std::io::Error),
    #[error("relationships line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("conflicting relationship for pair {0}|{1}")]
    Conflict(Asn, Asn),
}

/// How `a` relates to `b` in an entry `(a, b)`.
#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relationship {
    CustomerOf,
    ProviderOf,
    Peer,
}

impl Relationship {
    pub fn inverse(self) -> Self {
        match self {
            Relationship::CustomerOf => Relationship::ProviderOf,
            Relationship::ProviderOf => Relationship::CustomerOf,
            Relationship::Peer => Relationship::Peer,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AsRelationships {
    rels: BTreeMap<(Asn, Asn), Relationship>,
}

impl AsRelationships {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `a`'s relation to `b` and the inverse.
    pub fn insert(&mut self, a: Asn, b: Asn, rel: Relationship) -> Result<(), RelError> {
        if a == b {
            return Err(RelError::Conflict(a, b));
        }
        let entries = [((a, b), rel), ((b, a), rel.inverse())];
        if entries
            .iter()
            .any(|(k, r)| self.rels.get(k).is_some_and(|old| old != r))
        {
            return Err(RelError::Conflict(a, b));
        }
        self.rels.extend(entries);
        Ok(())
    }

    pub fn relationship(&self, a: Asn, b: Asn) -> Option<Relationship> {
        self.rels.get(&(a, b)).copied()
    }

    pub fn is_customer_of(&self, a: Asn, b: Asn) -> bool {
        self.relationship(a, b) == Some(Relationship::CustomerOf)
    }

    pub fn len_pairs(&self) -> usize {
        self.rels.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }

    /// Direct customers of `asn`.
    pub fn customers(&self, asn: Asn) -> BTreeSet<Asn> {
        self.rels
            .range((asn, Asn(0))..=(asn, Asn(u32::MAX)))
            .filter(|(_, r)| **r == Relationship::ProviderOf)
            .map(|((_, b), _)| *b)
            .collect()
    }

    /// All direct and indirect customers of `asn`, excluding `asn`.
    pub fn customer_cone(&self, asn: Asn) -> BTreeSet<Asn> {
        let mut cone = BTreeSet::new();
        let mut queue = VecDeque::from([asn]);
        while let Some(a) = queue.pop_front() {
            for c in self.customers(a) {
                if c != asn && cone.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        cone
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self, RelError> {
        let mut rels = AsRelationships::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let err = |msg: String| RelError::Parse { line: i + 1, msg };
            let mut fields = t.split('|');
            let mut next = |name: &str| {
                fields
                    .next()
                    .map(str::trim)
                    .ok_or_else(|| err(format!("missing {name}")))
            };
            let a: Asn = next("first AS")?.parse().map_err(|e| err(format!("{e}")))?;
            let b: Asn = next("second AS")?.parse().map_err(|e| err(format!("{e}")))?;
            let rel = match next("relationship")? {
                "-1" => Relationship::ProviderOf,
                "0" => Relationship::Peer,
                other => return Err(err(format!("unknown relationship {other:?}"))),
            };
            rels.insert(a, b, rel)?;
        }
        Ok(rels)
    }

    /// Canonical serial form: providers first on `-1` lines, the smaller
    /// AS first on `0` lines, sorted.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (&(a, b), &r) in &self.rels {
            match r {
                Relationship::ProviderOf => out.push_str(&format!("{}|{}|-1\n", a.0, b.0)),
                Relationship::Peer if a < b => out.push_str(&format!("{}|{}|0\n", a.0, b.0)),
                _ => {}
            }
        }
        out
    }
}
