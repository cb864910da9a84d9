//! Toolkit for measuring adoption of RPKI route origin validation.
//!
//! * [`rpki`] and [`prefix`]: prefixes, VRPs and RFC 6811 validation.
//! * [`rib`] and [`relationships`]: collector RIB snapshots and AS
//!   relationship data.
//! * [`inference`]: the passive, collector-based ROV inference.
//! * [`analysis`]: sensitivity of that inference to vantage point choice,
//!   prefix visibility, and traffic-engineering signatures.
//! * [`sim`]: an AS-level BGP simulator with per-AS ROV policies.
//! * [`experiment`]: controlled announcement/ROA experiments and policy
//!   inference from their observations.

pub mod analysis;
pub mod asn;
pub mod cli;
pub mod experiment;
pub mod inference;
pub mod io;
pub mod prefix;
pub mod relationships;
pub mod report;
pub mod rib;
pub mod rpki;
pub mod sim;

pub use asn::Asn;
pub use prefix::{Family, IpPrefix};
pub use rib::{AsPath, RibEntry, RibSnapshot, VantagePoint};
pub use rpki::{RoaSet, ValidationState, Vrp};
