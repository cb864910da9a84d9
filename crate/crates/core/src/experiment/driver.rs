//! What an experiment needs from its substrate: announce, withdraw, publish
//! ROAs, wait, and look at the collectors.

use std::collections::VecDeque;

use thiserror::Error;

use crate::asn::Asn;
use crate::prefix::IpPrefix;
use crate::rib::RibSnapshot;
use crate::rpki::{RoaSet, Vrp};
use crate::sim::{EventKind, SimError, SimEvent, Simulator, Topology};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("recorded data has no snapshot left (used {0})")]
    Exhausted(usize),
    #[error("{0}")]
    Other(String),
}

/// Operations the experiment schedule is written against. A live testbed
/// would implement the same trait.
pub trait Driver {
    fn announce(&mut self, prefix: IpPrefix, origin: Asn, sessions: Option<&[Asn]>) -> Result<(), DriverError>;
    fn withdraw(&mut self, prefix: IpPrefix, origin: Asn) -> Result<(), DriverError>;
    /// Replaces the experiment-controlled VRPs with `vrps`.
    fn set_roas(&mut self, vrps: &[Vrp]) -> Result<(), DriverError>;
    fn wait(&mut self, secs: u64) -> Result<(), DriverError>;
    fn snapshot(&mut self) -> Result<RibSnapshot, DriverError>;
    /// Upper bound on how long any AS takes to act on a ROA change.
    fn max_roa_delay(&self) -> u64;
    /// Whether the session `local` hears `neighbor` on is a route-server
    /// session; `None` when unknown.
    fn session_via_route_server(&self, local: Asn, neighbor: Asn) -> Option<bool>;
}

/// Runs the schedule on the simulator.
#[derive(Clone, Debug)]
pub struct SimDriver {
    sim: Simulator,
    controlled: Vec<Vrp>,
}

impl SimDriver {
    /// `base_roas` are VRPs outside the experiment's control.
    pub fn new(topo: Topology, base_roas: RoaSet) -> Self {
        SimDriver {
            sim: Simulator::new(topo, base_roas),
            controlled: Vec::new(),
        }
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    fn schedule_now(&mut self, kind: EventKind) -> Result<(), DriverError> {
        let time = self.sim.now();
        self.sim.schedule(SimEvent { time, kind })?;
        Ok(())
    }
}

impl Driver for SimDriver {
    fn announce(&mut self, prefix: IpPrefix, origin: Asn, sessions: Option<&[Asn]>) -> Result<(), DriverError> {
        self.schedule_now(EventKind::Announce {
            prefix,
            origin,
            sessions: sessions.map(<[Asn]>::to_vec),
        })
    }

    fn withdraw(&mut self, prefix: IpPrefix, origin: Asn) -> Result<(), DriverError> {
        self.schedule_now(EventKind::Withdraw { prefix, origin })
    }

    fn set_roas(&mut self, vrps: &[Vrp]) -> Result<(), DriverError> {
        let add: Vec<Vrp> = vrps.iter().filter(|v| !self.controlled.contains(v)).copied().collect();
        let remove: Vec<Vrp> = self.controlled.iter().filter(|v| !vrps.contains(v)).copied().collect();
        self.controlled = vrps.to_vec();
        if add.is_empty() && remove.is_empty() {
            return Ok(());
        }
        self.schedule_now(EventKind::RoaUpdate { add, remove })
    }

    fn wait(&mut self, secs: u64) -> Result<(), DriverError> {
        let t = self.sim.now() + secs;
        self.sim.advance_to(t)?;
        Ok(())
    }

    fn snapshot(&mut self) -> Result<RibSnapshot, DriverError> {
        // apply anything scheduled at the current instant first
        let t = self.sim.now();
        self.sim.advance_to(t)?;
        Ok(self.sim.snapshot())
    }

    fn max_roa_delay(&self) -> u64 {
        self.sim.topology().max_delay()
    }

    fn session_via_route_server(&self, local: Asn, neighbor: Asn) -> Option<bool> {
        self.sim.topology().session(local, neighbor).map(|s| s.via_route_server)
    }
}

/// Replays snapshots collected elsewhere, in the order the schedule takes
/// them; control operations are no-ops.
#[derive(Clone, Debug, Default)]
pub struct RecordedDriver {
    snapshots: VecDeque<RibSnapshot>,
    used: usize,
}

impl RecordedDriver {
    pub fn new(snapshots: impl IntoIterator<Item = RibSnapshot>) -> Self {
        RecordedDriver {
            snapshots: snapshots.into_iter().collect(),
            used: 0,
        }
    }
}

impl Driver for RecordedDriver {
    fn announce(&mut self, _: IpPrefix, _: Asn, _: Option<&[Asn]>) -> Result<(), DriverError> {
        Ok(())
    }

    fn withdraw(&mut self, _: IpPrefix, _: Asn) -> Result<(), DriverError> {
        Ok(())
    }

    fn set_roas(&mut self, _: &[Vrp]) -> Result<(), DriverError> {
        Ok(())
    }

    fn wait(&mut self, _: u64) -> Result<(), DriverError> {
        Ok(())
    }

    fn snapshot(&mut self) -> Result<RibSnapshot, DriverError> {
        let s = self.snapshots.pop_front().ok_or(DriverError::Exhausted(self.used))?;
        self.used += 1;
        Ok(s)
    }

    fn max_roa_delay(&self) -> u64 {
        0
    }

    fn session_via_route_server(&self, _: Asn, _: Asn) -> Option<bool> {
        None
    }
}
