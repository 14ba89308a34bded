//! Passive supervisors: ATC, with TRACON as the fall-back.
//!
//! Supervisors only listen. They mirror the landing queue from overheard
//! queue-sync traffic and accept escalations. No function here can build a
//! queue-mutating message.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AgentId, MsgId, SimTime};
use crate::messaging::{Envelope, Payload, Recipient};
use crate::queue::LandingQueue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "ATC")]
    Atc,
    #[serde(rename = "TRACON")]
    Tracon,
}

impl Role {
    pub fn agent_id(self) -> AgentId {
        match self {
            Role::Atc => AgentId::atc(),
            Role::Tracon => AgentId::tracon(),
        }
    }

    pub fn other(self) -> Role {
        match self {
            Role::Atc => Role::Tracon,
            Role::Tracon => Role::Atc,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Atc => "ATC",
            Role::Tracon => "TRACON",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisorState {
    pub role: Role,
    pub alive: bool,
    pub mirrored_queue: LandingQueue,
    /// Append-only record of every overheard message.
    pub overheard_log: Vec<(SimTime, MsgId)>,
}

impl SupervisorState {
    pub fn new(role: Role, queue_capacity: usize) -> Self {
        SupervisorState {
            role,
            alive: true,
            mirrored_queue: LandingQueue::new(queue_capacity),
            overheard_log: Vec::new(),
        }
    }

    pub fn has_overheard(&self, id: MsgId) -> bool {
        self.overheard_log.iter().any(|(_, m)| *m == id)
    }

    /// Take over the other supervisor's picture where it is newer or more complete.
    pub fn sync_from(&mut self, other: &SupervisorState) {
        self.mirrored_queue
            .adopt(other.mirrored_queue.entries(), other.mirrored_queue.version());
        let mine: BTreeSet<MsgId> = self.overheard_log.iter().map(|(_, m)| *m).collect();
        let missing: Vec<_> = other
            .overheard_log
            .iter()
            .filter(|(_, m)| !mine.contains(m))
            .copied()
            .collect();
        if !missing.is_empty() {
            self.overheard_log.extend(missing);
            self.overheard_log.sort();
        }
    }
}

/// Record an overheard message. Queue-sync traffic is replayed into the mirror.
/// Returns the updated supervisor state; the caller must only invoke this on a
/// live supervisor.
pub fn atc_overhear(sup: &SupervisorState, env: &Envelope, t: SimTime) -> SupervisorState {
    debug_assert!(sup.alive, "overhear on a dead supervisor");
    let mut next = sup.clone();
    next.overheard_log.push((t, env.msg_id));
    if let Payload::QueueSync { op, entries, version } = &env.payload {
        let mirror = &mut next.mirrored_queue;
        if *version == mirror.version() + 1 {
            let mut replay = mirror.clone();
            if replay.apply(op).is_ok() && replay.entries() == entries.as_slice() {
                *mirror = replay;
            } else {
                mirror.adopt(entries, *version);
            }
        } else {
            // missed or reordered traffic: adopt the newer snapshot
            mirror.adopt(entries, *version);
        }
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FailoverError {
    #[error("both supervisors are down")]
    BothSupervisorsDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Switch {
    Failover,
    Failback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailoverOutcome {
    pub atc: SupervisorState,
    pub tracon: SupervisorState,
    pub active: Role,
    pub switch: Option<Switch>,
}

/// Decide which supervisor is active. `gap_s` is the time since the last ATC
/// heartbeat reached TRACON.
///
/// ATC loses control when the gap exceeds `timeout_s` and TRACON is up to
/// take over; it takes control back once its heartbeats arrive again. On
/// failback ATC first catches up from TRACON's mirror.
pub fn tracon_failover(
    atc: &SupervisorState,
    tracon: &SupervisorState,
    active: Role,
    gap_s: u64,
    timeout_s: u64,
) -> Result<FailoverOutcome, FailoverError> {
    let mut out = FailoverOutcome {
        atc: atc.clone(),
        tracon: tracon.clone(),
        active,
        switch: None,
    };
    let atc_heard = gap_s <= timeout_s;
    match active {
        Role::Atc => {
            if atc_heard || (atc.alive && !tracon.alive) {
                return Ok(out);
            }
            if !tracon.alive {
                return Err(FailoverError::BothSupervisorsDown);
            }
            out.active = Role::Tracon;
            out.switch = Some(Switch::Failover);
        }
        Role::Tracon => {
            if atc.alive && (atc_heard || !tracon.alive) {
                out.atc.sync_from(tracon);
                out.active = Role::Atc;
                out.switch = Some(Switch::Failback);
            } else if !tracon.alive {
                return Err(FailoverError::BothSupervisorsDown);
            }
        }
    }
    Ok(out)
}

/// TRACON's notice that an aircraft entered the terminal airspace. Addressed
/// to whichever supervisor is active when it arrives.
pub fn tracon_entry_notify(aircraft: &AgentId) -> (AgentId, Vec<Recipient>, Payload) {
    (
        AgentId::tracon(),
        vec![Recipient::ActiveSupervisor],
        Payload::EntryNotify {
            aircraft: aircraft.clone(),
        },
    )
}
