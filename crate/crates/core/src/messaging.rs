//! Message bus with simulated network latency and loss.
//!
//! Every send schedules one extra copy on the supervision channel, addressed
//! to whichever supervisor is active at delivery time. That channel never
//! drops messages.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disturbance::{Cause, ResolutionAction};
use crate::ids::{AgentId, EventId, MsgId, SimTime};
use crate::phase::FlightPhase;
use crate::queue::QueueOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    QueueSync,
    Heartbeat,
    Handover,
    DisturbanceReport,
    Resolution,
    EntryNotify,
    Relay,
    ExternalInput,
    Escalation,
    Clearance,
}

/// External systems the InProcess agent reads from. Modeled as scripted records only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExternalSource {
    #[serde(rename = "FMS")]
    Fms,
    #[serde(rename = "URET")]
    Uret,
    #[serde(rename = "SMR")]
    Smr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearanceGrant {
    /// Admission confirmed; proceed from the entry gate onto the arrival path.
    Path,
    /// An approach slot opened; the queue head may leave for the metering fix.
    RunwayFree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    QueueSync {
        op: QueueOp,
        entries: Vec<AgentId>,
        version: u64,
    },
    Heartbeat {
        phase: Option<FlightPhase>,
    },
    Handover {
        level: usize,
        successor: Option<AgentId>,
    },
    DisturbanceReport {
        event: EventId,
        cause: Cause,
    },
    Resolution {
        event: EventId,
        action: ResolutionAction,
    },
    EntryNotify {
        aircraft: AgentId,
    },
    Relay {
        origin: MsgId,
        origin_sender: AgentId,
        info: String,
    },
    ExternalInput {
        source: ExternalSource,
        record: String,
    },
    Escalation {
        event: EventId,
        aircraft: AgentId,
        cause: Cause,
    },
    Clearance {
        grant: ClearanceGrant,
    },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::QueueSync { .. } => MessageKind::QueueSync,
            Payload::Heartbeat { .. } => MessageKind::Heartbeat,
            Payload::Handover { .. } => MessageKind::Handover,
            Payload::DisturbanceReport { .. } => MessageKind::DisturbanceReport,
            Payload::Resolution { .. } => MessageKind::Resolution,
            Payload::EntryNotify { .. } => MessageKind::EntryNotify,
            Payload::Relay { .. } => MessageKind::Relay,
            Payload::ExternalInput { .. } => MessageKind::ExternalInput,
            Payload::Escalation { .. } => MessageKind::Escalation,
            Payload::Clearance { .. } => MessageKind::Clearance,
        }
    }
}

/// Addressee of one delivery.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipient {
    Agent(AgentId),
    /// Resolved at delivery time to the supervisor that is active then.
    ActiveSupervisor,
}

impl Recipient {
    pub fn label(&self) -> String {
        match self {
            Recipient::Agent(id) => id.to_string(),
            Recipient::ActiveSupervisor => "@supervisor".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub msg_id: MsgId,
    pub sender: AgentId,
    pub recipients: Vec<Recipient>,
    pub kind: MessageKind,
    pub payload: Payload,
    pub sent_at: SimTime,
    pub deliver_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Latency {
    Fixed(u64),
    Uniform { min_s: u64, max_s: u64 },
}

impl Latency {
    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match *self {
            Latency::Fixed(s) => s,
            Latency::Uniform { min_s, max_s } => rng.random_range(min_s..=max_s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkClass {
    pub latency_s: Latency,
    #[serde(default)]
    pub loss_prob: f64,
}

/// Latency and loss per link class. `air` covers every delivery to an
/// aircraft or service agent; `supervision` covers ATC/TRACON and the
/// overhear channel and must be lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkModel {
    pub air: LinkClass,
    pub supervision: LinkClass,
}

impl Default for NetworkModel {
    fn default() -> Self {
        NetworkModel {
            air: LinkClass {
                latency_s: Latency::Fixed(1),
                loss_prob: 0.0,
            },
            supervision: LinkClass {
                latency_s: Latency::Fixed(1),
                loss_prob: 0.0,
            },
        }
    }
}

impl NetworkModel {
    pub fn validate(&self, errors: &mut Vec<String>) {
        for (name, link) in [("air", &self.air), ("supervision", &self.supervision)] {
            if !(0.0..1.0).contains(&link.loss_prob) {
                errors.push(format!(
                    "network.{name}.loss_prob: {} not in [0, 1)",
                    link.loss_prob
                ));
            }
            if let Latency::Uniform { min_s, max_s } = link.latency_s {
                if min_s > max_s {
                    errors.push(format!("network.{name}.latency_s: min_s {min_s} > max_s {max_s}"));
                }
            }
        }
        if self.supervision.loss_prob != 0.0 {
            errors.push("network.supervision.loss_prob: supervision channel must be lossless".into());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("sender {0} is not a live endpoint")]
    UnknownSender(AgentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Loss,
    UnknownRecipient,
    RecipientGone,
}

/// Outcome of one send, for the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct SendReport {
    pub msg_id: MsgId,
    pub scheduled: Vec<(Recipient, SimTime)>,
    pub dropped: Vec<(AgentId, DropReason)>,
}

/// One scheduled delivery as returned by [`Bus::deliver_due`].
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub recipient: Recipient,
    /// Copy on the supervision channel rather than an addressed delivery.
    pub overhear: bool,
    pub envelope: Envelope,
}

#[derive(Debug, Default, Clone)]
pub struct Bus {
    next_msg: u64,
    seq: u64,
    pending: BTreeMap<(SimTime, MsgId, u64), Delivery>,
    directory: BTreeSet<AgentId>,
}

impl Bus {
    pub fn new() -> Self {
        Bus::default()
    }

    /// Make `id` a valid sender and recipient.
    pub fn attach(&mut self, id: AgentId) {
        self.directory.insert(id);
    }

    pub fn detach(&mut self, id: &AgentId) {
        self.directory.remove(id);
    }

    pub fn is_attached(&self, id: &AgentId) -> bool {
        self.directory.contains(id)
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Pending addressed (non-overhear) deliveries of one kind.
    pub fn pending_of_kind(&self, kind: MessageKind) -> usize {
        self.pending
            .values()
            .filter(|d| !d.overhear && d.envelope.kind == kind)
            .count()
    }

    pub fn pending(&self) -> impl Iterator<Item = &Delivery> {
        self.pending.values()
    }

    fn schedule(&mut self, delivery: Delivery) {
        self.seq += 1;
        let key = (
            delivery.envelope.deliver_at,
            delivery.envelope.msg_id,
            self.seq,
        );
        self.pending.insert(key, delivery);
    }

    /// Schedule one delivery per recipient plus the overhear copy.
    pub fn send<R: Rng>(
        &mut self,
        sender: AgentId,
        recipients: Vec<Recipient>,
        payload: Payload,
        sent_at: SimTime,
        net: &NetworkModel,
        rng: &mut R,
    ) -> Result<SendReport, BusError> {
        if !self.directory.contains(&sender) {
            return Err(BusError::UnknownSender(sender));
        }
        self.next_msg += 1;
        let msg_id = MsgId(self.next_msg);
        let template = Envelope {
            msg_id,
            sender,
            kind: payload.kind(),
            recipients: recipients.clone(),
            payload,
            sent_at,
            deliver_at: sent_at,
        };
        let mut report = SendReport {
            msg_id,
            scheduled: Vec::new(),
            dropped: Vec::new(),
        };
        for r in recipients {
            let link = match &r {
                Recipient::ActiveSupervisor => &net.supervision,
                Recipient::Agent(id) if id.is_supervisor() => &net.supervision,
                Recipient::Agent(_) => &net.air,
            };
            if let Recipient::Agent(id) = &r {
                if !self.directory.contains(id) {
                    report.dropped.push((id.clone(), DropReason::UnknownRecipient));
                    continue;
                }
                if link.loss_prob > 0.0 && rng.random_bool(link.loss_prob) {
                    report.dropped.push((id.clone(), DropReason::Loss));
                    continue;
                }
            }
            let deliver_at = sent_at + link.latency_s.sample(rng);
            report.scheduled.push((r.clone(), deliver_at));
            let mut env = template.clone();
            env.deliver_at = deliver_at;
            self.schedule(Delivery {
                recipient: r,
                overhear: false,
                envelope: env,
            });
        }
        let deliver_at = sent_at + net.supervision.latency_s.sample(rng);
        let mut env = template;
        env.deliver_at = deliver_at;
        self.schedule(Delivery {
            recipient: Recipient::ActiveSupervisor,
            overhear: true,
            envelope: env,
        });
        Ok(report)
    }

    /// Remove and return every delivery due at or before `t`, ordered by
    /// `(deliver_at, msg_id)` and then scheduling order.
    pub fn deliver_due(&mut self, t: SimTime) -> Vec<Delivery> {
        let later = self.pending.split_off(&(t + 1, MsgId(0), 0));
        let due = std::mem::replace(&mut self.pending, later);
        due.into_values().collect()
    }

    /// Put a delivery back for a later attempt, keeping its identity.
    pub fn retry_at(&mut self, mut delivery: Delivery, at: SimTime) {
        delivery.envelope.deliver_at = at;
        self.schedule(delivery);
    }
}
