//! Line-delimited event log.
//!
//! One JSON object per line with the fields `time`, `kind`, `subject`,
//! `payload`, always in that order. The log is the single source of truth
//! for every metric and post-run audit.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agents::supervisor::Role;
use crate::config::RunwayMode;
use crate::disturbance::{Cause, EscalationReason, ResolutionAction};
use crate::ids::{EventId, MsgId, SimTime};
use crate::messaging::{DropReason, ExternalSource, MessageKind};
use crate::phase::{FlightKind, FlightPhase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    RunStart {
        seed: u64,
        scenario_hash: String,
        duration_s: u64,
        dt_s: u64,
    },
    RunEnd {
        arrivals_admitted: u64,
        arrivals_landed: u64,
        arrivals_diverted: u64,
        arrivals_in_system: u64,
        departures_admitted: u64,
        departures_departed: u64,
        departures_in_system: u64,
        /// Escalation messages still travelling when the run ended.
        escalations_in_flight: u64,
    },
    /// A flight entered the simulation. Departures spawn ground-side.
    Spawn { flight: FlightKind },
    Phase { from: FlightPhase, to: FlightPhase },
    /// Departure left the ground queue and started its takeoff roll.
    TakeoffRoll { runway: String },
    Divert { reason: String },
    QueueMutation {
        op: String,
        by: String,
        version: u64,
        length: usize,
    },
    HoldingJoin { level: usize, altitude_ft: u32 },
    Handover {
        level: usize,
        successor: Option<String>,
    },
    LevelShift { removed_level: usize },
    MessageSent {
        msg_id: MsgId,
        msg_kind: MessageKind,
        recipients: Vec<String>,
    },
    MessageDelivered { msg_id: MsgId, msg_kind: MessageKind },
    MessageDropped {
        msg_id: MsgId,
        recipient: String,
        reason: DropReason,
    },
    Overheard { msg_id: MsgId },
    DfRegister { phase: FlightPhase },
    DfDeregister {},
    RunwayQueued { runway: String, mode: RunwayMode },
    RunwayGranted {
        runway: String,
        mode: RunwayMode,
        start: SimTime,
        until: SimTime,
    },
    RunwayBlocked { runway: String, until: SimTime },
    DisturbanceRaised {
        event: EventId,
        cause: Cause,
        target: String,
    },
    DisturbanceResolved {
        event: EventId,
        action: ResolutionAction,
    },
    DisturbanceEscalated {
        event: EventId,
        reason: EscalationReason,
    },
    EscalationReceived { event: EventId, by: Role },
    SupervisorDown { role: Role },
    SupervisorUp { role: Role },
    Failover { to: Role },
    Failback { to: Role },
    SupervisionGap {},
    ExternalInput {
        source: ExternalSource,
        record: String,
    },
    Fault { reason: String },
}

impl Event {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Event::RunStart { .. } => "run_start",
            Event::RunEnd { .. } => "run_end",
            Event::Spawn { .. } => "spawn",
            Event::Phase { .. } => "phase",
            Event::TakeoffRoll { .. } => "takeoff_roll",
            Event::Divert { .. } => "divert",
            Event::QueueMutation { .. } => "queue_mutation",
            Event::HoldingJoin { .. } => "holding_join",
            Event::Handover { .. } => "handover",
            Event::LevelShift { .. } => "level_shift",
            Event::MessageSent { .. } => "message_sent",
            Event::MessageDelivered { .. } => "message_delivered",
            Event::MessageDropped { .. } => "message_dropped",
            Event::Overheard { .. } => "overheard",
            Event::DfRegister { .. } => "df_register",
            Event::DfDeregister { .. } => "df_deregister",
            Event::RunwayQueued { .. } => "runway_queued",
            Event::RunwayGranted { .. } => "runway_granted",
            Event::RunwayBlocked { .. } => "runway_blocked",
            Event::DisturbanceRaised { .. } => "disturbance_raised",
            Event::DisturbanceResolved { .. } => "disturbance_resolved",
            Event::DisturbanceEscalated { .. } => "disturbance_escalated",
            Event::EscalationReceived { .. } => "escalation_received",
            Event::SupervisorDown { .. } => "supervisor_down",
            Event::SupervisorUp { .. } => "supervisor_up",
            Event::Failover { .. } => "failover",
            Event::Failback { .. } => "failback",
            Event::SupervisionGap { .. } => "supervision_gap",
            Event::ExternalInput { .. } => "external_input",
            Event::Fault { .. } => "fault",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub time: SimTime,
    pub subject: String,
    pub event: Event,
}

#[derive(Serialize)]
struct WireOut<'a> {
    time: SimTime,
    kind: &'a Value,
    subject: &'a str,
    payload: &'a Value,
}

#[derive(Deserialize)]
struct WireIn {
    time: SimTime,
    kind: String,
    subject: String,
    #[serde(default)]
    payload: Value,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Malformed {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl LogRecord {
    pub fn new(time: SimTime, subject: impl Into<String>, event: Event) -> Self {
        LogRecord {
            time,
            subject: subject.into(),
            event,
        }
    }

    /// Serialize as one JSON line without the trailing newline.
    pub fn to_line(&self) -> String {
        let tagged = serde_json::to_value(&self.event).expect("event serializes");
        let empty = Value::Object(Default::default());
        let kind = &tagged["kind"];
        let payload = tagged.get("payload").unwrap_or(&empty);
        serde_json::to_string(&WireOut {
            time: self.time,
            kind,
            subject: &self.subject,
            payload,
        })
        .expect("record serializes")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        let raw: WireIn = serde_json::from_str(line)?;
        let payload = match raw.payload {
            Value::Null => Value::Object(Default::default()),
            p => p,
        };
        let event: Event = serde_json::from_value(serde_json::json!({
            "kind": raw.kind,
            "payload": payload,
        }))?;
        Ok(LogRecord {
            time: raw.time,
            subject: raw.subject,
            event,
        })
    }
}

pub fn write_log<W: Write>(records: &[LogRecord], mut out: W) -> io::Result<()> {
    for r in records {
        out.write_all(r.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn log_to_string(records: &[LogRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

pub fn read_log<R: BufRead>(input: R) -> Result<Vec<LogRecord>, LogError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = LogRecord::from_line(&line).map_err(|source| LogError::Malformed {
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}
