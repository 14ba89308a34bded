//! Aircraft agents and their per-step decision function.
//!
//! `aircraft_step` is pure: it reads the agent, its inbox and a read-only
//! view of shared state, and returns the updated agent plus everything it
//! wants to send or change. The engine commits the results.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::inprocess::{parse_external, ExternalCommand};
use crate::agents::registry::{AgentStatus, DfRegistry};
use crate::config::Coordinates;
use crate::disturbance::{resolve, DisturbanceEvent, Mutation, ResolveContext};
use crate::ids::{AgentId, MsgId, SimTime};
use crate::messaging::{ClearanceGrant, Envelope, Payload, Recipient};
use crate::phase::{is_legal, FlightKind, FlightPhase};
use crate::queue::LandingQueue;
use crate::stack::HoldingStack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftAgent {
    pub id: AgentId,
    pub kind: FlightKind,
    pub phase: FlightPhase,
    pub phase_since: SimTime,
    /// Time the current phase lasts before the agent asks to move on.
    pub phase_dwell_s: u64,
    pub holding_level: Option<usize>,
    pub altitude_ft: u32,
    pub queue_index: Option<usize>,
    pub is_leader: bool,
    pub fuel_remaining_min: f64,
    pub entered_at: SimTime,
    pub entry_gate: u32,
    pub local_queue_copy: LandingQueue,
    pub pending_disturbance: Option<DisturbanceEvent>,
    /// Admission confirmed; may leave the entry gate.
    pub path_cleared: bool,
    /// Approach slot granted; may leave for the metering fix.
    pub approach_cleared: bool,
    /// Runway held while on it.
    pub runway: Option<String>,
    /// Relays already seen, by originating message id.
    pub relays_seen: BTreeSet<MsgId>,
    pub takeoff_info_sent: bool,
}

impl AircraftAgent {
    pub fn arrival(id: AgentId, t: SimTime, fuel_min: f64, entry_gate: u32, queue: LandingQueue) -> Self {
        AircraftAgent {
            id,
            kind: FlightKind::Arrival,
            phase: FlightPhase::ArrivalIntoAirspace,
            phase_since: t,
            phase_dwell_s: 0,
            holding_level: None,
            altitude_ft: 14_000,
            queue_index: None,
            is_leader: false,
            fuel_remaining_min: fuel_min,
            entered_at: t,
            entry_gate,
            local_queue_copy: queue,
            pending_disturbance: None,
            path_cleared: false,
            approach_cleared: false,
            runway: None,
            relays_seen: BTreeSet::new(),
            takeoff_info_sent: false,
        }
    }

    /// A departure that has just been granted its takeoff roll.
    pub fn departure(id: AgentId, t: SimTime, runway: String, roll_s: u64, queue: LandingQueue) -> Self {
        AircraftAgent {
            kind: FlightKind::Departure,
            phase: FlightPhase::OnRunway,
            phase_dwell_s: roll_s,
            altitude_ft: 0,
            fuel_remaining_min: f64::INFINITY,
            runway: Some(runway),
            ..AircraftAgent::arrival(id, t, 0.0, 0, queue)
        }
    }

    pub fn dwell_done(&self, t: SimTime) -> bool {
        t >= self.phase_since + self.phase_dwell_s
    }

    pub fn status(&self) -> AgentStatus {
        if self.pending_disturbance.as_ref().is_some_and(|d| d.is_open()) {
            AgentStatus::Disturbed
        } else if self.is_leader {
            AgentStatus::Leader
        } else {
            AgentStatus::Nominal
        }
    }

    /// Position derived from phase progress along a straight-in approach.
    pub fn coordinates(&self, radius_nm: f64, gates: u32, t: SimTime) -> Coordinates {
        let bearing = if gates == 0 {
            0.0
        } else {
            (self.entry_gate % gates) as f64 * 360.0 / gates as f64
        };
        let progress = if self.phase_dwell_s == 0 {
            0.0
        } else {
            (t.saturating_sub(self.phase_since) as f64 / self.phase_dwell_s as f64).min(1.0)
        };
        let lerp = |a: f64, b: f64| a + (b - a) * progress;
        let (range, alt) = match self.phase {
            FlightPhase::ArrivalIntoAirspace => (radius_nm, 14_000),
            FlightPhase::AtEntryGate => (radius_nm * 0.9, 12_000),
            FlightPhase::OnPath => (lerp(radius_nm * 0.9, 15.0), 11_000),
            FlightPhase::HoldingPattern => (15.0, self.altitude_ft),
            FlightPhase::ToMeteringFix => (lerp(15.0, 10.0), 6_000),
            FlightPhase::AtMeteringFix => (10.0, 5_000),
            FlightPhase::FinalDescent => (lerp(10.0, 0.0), (5_000.0 * (1.0 - progress)) as u32),
            FlightPhase::OnRunway | FlightPhase::Backtrack | FlightPhase::Departed | FlightPhase::Diverted => {
                return Coordinates::GROUND
            }
        };
        Coordinates {
            range_nm: range,
            bearing_deg: bearing,
            altitude_ft: alt,
        }
    }
}

/// Read-only shared state visible to every agent during evaluation.
#[derive(Debug, Clone, Copy)]
pub struct WorldView<'a> {
    pub registry: &'a DfRegistry,
    pub stack: &'a HoldingStack,
    pub heartbeat_s: u64,
    pub dt_s: u64,
    pub divert_reserve_min: f64,
    pub blockage_duration_s: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub recipients: Vec<Recipient>,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepOutput {
    pub agent: Option<AircraftAgent>,
    pub outbound: Vec<Outgoing>,
    pub request: Option<FlightPhase>,
    pub divert_reason: Option<String>,
    /// Disturbance closed this step by the agent's own policy.
    pub resolved: Option<(DisturbanceEvent, Vec<Mutation>)>,
    pub escalated: Option<DisturbanceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("{id} requested illegal transition {from} -> {to}")]
    IllegalTransitionRequest { id: AgentId, from: FlightPhase, to: FlightPhase },
}

/// Text carried by a departure's takeoff relay.
pub const TAKEOFF_INFO: &str = "takeoff";

fn to_df(payload: Payload) -> Outgoing {
    Outgoing {
        recipients: vec![Recipient::Agent(AgentId::df())],
        payload,
    }
}

/// One evaluation of one aircraft. `inbox` must be in delivery order.
pub fn aircraft_step(
    agent: &AircraftAgent,
    inbox: &[Envelope],
    view: &WorldView<'_>,
    t: SimTime,
) -> Result<StepOutput, StepError> {
    let mut a = agent.clone();
    let mut out = StepOutput::default();

    for env in inbox {
        match &env.payload {
            Payload::QueueSync { entries, version, .. } => {
                a.local_queue_copy.adopt(entries, *version);
            }
            Payload::Clearance { grant: ClearanceGrant::Path } => a.path_cleared = true,
            Payload::Clearance {
                grant: ClearanceGrant::RunwayFree,
            } => a.approach_cleared = true,
            Payload::Relay {
                origin,
                origin_sender,
                info,
            } => {
                let direct = env.sender == *origin_sender;
                let key = if direct { env.msg_id } else { *origin };
                if a.relays_seen.insert(key) && direct && a.is_leader {
                    if let Some(level) = a.holding_level.and_then(|l| view.stack.levels().get(l)) {
                        let recipients: Vec<Recipient> = level
                            .non_leaders()
                            .filter(|m| *m != origin_sender)
                            .map(|m| Recipient::Agent(m.clone()))
                            .collect();
                        if !recipients.is_empty() {
                            out.outbound.push(Outgoing {
                                recipients,
                                payload: Payload::Relay {
                                    origin: key,
                                    origin_sender: origin_sender.clone(),
                                    info: info.clone(),
                                },
                            });
                        }
                    }
                }
            }
            Payload::ExternalInput { source, record } => {
                if let Ok(ExternalCommand::RouteAmend { extra_s }) = parse_external(*source, record) {
                    if a.phase == FlightPhase::OnPath {
                        a.phase_dwell_s += extra_s;
                    }
                }
            }
            _ => {}
        }
    }

    if a.phase.is_inbound_airborne() && a.fuel_remaining_min.is_finite() {
        a.fuel_remaining_min -= view.dt_s as f64 / 60.0;
    }

    let mut request = None;

    if let Some(mut ev) = a.pending_disturbance.take() {
        if !ev.reported {
            ev.reported = true;
            out.outbound.push(to_df(Payload::DisturbanceReport {
                event: ev.id,
                cause: ev.cause,
            }));
        }
        let final_descent = view.registry.in_phase(FlightPhase::FinalDescent);
        let ctx = ResolveContext {
            queue: &a.local_queue_copy,
            final_descent: &final_descent,
            blockage_duration_s: view.blockage_duration_s,
            t,
        };
        match resolve(&ev, &a.id, a.phase, &ctx) {
            Ok((action, mutations)) => {
                ev.resolve_with(action, t).expect("pending disturbance is open");
                out.outbound.push(to_df(Payload::Resolution { event: ev.id, action }));
                for m in &mutations {
                    match m {
                        Mutation::RestartPath(_) => a.phase_since = t,
                        Mutation::Transition { to, .. } => request = Some(*to),
                        _ => {}
                    }
                }
                out.resolved = Some((ev, mutations));
            }
            Err(_) if ev.deadline_passed(t) => {
                ev.escalate(t, true).expect("pending disturbance is open");
                out.outbound.push(Outgoing {
                    recipients: vec![Recipient::ActiveSupervisor],
                    payload: Payload::Escalation {
                        event: ev.id,
                        aircraft: a.id.clone(),
                        cause: ev.cause,
                    },
                });
                out.escalated = Some(ev);
            }
            Err(_) => a.pending_disturbance = Some(ev),
        }
    }

    let low_fuel = a.kind == FlightKind::Arrival
        && matches!(
            a.phase,
            FlightPhase::AtEntryGate | FlightPhase::OnPath | FlightPhase::HoldingPattern
        )
        && a.fuel_remaining_min <= view.divert_reserve_min;

    if low_fuel {
        request = Some(FlightPhase::Diverted);
        out.divert_reason = Some("fuel_reserve".into());
    } else if request.is_none() {
        request = next_phase(&a, view, t);
    }

    if a.kind == FlightKind::Departure && a.phase == FlightPhase::OnRunway && !a.takeoff_info_sent {
        a.takeoff_info_sent = true;
        let recipients: Vec<Recipient> = view.stack.leaders().map(|l| Recipient::Agent(l.clone())).collect();
        if !recipients.is_empty() {
            out.outbound.push(Outgoing {
                recipients,
                payload: Payload::Relay {
                    origin: MsgId(0),
                    origin_sender: a.id.clone(),
                    info: TAKEOFF_INFO.into(),
                },
            });
        }
    }

    if view.heartbeat_s > 0 && t > a.entered_at && (t - a.entered_at).is_multiple_of(view.heartbeat_s) {
        out.outbound.push(to_df(Payload::Heartbeat { phase: Some(a.phase) }));
    }

    if let Some(to) = request {
        if !is_legal(a.phase, to) {
            return Err(StepError::IllegalTransitionRequest {
                id: a.id.clone(),
                from: a.phase,
                to,
            });
        }
    }
    out.request = request;
    out.agent = Some(a);
    Ok(out)
}

fn next_phase(a: &AircraftAgent, view: &WorldView<'_>, t: SimTime) -> Option<FlightPhase> {
    use FlightPhase::*;
    let done = a.dwell_done(t);
    match a.phase {
        ArrivalIntoAirspace if view.registry.contains(&a.id) => Some(AtEntryGate),
        AtEntryGate if done && a.path_cleared => Some(OnPath),
        OnPath if done => Some(if a.approach_cleared { ToMeteringFix } else { HoldingPattern }),
        HoldingPattern if a.approach_cleared => Some(ToMeteringFix),
        ToMeteringFix if done => Some(AtMeteringFix),
        AtMeteringFix if done => Some(FinalDescent),
        FinalDescent if done => Some(OnRunway),
        OnRunway if done => Some(match a.kind {
            FlightKind::Arrival => Backtrack,
            FlightKind::Departure => Departed,
        }),
        Backtrack if done => Some(Departed),
        _ => None,
    }
}
