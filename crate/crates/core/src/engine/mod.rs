//! Fixed-step discrete-event engine.
//!
//! Each one-second step runs, in order: scripted events, traffic generation,
//! disturbance sampling (on minute boundaries), message delivery, agent
//! evaluation in id order, commits, the InProcess registry scan, supervisor
//! liveness, and invariant checks. All randomness comes from named streams
//! of the run seed, so a run is a pure function of (scenario, seed).

pub mod runway;
pub mod traffic;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::agents::aircraft::{aircraft_step, AircraftAgent, Outgoing, StepOutput, WorldView};
use crate::agents::inprocess::{inprocess_scan, ExternalRecord, LiveAgent};
use crate::agents::registry::DfRegistry;
use crate::agents::supervisor::{
    atc_overhear, tracon_entry_notify, tracon_failover, Role, SupervisorState, Switch,
};
use crate::config::RunwayMode;
use crate::disturbance::{
    promotion_commit_order, sample_disturbances, DisturbanceTarget, EscalationReason, Mutation,
    SampleCandidate,
};
use crate::eventlog::{Event, LogRecord};
use crate::ids::{AgentId, SimTime};
use crate::messaging::{Bus, ClearanceGrant, Delivery, MessageKind, Payload, Recipient};
use crate::phase::{is_legal, FlightKind, FlightPhase};
use crate::queue::{LandingQueue, QueueError, QueueOp};
use crate::rng::Streams;
use crate::scenario::{ChaosFault, ScenarioFile, ScriptedEvent};
use crate::stack::HoldingStack;

use self::runway::RunwayBoard;
use self::traffic::generate_traffic;

/// Seconds between repeats of a clearance the recipient has not acted on.
const CLEARANCE_RETRY_S: u64 = 15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invariant violated at t={time}s: {detail}")]
    InvariantViolation { time: SimTime, detail: String },
}

/// Flow counters for the conservation check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub arrivals_admitted: u64,
    pub arrivals_landed: u64,
    pub arrivals_diverted: u64,
    pub departures_admitted: u64,
    pub departures_departed: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub log: Vec<LogRecord>,
    pub error: Option<EngineError>,
}

pub struct Engine {
    scenario: ScenarioFile,
    seed: u64,
    duration_s: u64,
    clock: SimTime,
    agents: BTreeMap<AgentId, AircraftAgent>,
    inboxes: BTreeMap<AgentId, Vec<crate::messaging::Envelope>>,
    bus: Bus,
    registry: DfRegistry,
    atc: SupervisorState,
    tracon: SupervisorState,
    active: Role,
    last_atc_heartbeat: SimTime,
    in_gap: bool,
    revivals: BTreeMap<SimTime, Vec<Role>>,
    stack: HoldingStack,
    queue: LandingQueue,
    runways: RunwayBoard,
    /// Departures waiting on the ground, with their planned roll time.
    ground: BTreeMap<AgentId, u64>,
    /// Landing runway time split into (on-runway, backtrack) per claimant.
    planned_landing: BTreeMap<AgentId, (u64, u64)>,
    hold_departures_until: SimTime,
    cleared_head: Option<(AgentId, SimTime)>,
    streams: Streams,
    log: Vec<LogRecord>,
    counters: Counters,
    next_arrival: u64,
    next_departure: u64,
    next_event: u64,
    scripted: Vec<ScriptedEvent>,
    scripted_pos: usize,
    externals_due: Vec<ExternalRecord>,
    chaos_requests: Vec<(AgentId, FlightPhase)>,
}

impl Engine {
    pub fn new(scenario: &ScenarioFile, seed: u64) -> Self {
        let cap = scenario.airspace.queue_capacity;
        let hold = &scenario.airspace.holding;
        let mut bus = Bus::new();
        for id in [AgentId::atc(), AgentId::tracon(), AgentId::df(), AgentId::inprocess()] {
            bus.attach(id);
        }
        let mut scripted = scenario.scripted.clone();
        scripted.sort_by_key(ScriptedEvent::time_s);
        let mut e = Engine {
            seed,
            duration_s: scenario.duration_s(),
            clock: 0,
            agents: BTreeMap::new(),
            inboxes: BTreeMap::new(),
            bus,
            registry: DfRegistry::new(),
            atc: SupervisorState::new(Role::Atc, cap),
            tracon: SupervisorState::new(Role::Tracon, cap),
            active: Role::Atc,
            last_atc_heartbeat: 0,
            in_gap: false,
            revivals: BTreeMap::new(),
            stack: HoldingStack::new(hold.base_altitude_ft, hold.band_width_ft),
            queue: LandingQueue::new(cap),
            runways: RunwayBoard::new(scenario.airspace.runways.clone(), scenario.airspace.separation_s),
            ground: BTreeMap::new(),
            planned_landing: BTreeMap::new(),
            hold_departures_until: 0,
            cleared_head: None,
            streams: Streams::new(seed),
            log: Vec::new(),
            counters: Counters::default(),
            next_arrival: 0,
            next_departure: 0,
            next_event: 0,
            scripted,
            scripted_pos: 0,
            externals_due: Vec::new(),
            chaos_requests: Vec::new(),
            scenario: scenario.clone(),
        };
        let hash = scenario.hash();
        e.record(
            0,
            "run",
            Event::RunStart {
                seed,
                scenario_hash: hash,
                duration_s: e.duration_s,
                dt_s: 1,
            },
        );
        e
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn is_done(&self) -> bool {
        self.clock >= self.duration_s
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn agents(&self) -> &BTreeMap<AgentId, AircraftAgent> {
        &self.agents
    }

    pub fn queue(&self) -> &LandingQueue {
        &self.queue
    }

    pub fn stack(&self) -> &HoldingStack {
        &self.stack
    }

    pub fn registry(&self) -> &DfRegistry {
        &self.registry
    }

    pub fn supervisors(&self) -> (&SupervisorState, &SupervisorState, Role) {
        (&self.atc, &self.tracon, self.active)
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn ground_len(&self) -> usize {
        self.ground.len()
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    /// Arrivals and departures currently in the system, ground queue included.
    pub fn in_system(&self) -> (u64, u64) {
        let arrivals = self.agents.values().filter(|a| a.kind == FlightKind::Arrival).count() as u64;
        (arrivals, (self.agents.len() as u64 - arrivals) + self.ground.len() as u64)
    }

    fn record(&mut self, t: SimTime, subject: impl Into<String>, event: Event) {
        self.log.push(LogRecord::new(t, subject, event));
    }

    /// Log a fault; in strict mode it also aborts the run.
    fn fault(&mut self, t: SimTime, subject: &str, detail: String) -> Result<(), EngineError> {
        self.record(t, subject, Event::Fault { reason: detail.clone() });
        if self.scenario.strict_mode {
            Err(EngineError::InvariantViolation { time: t, detail })
        } else {
            Ok(())
        }
    }

    fn sup_mut(&mut self, role: Role) -> &mut SupervisorState {
        match role {
            Role::Atc => &mut self.atc,
            Role::Tracon => &mut self.tracon,
        }
    }

    fn sup(&self, role: Role) -> &SupervisorState {
        match role {
            Role::Atc => &self.atc,
            Role::Tracon => &self.tracon,
        }
    }

    fn send(&mut self, t: SimTime, sender: &AgentId, recipients: Vec<Recipient>, payload: Payload) {
        let kind = payload.kind();
        let labels = recipients.iter().map(Recipient::label).collect();
        let rep = match self.bus.send(
            sender.clone(),
            recipients,
            payload,
            t,
            &self.scenario.network,
            &mut self.streams.network,
        ) {
            Ok(r) => r,
            Err(e) => {
                // only reachable through an engine bug; keep the run going and say so
                self.record(t, sender.as_str(), Event::Fault { reason: e.to_string() });
                return;
            }
        };
        self.record(
            t,
            sender.as_str(),
            Event::MessageSent {
                msg_id: rep.msg_id,
                msg_kind: kind,
                recipients: labels,
            },
        );
        for (who, reason) in rep.dropped {
            self.record(
                t,
                sender.as_str(),
                Event::MessageDropped {
                    msg_id: rep.msg_id,
                    recipient: who.to_string(),
                    reason,
                },
            );
        }
    }

    /// Advance one second.
    pub fn step(&mut self) -> Result<(), EngineError> {
        let t = self.clock;
        self.scripted_events(t);
        self.generate(t);
        if t.is_multiple_of(60) {
            self.sample(t);
        }
        self.deliver(t);
        let outputs = self.evaluate(t)?;
        self.commit(t, outputs)?;
        self.scan(t)?;
        self.supervise(t);
        self.check_invariants(t)?;
        self.clock += 1;
        Ok(())
    }

    /// Append the closing record. Call once after the last step.
    pub fn finish(&mut self) {
        let t = self.clock;
        let c = self.counters;
        let (arrivals, departures) = self.in_system();
        let in_flight = self.bus.pending_of_kind(MessageKind::Escalation) as u64;
        self.record(
            t,
            "run",
            Event::RunEnd {
                arrivals_admitted: c.arrivals_admitted,
                arrivals_landed: c.arrivals_landed,
                arrivals_diverted: c.arrivals_diverted,
                arrivals_in_system: arrivals,
                departures_admitted: c.departures_admitted,
                departures_departed: c.departures_departed,
                departures_in_system: departures,
                escalations_in_flight: in_flight,
            },
        );
    }

    pub fn into_log(self) -> Vec<LogRecord> {
        self.log
    }

    // step 0

    fn scripted_events(&mut self, t: SimTime) {
        if let Some(roles) = self.revivals.remove(&t) {
            for role in roles {
                self.sup_mut(role).alive = true;
                if role == Role::Tracon {
                    // TRACON starts timing ATC afresh
                    self.last_atc_heartbeat = t;
                }
                self.record(t, role.to_string(), Event::SupervisorUp { role });
            }
        }
        while self.scripted_pos < self.scripted.len() && self.scripted[self.scripted_pos].time_s() <= t {
            let ev = self.scripted[self.scripted_pos].clone();
            self.scripted_pos += 1;
            match ev {
                ScriptedEvent::Arrival { id, fuel_min, .. } => {
                    let id = AgentId::new(id);
                    if self.agents.contains_key(&id) {
                        self.record(t, id.as_str(), Event::Fault { reason: "duplicate scripted arrival".into() });
                    } else {
                        self.spawn_arrival(t, id, fuel_min);
                    }
                }
                ScriptedEvent::SupervisorKill { role, duration_s, .. } => {
                    self.sup_mut(role).alive = false;
                    self.revivals.entry(t + duration_s).or_default().push(role);
                    self.record(t, role.to_string(), Event::SupervisorDown { role });
                }
                ScriptedEvent::External { .. } => {
                    self.externals_due.push(ev.as_external().expect("external event"));
                }
                ScriptedEvent::Chaos { fault, target, seeds, .. } => {
                    if !seeds.is_empty() && !seeds.contains(&self.seed) {
                        continue;
                    }
                    let target = match target {
                        Some(id) => Some(AgentId::new(id)),
                        None => self.agents.keys().next().cloned(),
                    };
                    if let Some(id) = target {
                        match fault {
                            ChaosFault::IllegalTransition => {
                                self.chaos_requests.push((id, FlightPhase::ArrivalIntoAirspace))
                            }
                        }
                    }
                }
            }
        }
    }

    // step 1

    fn generate(&mut self, t: SimTime) {
        let (arr, dep) = generate_traffic(&self.scenario.traffic, t, 1, &mut self.streams.traffic);
        for _ in 0..arr {
            self.next_arrival += 1;
            let id = AgentId::new(format!("ARR{:04}", self.next_arrival));
            self.spawn_arrival(t, id, None);
        }
        for _ in 0..dep {
            self.next_departure += 1;
            let id = AgentId::new(format!("DEP{:04}", self.next_departure));
            self.spawn_departure(t, id);
        }
    }

    fn spawn_arrival(&mut self, t: SimTime, id: AgentId, fuel_min: Option<f64>) {
        let fuel = fuel_min.unwrap_or_else(|| self.scenario.traffic.initial_fuel(&mut self.streams.jitter));
        let gate = (self.counters.arrivals_admitted % self.scenario.airspace.entry_gates.max(1) as u64) as u32;
        let agent = AircraftAgent::arrival(id.clone(), t, fuel, gate, self.queue.clone());
        self.bus.attach(id.clone());
        self.agents.insert(id.clone(), agent);
        self.counters.arrivals_admitted += 1;
        self.record(t, id.as_str(), Event::Spawn { flight: FlightKind::Arrival });
        if self.tracon.alive {
            let (sender, to, payload) = tracon_entry_notify(&id);
            self.send(t, &sender, to, payload);
        }
    }

    fn spawn_departure(&mut self, t: SimTime, id: AgentId) {
        let roll = self.scenario.traffic.dwell(FlightPhase::OnRunway, &mut self.streams.jitter);
        let candidates: Vec<String> = self
            .scenario
            .airspace
            .runways_for(RunwayMode::Takeoff)
            .into_iter()
            .map(String::from)
            .collect();
        self.runways
            .enqueue(id.clone(), RunwayMode::Takeoff, candidates, roll, t);
        self.ground.insert(id.clone(), roll);
        self.counters.departures_admitted += 1;
        self.record(t, id.as_str(), Event::Spawn { flight: FlightKind::Departure });
    }

    // step 2

    fn sample(&mut self, t: SimTime) {
        let candidates: Vec<SampleCandidate> = self
            .agents
            .values()
            .filter(|a| a.pending_disturbance.is_none())
            .map(|a| SampleCandidate {
                id: a.id.clone(),
                kind: a.kind,
                phase: a.phase,
                runway: match a.phase {
                    FlightPhase::OnRunway | FlightPhase::Backtrack => a.runway.clone(),
                    _ => None,
                },
            })
            .collect();
        let events = sample_disturbances(
            &self.scenario.causes,
            &candidates,
            t,
            self.scenario.timeouts.escalation_s,
            &mut self.next_event,
            &mut self.streams.disturbance,
        );
        let mut hit = BTreeSet::new();
        for ev in events {
            // one open disturbance per aircraft: later draws this minute merge into the first
            if !hit.insert(ev.flight.clone()) {
                continue;
            }
            self.record(
                t,
                ev.flight.as_str(),
                Event::DisturbanceRaised {
                    event: ev.id,
                    cause: ev.cause,
                    target: ev.target.label(),
                },
            );
            if let DisturbanceTarget::Runway(r) = &ev.target {
                let until = t + self.scenario.causes.blockage_duration_s;
                self.runways.block(r, until);
                self.record(t, r.as_str(), Event::RunwayBlocked { runway: r.clone(), until });
            }
            if let Some(a) = self.agents.get_mut(&ev.flight) {
                a.pending_disturbance = Some(ev);
            }
        }
    }

    // step 3

    fn deliver(&mut self, t: SimTime) {
        for d in self.bus.deliver_due(t) {
            if d.overhear {
                self.deliver_overhear(t, d);
                continue;
            }
            match d.recipient.clone() {
                Recipient::ActiveSupervisor => {
                    let role = self.active;
                    if self.sup(role).alive {
                        self.supervisor_receive(t, role, &d);
                    } else {
                        // held until someone is listening
                        self.bus.retry_at(d, t + 1);
                    }
                }
                Recipient::Agent(id) if id.is_supervisor() => {
                    let role = if id.as_str() == AgentId::ATC { Role::Atc } else { Role::Tracon };
                    if self.sup(role).alive {
                        self.supervisor_receive(t, role, &d);
                    } else if d.envelope.kind == MessageKind::Heartbeat {
                        self.dropped(t, &d, crate::messaging::DropReason::RecipientGone);
                    } else {
                        self.bus.retry_at(d, t + 1);
                    }
                }
                Recipient::Agent(id) if id.as_str() == AgentId::DF => {
                    if let Payload::Heartbeat { .. } = d.envelope.payload {
                        let _ = self.registry.touch(&d.envelope.sender, t);
                    } else {
                        self.delivered(t, &id, &d);
                    }
                }
                Recipient::Agent(id) if id.as_str() == AgentId::INPROCESS => self.delivered(t, &id, &d),
                Recipient::Agent(id) => {
                    if self.agents.contains_key(&id) {
                        self.delivered(t, &id, &d);
                        self.inboxes.entry(id).or_default().push(d.envelope);
                    } else {
                        self.dropped(t, &d, crate::messaging::DropReason::RecipientGone);
                    }
                }
            }
        }
    }

    fn delivered(&mut self, t: SimTime, to: &AgentId, d: &Delivery) {
        if d.envelope.kind == MessageKind::Heartbeat {
            return;
        }
        self.record(
            t,
            to.as_str(),
            Event::MessageDelivered {
                msg_id: d.envelope.msg_id,
                msg_kind: d.envelope.kind,
            },
        );
    }

    fn dropped(&mut self, t: SimTime, d: &Delivery, reason: crate::messaging::DropReason) {
        self.record(
            t,
            d.envelope.sender.as_str(),
            Event::MessageDropped {
                msg_id: d.envelope.msg_id,
                recipient: d.recipient.label(),
                reason,
            },
        );
    }

    fn deliver_overhear(&mut self, t: SimTime, d: Delivery) {
        let listeners: Vec<Role> = [self.active, self.active.other()]
            .into_iter()
            .filter(|r| self.sup(*r).alive)
            .collect();
        let Some(first) = listeners.first().copied() else {
            self.bus.retry_at(d, t + 1);
            return;
        };
        for role in listeners {
            let next = atc_overhear(self.sup(role), &d.envelope, t);
            *self.sup_mut(role) = next;
        }
        self.record(t, first.to_string(), Event::Overheard { msg_id: d.envelope.msg_id });
    }

    fn supervisor_receive(&mut self, t: SimTime, role: Role, d: &Delivery) {
        match &d.envelope.payload {
            Payload::Heartbeat { .. } => {
                if role == Role::Tracon && d.envelope.sender.as_str() == AgentId::ATC {
                    self.last_atc_heartbeat = t;
                }
            }
            Payload::Escalation { event, .. } => {
                let event = *event;
                self.delivered(t, &role.agent_id(), d);
                self.record(t, role.to_string(), Event::EscalationReceived { event, by: role });
            }
            _ => self.delivered(t, &role.agent_id(), d),
        }
    }

    // step 4

    fn evaluate(&mut self, t: SimTime) -> Result<Vec<(AgentId, StepOutput)>, EngineError> {
        let mut inboxes = std::mem::take(&mut self.inboxes);
        let view = WorldView {
            registry: &self.registry,
            stack: &self.stack,
            heartbeat_s: self.scenario.timeouts.heartbeat_s,
            dt_s: 1,
            divert_reserve_min: self.scenario.traffic.divert_reserve_min,
            blockage_duration_s: self.scenario.causes.blockage_duration_s,
        };
        let mut outputs = Vec::with_capacity(self.agents.len());
        let mut failures = Vec::new();
        for (id, agent) in &self.agents {
            let inbox = inboxes.remove(id).unwrap_or_default();
            match aircraft_step(agent, &inbox, &view, t) {
                Ok(out) => outputs.push((id.clone(), out)),
                Err(e) => failures.push((id.clone(), e.to_string())),
            }
        }
        for (id, detail) in failures {
            self.fault(t, id.as_str(), detail)?;
        }
        Ok(outputs)
    }

    // step 5

    fn commit(&mut self, t: SimTime, outputs: Vec<(AgentId, StepOutput)>) -> Result<(), EngineError> {
        let mut requests: Vec<(AgentId, FlightPhase, Option<String>)> = Vec::new();
        let mut promotions = Vec::new();
        for (id, out) in outputs {
            let StepOutput {
                agent,
                outbound,
                request,
                divert_reason,
                resolved,
                escalated,
            } = out;
            if let Some(a) = agent {
                if a.fuel_remaining_min <= 0.0 && a.phase.is_inbound_airborne() {
                    self.fault(t, id.as_str(), "fuel exhausted".into())?;
                }
                self.agents.insert(id.clone(), a);
            }
            for Outgoing { recipients, payload } in outbound {
                self.send(t, &id, recipients, payload);
            }
            if let Some((ev, mutations)) = resolved {
                if let crate::disturbance::DisturbanceState::Resolved { action, .. } = ev.state {
                    self.record(t, id.as_str(), Event::DisturbanceResolved { event: ev.id, action });
                }
                for m in mutations {
                    match m {
                        Mutation::Promote(who) => promotions.push((ev.raised_at, who)),
                        Mutation::HoldDepartures { until } => {
                            self.hold_departures_until = self.hold_departures_until.max(until)
                        }
                        Mutation::Transition { .. } | Mutation::RestartPath(_) => {}
                    }
                }
            }
            if let Some(ev) = escalated {
                self.record(
                    t,
                    id.as_str(),
                    Event::DisturbanceEscalated {
                        event: ev.id,
                        reason: EscalationReason::Deadline,
                    },
                );
            }
            if let Some(to) = request {
                requests.push((id, to, divert_reason));
            }
        }

        promotion_commit_order(&mut promotions);
        for (_, id) in promotions {
            self.promote(t, &id)?;
        }

        for (id, to) in std::mem::take(&mut self.chaos_requests) {
            requests.push((id, to, None));
        }
        for (id, to, reason) in requests {
            self.transition(t, &id, to, reason)?;
        }

        self.grant_runways(t)?;
        self.issue_clearances(t);
        self.refresh_roles();
        Ok(())
    }

    fn promote(&mut self, t: SimTime, id: &AgentId) -> Result<(), EngineError> {
        if self.queue.promote(id).is_err() {
            return Ok(());
        }
        self.broadcast_queue(t, QueueOp::Promote(id.clone()), id);
        if self.stack.contains(id) {
            let hold = &self.scenario.airspace.holding;
            let (slots, ceiling) = (hold.slots_per_level, self.scenario.airspace.ceiling_ft);
            match self.stack.reposition(id, &self.queue, slots, ceiling) {
                Ok((level, altitude_ft)) => self.record(t, id.as_str(), Event::HoldingJoin { level, altitude_ft }),
                Err(e) => self.fault(t, id.as_str(), e.to_string())?,
            }
        }
        self.stack.reelect_all(&self.queue);
        Ok(())
    }

    /// Publish the authoritative queue after a mutation. The level-0 leader
    /// speaks for the stack when there is one; otherwise the requester does.
    fn broadcast_queue(&mut self, t: SimTime, op: QueueOp, requester: &AgentId) {
        let sender = self
            .stack
            .levels()
            .first()
            .and_then(|l| l.leader.clone())
            .filter(|l| self.agents.contains_key(l))
            .unwrap_or_else(|| requester.clone());
        let recipients: Vec<Recipient> = self
            .agents
            .keys()
            .filter(|k| **k != sender)
            .map(|k| Recipient::Agent(k.clone()))
            .collect();
        if let Some(a) = self.agents.get_mut(&sender) {
            a.local_queue_copy = self.queue.clone();
        }
        self.record(
            t,
            op.target().as_str(),
            Event::QueueMutation {
                op: op.name().into(),
                by: sender.to_string(),
                version: self.queue.version(),
                length: self.queue.len(),
            },
        );
        let payload = Payload::QueueSync {
            op,
            entries: self.queue.entries().to_vec(),
            version: self.queue.version(),
        };
        self.send(t, &sender, recipients, payload);
    }

    fn approach_count(&self) -> usize {
        self.agents.values().filter(|a| a.phase.is_approach()).count()
    }

    fn set_phase(&mut self, t: SimTime, id: &AgentId, to: FlightPhase, dwell: Option<u64>) {
        let dwell = dwell.unwrap_or_else(|| self.scenario.traffic.dwell(to, &mut self.streams.jitter));
        let Some(a) = self.agents.get_mut(id) else { return };
        let from = a.phase;
        a.phase = to;
        a.phase_since = t;
        a.phase_dwell_s = dwell;
        self.record(t, id.as_str(), Event::Phase { from, to });
    }

    fn transition(
        &mut self,
        t: SimTime,
        id: &AgentId,
        to: FlightPhase,
        reason: Option<String>,
    ) -> Result<(), EngineError> {
        use FlightPhase::*;
        let Some(from) = self.agents.get(id).map(|a| a.phase) else {
            return Ok(());
        };
        if !is_legal(from, to) {
            return self.fault(t, id.as_str(), format!("illegal transition {from} -> {to}"));
        }
        match (from, to) {
            (_, Diverted) => self.exit(t, id, Diverted, Some(reason.unwrap_or_else(|| "unspecified".into())))?,
            (ArrivalIntoAirspace, AtEntryGate) => match self.queue.admit(id.clone()) {
                Ok(()) => {
                    self.broadcast_queue(t, QueueOp::Admit(id.clone()), id);
                    self.set_phase(t, id, AtEntryGate, None);
                    self.send(
                        t,
                        &AgentId::inprocess(),
                        vec![Recipient::Agent(id.clone())],
                        Payload::Clearance {
                            grant: ClearanceGrant::Path,
                        },
                    );
                }
                Err(QueueError::BufferFull { .. }) => self.exit(t, id, Diverted, Some("queue_full".into()))?,
                Err(e) => self.fault(t, id.as_str(), e.to_string())?,
            },
            (OnPath | HoldingPattern, ToMeteringFix) => {
                let ok = self.queue.head() == Some(id)
                    && self.approach_count() < self.scenario.airspace.approach_capacity;
                if !ok {
                    if let Some(a) = self.agents.get_mut(id) {
                        a.approach_cleared = false;
                    }
                    if from == OnPath {
                        return self.transition(t, id, HoldingPattern, None);
                    }
                    return Ok(());
                }
                self.queue.remove(id).expect("head is queued");
                self.broadcast_queue(t, QueueOp::Remove(id.clone()), id);
                if from == HoldingPattern {
                    self.leave_stack(t, id)?;
                }
                if let Some(a) = self.agents.get_mut(id) {
                    a.approach_cleared = false;
                }
                self.set_phase(t, id, ToMeteringFix, None);
            }
            (OnPath, HoldingPattern) => {
                let hold = &self.scenario.airspace.holding;
                let (slots, ceiling) = (hold.slots_per_level, self.scenario.airspace.ceiling_ft);
                match self.stack.join(id.clone(), &self.queue, slots, ceiling) {
                    Ok((level, altitude_ft)) => {
                        self.set_phase(t, id, HoldingPattern, None);
                        self.record(t, id.as_str(), Event::HoldingJoin { level, altitude_ft });
                    }
                    Err(_) => self.exit(t, id, Diverted, Some("holding_full".into()))?,
                }
            }
            (FinalDescent, OnRunway) => {
                if !self.runways.has_claim(id) {
                    let traffic = &self.scenario.traffic;
                    let on = traffic.dwell(OnRunway, &mut self.streams.jitter);
                    let back = traffic.dwell(Backtrack, &mut self.streams.jitter);
                    self.planned_landing.insert(id.clone(), (on, back));
                    let candidates: Vec<String> = self
                        .scenario
                        .airspace
                        .runways_for(RunwayMode::Landing)
                        .into_iter()
                        .map(String::from)
                        .collect();
                    let first = candidates.first().cloned().unwrap_or_default();
                    self.runways.enqueue(id.clone(), RunwayMode::Landing, candidates, on + back, t);
                    self.record(
                        t,
                        id.as_str(),
                        Event::RunwayQueued {
                            runway: first,
                            mode: RunwayMode::Landing,
                        },
                    );
                }
            }
            (OnRunway, Backtrack) => {
                let back = self.planned_landing.get(id).map(|p| p.1);
                self.set_phase(t, id, Backtrack, back);
            }
            (OnRunway | Backtrack, Departed) => self.exit(t, id, Departed, None)?,
            _ => self.set_phase(t, id, to, None),
        }
        Ok(())
    }

    fn leave_stack(&mut self, t: SimTime, id: &AgentId) -> Result<(), EngineError> {
        let Some(level) = self.stack.level_of(id) else {
            return Ok(());
        };
        let before = self.stack.levels().len();
        let was_leader = match self.stack.remove(id, &self.queue) {
            Ok(l) => l,
            Err(e) => return self.fault(t, id.as_str(), e.to_string()),
        };
        let shifted = self.stack.levels().len() < before;
        if shifted {
            self.record(t, id.as_str(), Event::LevelShift { removed_level: level });
        }
        if was_leader {
            let successor = if shifted {
                None
            } else {
                self.stack.levels().get(level).and_then(|l| l.leader.clone())
            };
            self.record(
                t,
                id.as_str(),
                Event::Handover {
                    level,
                    successor: successor.as_ref().map(|s| s.to_string()),
                },
            );
            if let Some(s) = successor {
                self.send(
                    t,
                    id,
                    vec![Recipient::Agent(s.clone())],
                    Payload::Handover {
                        level,
                        successor: Some(s),
                    },
                );
            }
        }
        Ok(())
    }

    fn exit(&mut self, t: SimTime, id: &AgentId, to: FlightPhase, reason: Option<String>) -> Result<(), EngineError> {
        if self.queue.contains(id) {
            self.queue.remove(id).expect("queued");
            self.broadcast_queue(t, QueueOp::Remove(id.clone()), id);
        }
        if self.stack.contains(id) {
            self.leave_stack(t, id)?;
        }
        self.runways.withdraw(id);
        self.planned_landing.remove(id);
        let Some(mut agent) = self.agents.remove(id) else {
            return Ok(());
        };
        if let Some(mut ev) = agent.pending_disturbance.take() {
            if ev.is_open() && ev.escalate(t, true).is_ok() {
                self.record(
                    t,
                    id.as_str(),
                    Event::DisturbanceEscalated {
                        event: ev.id,
                        reason: EscalationReason::FlightExited,
                    },
                );
                self.send(
                    t,
                    id,
                    vec![Recipient::ActiveSupervisor],
                    Payload::Escalation {
                        event: ev.id,
                        aircraft: id.clone(),
                        cause: ev.cause,
                    },
                );
            }
        }
        self.record(t, id.as_str(), Event::Phase { from: agent.phase, to });
        match (agent.kind, to) {
            (FlightKind::Arrival, FlightPhase::Departed) => self.counters.arrivals_landed += 1,
            (FlightKind::Arrival, _) => self.counters.arrivals_diverted += 1,
            (FlightKind::Departure, _) => self.counters.departures_departed += 1,
        }
        if let Some(reason) = reason {
            self.record(t, id.as_str(), Event::Divert { reason });
        }
        if self.cleared_head.as_ref().is_some_and(|(h, _)| h == id) {
            self.cleared_head = None;
        }
        self.bus.detach(id);
        self.inboxes.remove(id);
        Ok(())
    }

    fn grant_runways(&mut self, t: SimTime) -> Result<(), EngineError> {
        let hold = t < self.hold_departures_until;
        for g in self.runways.process(t, hold) {
            self.record(
                t,
                g.aircraft.as_str(),
                Event::RunwayGranted {
                    runway: g.runway.clone(),
                    mode: g.mode,
                    start: g.start,
                    until: g.until,
                },
            );
            match g.mode {
                RunwayMode::Landing => {
                    let on = self.planned_landing.get(&g.aircraft).map(|p| p.0);
                    if let Some(a) = self.agents.get_mut(&g.aircraft) {
                        a.runway = Some(g.runway.clone());
                    }
                    self.set_phase(t, &g.aircraft, FlightPhase::OnRunway, on);
                }
                RunwayMode::Takeoff => {
                    let Some(roll) = self.ground.remove(&g.aircraft) else {
                        self.fault(t, g.aircraft.as_str(), "takeoff grant for unknown departure".into())?;
                        continue;
                    };
                    let agent =
                        AircraftAgent::departure(g.aircraft.clone(), t, g.runway.clone(), roll, self.queue.clone());
                    self.bus.attach(g.aircraft.clone());
                    self.agents.insert(g.aircraft.clone(), agent);
                    self.record(t, g.aircraft.as_str(), Event::TakeoffRoll { runway: g.runway });
                }
            }
        }
        Ok(())
    }

    fn issue_clearances(&mut self, t: SimTime) {
        let inproc = AgentId::inprocess();
        let path_due: Vec<AgentId> = self
            .agents
            .values()
            .filter(|a| {
                a.phase == FlightPhase::AtEntryGate
                    && !a.path_cleared
                    && t > a.phase_since
                    && (t - a.phase_since).is_multiple_of(CLEARANCE_RETRY_S)
            })
            .map(|a| a.id.clone())
            .collect();
        for id in path_due {
            self.send(t, &inproc, vec![Recipient::Agent(id)], Payload::Clearance { grant: ClearanceGrant::Path });
        }

        let Some(head) = self.queue.head().cloned() else { return };
        let free = self.approach_count() < self.scenario.airspace.approach_capacity;
        let resend = match &self.cleared_head {
            Some((h, at)) if *h == head => {
                let acted = self.agents.get(&head).is_none_or(|a| a.approach_cleared);
                !acted && t >= at + CLEARANCE_RETRY_S
            }
            _ => true,
        };
        if free && resend {
            self.cleared_head = Some((head.clone(), t));
            self.send(
                t,
                &inproc,
                vec![Recipient::Agent(head)],
                Payload::Clearance {
                    grant: ClearanceGrant::RunwayFree,
                },
            );
        }
    }

    fn refresh_roles(&mut self) {
        for (id, a) in self.agents.iter_mut() {
            a.queue_index = self.queue.position(id);
            a.holding_level = self.stack.level_of(id);
            a.is_leader = self.stack.is_leader(id);
            if let Some(alt) = self.stack.altitude(id) {
                a.altitude_ft = alt;
            }
        }
    }

    // step 6

    fn scan(&mut self, t: SimTime) -> Result<(), EngineError> {
        let radius = self.scenario.airspace.radius_nm;
        let gates = self.scenario.airspace.entry_gates;
        let live: BTreeMap<AgentId, LiveAgent> = self
            .agents
            .iter()
            .map(|(id, a)| {
                (
                    id.clone(),
                    LiveAgent {
                        coordinates: a.coordinates(radius, gates, t),
                        status: a.status(),
                        phase: a.phase,
                    },
                )
            })
            .collect();
        let due = std::mem::take(&mut self.externals_due);
        let out = match inprocess_scan(&live, &self.registry, &due, t) {
            Ok(o) => o,
            Err(e) => return self.fault(t, AgentId::INPROCESS, e.to_string()),
        };
        self.registry = out.registry;
        for id in out.deregistered {
            self.record(t, id.as_str(), Event::DfDeregister {});
        }
        for id in out.registered {
            let phase = live[&id].phase;
            self.record(t, id.as_str(), Event::DfRegister { phase });
        }
        let inproc = AgentId::inprocess();
        for (rec, _) in out.external {
            self.record(
                t,
                AgentId::INPROCESS,
                Event::ExternalInput {
                    source: rec.source,
                    record: rec.record.clone(),
                },
            );
            let to = match &rec.target {
                Some(id) if self.agents.contains_key(id) => Recipient::Agent(id.clone()),
                _ => Recipient::ActiveSupervisor,
            };
            self.send(
                t,
                &inproc,
                vec![to],
                Payload::ExternalInput {
                    source: rec.source,
                    record: rec.record,
                },
            );
        }
        Ok(())
    }

    // step 7

    fn supervise(&mut self, t: SimTime) {
        let hb = self.scenario.timeouts.heartbeat_s;
        if self.atc.alive && t.is_multiple_of(hb) {
            self.send(
                t,
                &AgentId::atc(),
                vec![Recipient::Agent(AgentId::tracon())],
                Payload::Heartbeat { phase: None },
            );
        }
        let gap = t.saturating_sub(self.last_atc_heartbeat);
        match tracon_failover(&self.atc, &self.tracon, self.active, gap, self.scenario.timeouts.failover_s) {
            Ok(o) => {
                self.atc = o.atc;
                self.tracon = o.tracon;
                self.active = o.active;
                self.in_gap = false;
                match o.switch {
                    Some(Switch::Failover) => self.record(t, "TRACON", Event::Failover { to: o.active }),
                    Some(Switch::Failback) => self.record(t, "ATC", Event::Failback { to: o.active }),
                    None => {}
                }
            }
            Err(_) => {
                if !self.in_gap {
                    self.in_gap = true;
                    self.record(t, "supervision", Event::SupervisionGap {});
                }
            }
        }
    }

    // step 8

    fn check_invariants(&mut self, t: SimTime) -> Result<(), EngineError> {
        if let Some(detail) = self.find_violation(t) {
            self.fault(t, "engine", detail)?;
        }
        Ok(())
    }

    fn find_violation(&self, t: SimTime) -> Option<String> {
        let cap = self.queue.capacity();
        if self.queue.len() > cap {
            return Some(format!("landing queue length {} exceeds {cap}", self.queue.len()));
        }
        for a in self.agents.values() {
            if a.local_queue_copy.len() > cap {
                return Some(format!("replica at {} exceeds capacity", a.id));
            }
        }
        for s in [&self.atc, &self.tracon] {
            if s.mirrored_queue.len() > cap {
                return Some(format!("{} mirror exceeds capacity", s.role));
            }
        }
        if let Err(e) = self.stack.check(&self.queue) {
            return Some(format!("holding stack: {e}"));
        }
        for a in self.agents.values() {
            let holding = a.phase == FlightPhase::HoldingPattern;
            if holding != self.stack.contains(&a.id) {
                return Some(format!("{} in {} but stack membership is {}", a.id, a.phase, !holding));
            }
            let queued_phase = matches!(
                a.phase,
                FlightPhase::AtEntryGate | FlightPhase::OnPath | FlightPhase::HoldingPattern
            );
            if queued_phase != self.queue.contains(&a.id) {
                return Some(format!("{} in {} disagrees with landing-queue membership", a.id, a.phase));
            }
        }
        let approach = self.approach_count();
        if approach > self.scenario.airspace.approach_capacity {
            return Some(format!("{approach} aircraft on approach"));
        }
        let runways: Vec<String> = self.runways.runways().iter().map(|r| r.id.clone()).collect();
        for r in &runways {
            if let Some(a) = self.runways.occupant(r, t) {
                for c in self.runways.conflict_set(r).into_iter().skip(1) {
                    if let Some(b) = self.runways.occupant(c, t) {
                        return Some(format!("runways {r} ({a}) and {c} ({b}) occupied together"));
                    }
                }
            }
        }
        let c = self.counters;
        let arrivals = self.agents.values().filter(|a| a.kind == FlightKind::Arrival).count() as u64;
        let departures = self.agents.len() as u64 - arrivals + self.ground.len() as u64;
        if c.arrivals_admitted != c.arrivals_landed + c.arrivals_diverted + arrivals {
            return Some("arrival conservation broken".into());
        }
        if c.departures_admitted != c.departures_departed + departures {
            return Some("departure conservation broken".into());
        }
        if self.registry.len() != self.agents.len() || !self.registry.ids().eq(self.agents.keys()) {
            return Some("DF registry out of step with live agents".into());
        }
        None
    }
}

/// Run one seed to completion, or until a strict-mode violation.
pub fn run(scenario: &ScenarioFile, seed: u64) -> RunOutcome {
    let mut engine = Engine::new(scenario, seed);
    while !engine.is_done() {
        if let Err(e) = engine.step() {
            return RunOutcome {
                seed,
                log: engine.into_log(),
                error: Some(e),
            };
        }
    }
    engine.finish();
    RunOutcome {
        seed,
        log: engine.into_log(),
        error: None,
    }
}
