//! Runway occupancy with crossing-runway exclusion.
//!
//! A runway is usable at `now` when neither it nor any runway crossing it is
//! occupied or blocked, and its previous use started at least `separation_s`
//! earlier. Waiting claims are served first-come first-served with landings
//! ahead of takeoffs; a takeoff is held back while a landing that conflicts
//! with its runway is still waiting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{RunwayConfig, RunwayMode};
use crate::ids::{AgentId, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunwayClaim {
    pub aircraft: AgentId,
    pub mode: RunwayMode,
    /// Acceptable runways, in preference order.
    pub candidates: Vec<String>,
    pub requested_at: SimTime,
    pub duration_s: u64,
    seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grant {
    pub aircraft: AgentId,
    pub runway: String,
    pub mode: RunwayMode,
    pub start: SimTime,
    pub until: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClaimOutcome {
    Granted(Grant),
    Queued,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Occupancy {
    aircraft: AgentId,
    until: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunwayBoard {
    runways: Vec<RunwayConfig>,
    separation_s: u64,
    occupied: BTreeMap<String, Occupancy>,
    last_start: BTreeMap<String, SimTime>,
    blocked_until: BTreeMap<String, SimTime>,
    pending: Vec<RunwayClaim>,
    seq: u64,
}

impl RunwayBoard {
    pub fn new(runways: Vec<RunwayConfig>, separation_s: u64) -> Self {
        RunwayBoard {
            runways,
            separation_s,
            occupied: BTreeMap::new(),
            last_start: BTreeMap::new(),
            blocked_until: BTreeMap::new(),
            pending: Vec::new(),
            seq: 0,
        }
    }

    pub fn runways(&self) -> &[RunwayConfig] {
        &self.runways
    }

    /// `runway` itself followed by every runway it crosses.
    pub fn conflict_set<'a>(&'a self, runway: &'a str) -> Vec<&'a str> {
        let mut set = vec![runway];
        if let Some(cfg) = self.runways.iter().find(|r| r.id == runway) {
            set.extend(cfg.crosses.iter().map(String::as_str));
        }
        set
    }

    fn conflicts(&self, a: &str, b: &str) -> bool {
        self.conflict_set(a).contains(&b)
    }

    pub fn occupant(&self, runway: &str, now: SimTime) -> Option<&AgentId> {
        self.occupied
            .get(runway)
            .filter(|o| o.until > now)
            .map(|o| &o.aircraft)
    }

    pub fn is_blocked(&self, runway: &str, now: SimTime) -> bool {
        self.blocked_until.get(runway).is_some_and(|u| *u > now)
    }

    pub fn is_free(&self, runway: &str, now: SimTime) -> bool {
        let clear = self
            .conflict_set(runway)
            .into_iter()
            .all(|r| self.occupant(r, now).is_none() && !self.is_blocked(r, now));
        let spaced = self
            .last_start
            .get(runway)
            .is_none_or(|s| now >= s + self.separation_s);
        clear && spaced
    }

    /// Close `runway` (and, through the conflict check, its crossings) until `until`.
    pub fn block(&mut self, runway: &str, until: SimTime) {
        let e = self.blocked_until.entry(runway.to_string()).or_insert(0);
        *e = (*e).max(until);
    }

    pub fn pending(&self) -> &[RunwayClaim] {
        &self.pending
    }

    pub fn has_claim(&self, aircraft: &AgentId) -> bool {
        self.pending.iter().any(|c| &c.aircraft == aircraft)
    }

    pub fn withdraw(&mut self, aircraft: &AgentId) {
        self.pending.retain(|c| &c.aircraft != aircraft);
    }

    /// Queue a claim without trying to grant it.
    pub fn enqueue(
        &mut self,
        aircraft: AgentId,
        mode: RunwayMode,
        candidates: Vec<String>,
        duration_s: u64,
        now: SimTime,
    ) {
        self.seq += 1;
        self.pending.push(RunwayClaim {
            aircraft,
            mode,
            candidates,
            requested_at: now,
            duration_s,
            seq: self.seq,
        });
    }

    /// Request one specific runway and resolve immediately.
    pub fn claim_runway(
        &mut self,
        runway: &str,
        aircraft: AgentId,
        mode: RunwayMode,
        duration_s: u64,
        now: SimTime,
    ) -> ClaimOutcome {
        self.enqueue(aircraft.clone(), mode, vec![runway.to_string()], duration_s, now);
        self.process(now, false)
            .into_iter()
            .find(|g| g.aircraft == aircraft)
            .map_or(ClaimOutcome::Queued, ClaimOutcome::Granted)
    }

    /// Grant every waiting claim that can start at `now`.
    pub fn process(&mut self, now: SimTime, hold_takeoffs: bool) -> Vec<Grant> {
        let mut claims = std::mem::take(&mut self.pending);
        claims.sort_by_key(|c| (c.mode != RunwayMode::Landing, c.requested_at, c.seq));
        let mut grants = Vec::new();
        let mut waiting: Vec<RunwayClaim> = Vec::new();
        for c in claims {
            if c.mode == RunwayMode::Takeoff && hold_takeoffs {
                waiting.push(c);
                continue;
            }
            let pick = c.candidates.iter().find(|r| {
                self.is_free(r, now)
                    && (c.mode == RunwayMode::Landing
                        || !waiting.iter().any(|w| {
                            w.mode == RunwayMode::Landing && w.candidates.iter().any(|l| self.conflicts(r, l))
                        }))
            });
            match pick.cloned() {
                Some(r) => {
                    let until = now + c.duration_s;
                    self.occupied.insert(
                        r.clone(),
                        Occupancy {
                            aircraft: c.aircraft.clone(),
                            until,
                        },
                    );
                    self.last_start.insert(r.clone(), now);
                    grants.push(Grant {
                        aircraft: c.aircraft,
                        runway: r,
                        mode: c.mode,
                        start: now,
                        until,
                    });
                }
                None => waiting.push(c),
            }
        }
        waiting.sort_by_key(|c| c.seq);
        self.pending = waiting;
        grants
    }
}
