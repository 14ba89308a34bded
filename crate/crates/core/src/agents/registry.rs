//! Runtime Directory Facilitator: who is alive, where, and in which phase.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Coordinates;
use crate::ids::{AgentId, SimTime};
use crate::phase::FlightPhase;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("agent {0} not registered")]
    NotFound(AgentId),
}

/// Coarse state token published alongside the phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Nominal,
    Leader,
    Disturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfEntry {
    pub coordinates: Coordinates,
    pub state: AgentStatus,
    pub phase: FlightPhase,
    pub last_update: SimTime,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DfRegistry {
    entries: BTreeMap<AgentId, DfEntry>,
}

impl DfRegistry {
    pub fn new() -> Self {
        DfRegistry::default()
    }

    /// Insert or overwrite. Returns `true` when the agent was not registered before.
    pub fn register(
        &mut self,
        id: AgentId,
        coordinates: Coordinates,
        state: AgentStatus,
        phase: FlightPhase,
        t: SimTime,
    ) -> bool {
        self.entries
            .insert(
                id,
                DfEntry {
                    coordinates,
                    state,
                    phase,
                    last_update: t,
                },
            )
            .is_none()
    }

    pub fn deregister(&mut self, id: &AgentId) -> Result<DfEntry, RegistryError> {
        self.entries
            .remove(id)
            .ok_or_else(|| RegistryError::NotFound(id.clone()))
    }

    pub fn get(&self, id: &AgentId) -> Result<&DfEntry, RegistryError> {
        self.entries
            .get(id)
            .ok_or_else(|| RegistryError::NotFound(id.clone()))
    }

    /// Refresh `last_update` on a heartbeat.
    pub fn touch(&mut self, id: &AgentId, t: SimTime) -> Result<(), RegistryError> {
        let e = self
            .entries
            .get_mut(id)
            .ok_or_else(|| RegistryError::NotFound(id.clone()))?;
        e.last_update = e.last_update.max(t);
        Ok(())
    }

    pub fn contains(&self, id: &AgentId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &AgentId> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AgentId, &DfEntry)> {
        self.entries.iter()
    }

    /// Registered agents currently in `phase`, in id order.
    pub fn in_phase(&self, phase: FlightPhase) -> Vec<AgentId> {
        self.entries
            .iter()
            .filter(|(_, e)| e.phase == phase)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Count of registered agents in any phase satisfying `pred`.
    pub fn count_where(&self, pred: impl Fn(FlightPhase) -> bool) -> usize {
        self.entries.values().filter(|e| pred(e.phase)).count()
    }
}
