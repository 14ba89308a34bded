use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of any agent on the bus: aircraft, supervisors, DF, InProcess.
///
/// Ordering is lexicographic, which is the tie-break order for the landing
/// queue and for agent evaluation within a step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub const ATC: &'static str = "ATC";
    pub const TRACON: &'static str = "TRACON";
    pub const DF: &'static str = "DF";
    pub const INPROCESS: &'static str = "INPROC";

    pub fn new(id: impl Into<String>) -> Self {
        AgentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn atc() -> Self {
        AgentId::new(Self::ATC)
    }

    pub fn tracon() -> Self {
        AgentId::new(Self::TRACON)
    }

    pub fn df() -> Self {
        AgentId::new(Self::DF)
    }

    pub fn inprocess() -> Self {
        AgentId::new(Self::INPROCESS)
    }

    pub fn is_supervisor(&self) -> bool {
        self.0 == Self::ATC || self.0 == Self::TRACON
    }

    /// Ids reserved for non-aircraft agents.
    pub fn is_reserved(id: &str) -> bool {
        matches!(id, Self::ATC | Self::TRACON | Self::DF | Self::INPROCESS)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId::new(s)
    }
}

impl Borrow<str> for AgentId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Unique message id within a run. Allocation order equals send order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MsgId(pub u64);

impl fmt::Display for MsgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

/// Disturbance event id within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u64);

/// Simulation time in whole seconds since run start.
pub type SimTime = u64;
