//! Flight phases and the legal transition graph.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Phase of flight an aircraft agent is in.
///
/// The first nine variants are the operational phases of an arrival in the
/// airport vicinity. `Departed` and `Diverted` are simulator lifecycle states:
/// an agent in either has left the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlightPhase {
    ArrivalIntoAirspace,
    AtEntryGate,
    OnPath,
    HoldingPattern,
    ToMeteringFix,
    AtMeteringFix,
    FinalDescent,
    OnRunway,
    Backtrack,
    Departed,
    Diverted,
}

impl FlightPhase {
    pub const ALL: [FlightPhase; 11] = [
        FlightPhase::ArrivalIntoAirspace,
        FlightPhase::AtEntryGate,
        FlightPhase::OnPath,
        FlightPhase::HoldingPattern,
        FlightPhase::ToMeteringFix,
        FlightPhase::AtMeteringFix,
        FlightPhase::FinalDescent,
        FlightPhase::OnRunway,
        FlightPhase::Backtrack,
        FlightPhase::Departed,
        FlightPhase::Diverted,
    ];

    /// Agent has left the simulation.
    pub fn is_terminal(self) -> bool {
        matches!(self, FlightPhase::Departed | FlightPhase::Diverted)
    }

    /// Airborne inbound phases that still burn holding fuel.
    pub fn is_inbound_airborne(self) -> bool {
        matches!(
            self,
            FlightPhase::ArrivalIntoAirspace
                | FlightPhase::AtEntryGate
                | FlightPhase::OnPath
                | FlightPhase::HoldingPattern
                | FlightPhase::ToMeteringFix
                | FlightPhase::AtMeteringFix
                | FlightPhase::FinalDescent
        )
    }

    /// Phases between release from the landing queue and touchdown.
    pub fn is_approach(self) -> bool {
        matches!(
            self,
            FlightPhase::ToMeteringFix | FlightPhase::AtMeteringFix | FlightPhase::FinalDescent
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            FlightPhase::ArrivalIntoAirspace => "ArrivalIntoAirspace",
            FlightPhase::AtEntryGate => "AtEntryGate",
            FlightPhase::OnPath => "OnPath",
            FlightPhase::HoldingPattern => "HoldingPattern",
            FlightPhase::ToMeteringFix => "ToMeteringFix",
            FlightPhase::AtMeteringFix => "AtMeteringFix",
            FlightPhase::FinalDescent => "FinalDescent",
            FlightPhase::OnRunway => "OnRunway",
            FlightPhase::Backtrack => "Backtrack",
            FlightPhase::Departed => "Departed",
            FlightPhase::Diverted => "Diverted",
        }
    }
}

impl fmt::Display for FlightPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether an aircraft is inbound to land or outbound after takeoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlightKind {
    Arrival,
    Departure,
}

const FORWARD_EDGES: [(FlightPhase, FlightPhase); 11] = {
    use FlightPhase::*;
    [
        (ArrivalIntoAirspace, AtEntryGate),
        (AtEntryGate, OnPath),
        (OnPath, HoldingPattern),
        (OnPath, ToMeteringFix),
        (HoldingPattern, ToMeteringFix),
        (ToMeteringFix, AtMeteringFix),
        (AtMeteringFix, FinalDescent),
        (FinalDescent, OnRunway),
        (OnRunway, Backtrack),
        (Backtrack, Departed),
        // takeoff climb-out
        (OnRunway, Departed),
    ]
};

/// The full set of legal phase transitions.
pub fn legal_transitions() -> BTreeSet<(FlightPhase, FlightPhase)> {
    let mut edges: BTreeSet<_> = FORWARD_EDGES.iter().copied().collect();
    for from in FlightPhase::ALL {
        if !matches!(
            from,
            FlightPhase::OnRunway | FlightPhase::Backtrack | FlightPhase::Departed | FlightPhase::Diverted
        ) {
            edges.insert((from, FlightPhase::Diverted));
        }
    }
    edges
}

/// Cheap membership test equivalent to `legal_transitions().contains(&(from, to))`.
pub fn is_legal(from: FlightPhase, to: FlightPhase) -> bool {
    if to == FlightPhase::Diverted {
        return !matches!(
            from,
            FlightPhase::OnRunway | FlightPhase::Backtrack | FlightPhase::Departed | FlightPhase::Diverted
        );
    }
    FORWARD_EDGES.contains(&(from, to))
}
