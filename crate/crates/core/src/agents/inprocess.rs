//! InProcess interfacing agent: keeps the DF registry in step with the live
//! agent set and injects scripted external-system records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::registry::{AgentStatus, DfRegistry};
use crate::config::Coordinates;
use crate::ids::{AgentId, SimTime};
use crate::messaging::ExternalSource;
use crate::phase::FlightPhase;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed {source_name} record {record:?}: {reason}")]
pub struct MalformedExternalRecord {
    pub source_name: String,
    pub record: String,
    pub reason: String,
}

/// A scripted record from FMS, URET or SMR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalRecord {
    pub time_s: SimTime,
    pub source: ExternalSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<AgentId>,
    pub record: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExternalCommand {
    /// Lengthen the target's current arrival path by this many seconds.
    RouteAmend { extra_s: u64 },
    /// Free-text advisory; logged only.
    Advisory(String),
    /// Surface status report for one runway; logged only.
    Surface { runway: String, status: String },
}

/// Parse a record body. Grammar per source:
/// FMS `ROUTE_AMEND <seconds>`, URET `ADVISORY <text>`, SMR `SURFACE <runway> <status>`.
pub fn parse_external(source: ExternalSource, record: &str) -> Result<ExternalCommand, MalformedExternalRecord> {
    let bad = |reason: &str| MalformedExternalRecord {
        source_name: format!("{source:?}").to_uppercase(),
        record: record.to_string(),
        reason: reason.to_string(),
    };
    let mut words = record.split_whitespace();
    let head = words.next().ok_or_else(|| bad("empty record"))?;
    match (source, head) {
        (ExternalSource::Fms, "ROUTE_AMEND") => {
            let n = words.next().ok_or_else(|| bad("missing seconds"))?;
            let extra_s = n
                .trim_start_matches('+')
                .parse::<u64>()
                .map_err(|_| bad("seconds must be a non-negative integer"))?;
            if words.next().is_some() {
                return Err(bad("trailing fields"));
            }
            Ok(ExternalCommand::RouteAmend { extra_s })
        }
        (ExternalSource::Uret, "ADVISORY") => {
            let text: Vec<&str> = words.collect();
            if text.is_empty() {
                return Err(bad("missing advisory text"));
            }
            Ok(ExternalCommand::Advisory(text.join(" ")))
        }
        (ExternalSource::Smr, "SURFACE") => {
            let runway = words.next().ok_or_else(|| bad("missing runway"))?;
            let status = words.next().ok_or_else(|| bad("missing status"))?;
            if words.next().is_some() {
                return Err(bad("trailing fields"));
            }
            Ok(ExternalCommand::Surface {
                runway: runway.to_string(),
                status: status.to_string(),
            })
        }
        _ => Err(bad("unknown record type for this source")),
    }
}

/// What the scanner needs to know about one live aircraft.
#[derive(Debug, Clone, PartialEq)]
pub struct LiveAgent {
    pub coordinates: Coordinates,
    pub status: AgentStatus,
    pub phase: FlightPhase,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanOutcome {
    pub registry: DfRegistry,
    pub registered: Vec<AgentId>,
    pub deregistered: Vec<AgentId>,
    pub external: Vec<(ExternalRecord, ExternalCommand)>,
}

/// Reconcile the registry with the live agent set and parse the external
/// records due now. Any malformed record rejects the whole scan before the
/// registry changes.
pub fn inprocess_scan(
    live: &BTreeMap<AgentId, LiveAgent>,
    registry: &DfRegistry,
    due: &[ExternalRecord],
    t: SimTime,
) -> Result<ScanOutcome, MalformedExternalRecord> {
    let mut external = Vec::with_capacity(due.len());
    for rec in due {
        external.push((rec.clone(), parse_external(rec.source, &rec.record)?));
    }
    let mut out = ScanOutcome {
        registry: registry.clone(),
        external,
        ..ScanOutcome::default()
    };
    let gone: Vec<AgentId> = registry.ids().filter(|id| !live.contains_key(*id)).cloned().collect();
    for id in gone {
        out.registry.deregister(&id).expect("listed from the registry");
        out.deregistered.push(id);
    }
    for (id, a) in live {
        if out.registry.register(id.clone(), a.coordinates, a.status, a.phase, t) {
            out.registered.push(id.clone());
        }
    }
    Ok(out)
}
