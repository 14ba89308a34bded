//! Versioned TOML scenario files.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::inprocess::{parse_external, ExternalRecord};
use crate::agents::supervisor::Role;
use crate::config::{AirspaceConfig, Timeouts};
use crate::disturbance::{field_name, Cause, CauseModel};
use crate::engine::traffic::TrafficModel;
use crate::ids::{AgentId, SimTime};
use crate::messaging::{ExternalSource, NetworkModel};
use crate::phase::FlightPhase;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChaosFault {
    /// Force an illegal phase transition request for the target.
    IllegalTransition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptedEvent {
    Arrival {
        time_s: SimTime,
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fuel_min: Option<f64>,
    },
    SupervisorKill {
        time_s: SimTime,
        role: Role,
        duration_s: u64,
    },
    External {
        time_s: SimTime,
        source: ExternalSource,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        record: String,
    },
    /// Deliberate fault injection for testing strict mode.
    Chaos {
        time_s: SimTime,
        fault: ChaosFault,
        /// Aircraft to hit; the lowest live id when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        /// Only fire for these seeds; every seed when empty.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        seeds: Vec<u64>,
    },
}

impl ScriptedEvent {
    pub fn time_s(&self) -> SimTime {
        match self {
            ScriptedEvent::Arrival { time_s, .. }
            | ScriptedEvent::SupervisorKill { time_s, .. }
            | ScriptedEvent::External { time_s, .. }
            | ScriptedEvent::Chaos { time_s, .. } => *time_s,
        }
    }

    pub fn as_external(&self) -> Option<ExternalRecord> {
        match self {
            ScriptedEvent::External {
                time_s,
                source,
                target,
                record,
            } => Some(ExternalRecord {
                time_s: *time_s,
                source: *source,
                target: target.as_deref().map(AgentId::from),
                record: record.clone(),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    #[serde(default)]
    pub name: String,
    pub duration_hr: f64,
    #[serde(default)]
    pub strict_mode: bool,
    #[serde(default)]
    pub airspace: AirspaceConfig,
    #[serde(default)]
    pub traffic: TrafficModel,
    #[serde(default)]
    pub causes: CauseModel,
    #[serde(default)]
    pub network: NetworkModel,
    #[serde(default)]
    pub timeouts: Timeouts,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scripted: Vec<ScriptedEvent>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no scenario file or bundled scenario named {0:?}")]
    NotFound(String),
}

/// Generated flight ids look like `ARR0001` / `DEP0001`; scripted ids must not.
pub fn is_generated_id(id: &str) -> bool {
    ["ARR", "DEP"].iter().any(|p| {
        id.strip_prefix(p)
            .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl ScenarioFile {
    /// A minimal valid scenario: one landing runway crossing one takeoff runway.
    pub fn minimal(duration_hr: f64) -> Self {
        use crate::config::{RunwayConfig, RunwayMode};
        ScenarioFile {
            format_version: FORMAT_VERSION,
            name: "minimal".into(),
            duration_hr,
            strict_mode: false,
            airspace: AirspaceConfig {
                runways: vec![
                    RunwayConfig {
                        id: "27".into(),
                        mode: RunwayMode::Landing,
                        crosses: vec!["14".into()],
                    },
                    RunwayConfig {
                        id: "14".into(),
                        mode: RunwayMode::Takeoff,
                        crosses: vec!["27".into()],
                    },
                ],
                ..AirspaceConfig::default()
            },
            traffic: TrafficModel::default(),
            causes: CauseModel::default(),
            network: NetworkModel::default(),
            timeouts: Timeouts::default(),
            scripted: Vec::new(),
        }
    }

    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let s: ScenarioFile = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |r| line_col(text, r.start));
            ScenarioError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        s.validate().map_err(ScenarioError::Invalid)?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Load from a path, falling back to a bundled scenario of that name.
    pub fn resolve(spec: &str) -> Result<Self, ScenarioError> {
        let path = Path::new(spec);
        if path.exists() {
            return Self::load(path);
        }
        match bundled_text(spec) {
            Some(text) => Self::parse(text),
            None => Err(ScenarioError::NotFound(spec.to_string())),
        }
    }

    /// Canonical serialization; also the input to [`ScenarioFile::hash`].
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn duration_s(&self) -> u64 {
        (self.duration_hr * 3600.0).round() as u64
    }

    /// Every problem in the file, each prefixed with its field path.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.format_version != FORMAT_VERSION {
            errs.push(format!(
                "format_version: {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            ));
        }
        if !(self.duration_hr.is_finite() && self.duration_hr > 0.0 && self.duration_hr <= 24.0 * 30.0) {
            errs.push(format!("duration_hr: {} must be in (0, 720]", self.duration_hr));
        } else if self.duration_s() == 0 {
            errs.push("duration_hr: rounds to zero seconds".into());
        }
        self.airspace.validate(&mut errs);
        self.traffic.validate(&mut errs);
        self.causes.validate(&mut errs);
        for c in Cause::ALL {
            for p in &self.causes.spec(c).phases {
                let ok = match c {
                    Cause::RunwayBlockage => matches!(p, FlightPhase::OnRunway | FlightPhase::Backtrack),
                    _ => !p.is_terminal() && *p != FlightPhase::ArrivalIntoAirspace,
                };
                if !ok {
                    errs.push(format!("causes.{}.phases: {p} is not an eligible phase", field_name(c)));
                }
            }
        }
        self.network.validate(&mut errs);
        self.timeouts.validate(&mut errs);
        self.validate_scripted(&mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    fn validate_scripted(&self, errs: &mut Vec<String>) {
        let end = self.duration_s();
        let mut ids = BTreeSet::new();
        for (i, ev) in self.scripted.iter().enumerate() {
            let at = format!("scripted[{i}]");
            if ev.time_s() >= end {
                errs.push(format!("{at}.time_s: {} is not before the run end ({end} s)", ev.time_s()));
            }
            match ev {
                ScriptedEvent::Arrival { id, fuel_min, .. } => {
                    if id.is_empty() || id.contains(char::is_whitespace) {
                        errs.push(format!("{at}.id: {id:?} must be a non-empty token"));
                    } else if AgentId::is_reserved(id) || is_generated_id(id) {
                        errs.push(format!("{at}.id: {id:?} clashes with a reserved or generated id"));
                    } else if !ids.insert(id.clone()) {
                        errs.push(format!("{at}.id: duplicate id {id:?}"));
                    }
                    if let Some(f) = fuel_min {
                        if !(f.is_finite() && *f > 0.0) {
                            errs.push(format!("{at}.fuel_min: {f} must be positive"));
                        }
                    }
                }
                ScriptedEvent::SupervisorKill { duration_s, .. } => {
                    if *duration_s == 0 {
                        errs.push(format!("{at}.duration_s: must be positive"));
                    }
                }
                ScriptedEvent::External {
                    source, record, target, ..
                } => {
                    if let Err(e) = parse_external(*source, record) {
                        errs.push(format!("{at}.record: {e}"));
                    }
                    if target.as_deref().is_some_and(str::is_empty) {
                        errs.push(format!("{at}.target: must not be empty"));
                    }
                }
                ScriptedEvent::Chaos { target, .. } => {
                    if target.as_deref().is_some_and(str::is_empty) {
                        errs.push(format!("{at}.target: must not be empty"));
                    }
                }
            }
        }
    }
}

const BUNDLED: [(&str, &str); 4] = [
    ("mumbai", include_str!("../scenarios/mumbai.scenario")),
    ("parallel", include_str!("../scenarios/parallel.scenario")),
    ("stress", include_str!("../scenarios/stress.scenario")),
    ("drill", include_str!("../scenarios/drill.scenario")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled_text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn bundled(name: &str) -> Option<ScenarioFile> {
    bundled_text(name).map(|t| ScenarioFile::parse(t).expect("bundled scenario is valid"))
}
