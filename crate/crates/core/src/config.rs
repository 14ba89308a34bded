//! Airspace and runway configuration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunwayMode {
    Landing,
    Takeoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunwayConfig {
    pub id: String,
    pub mode: RunwayMode,
    /// Runways sharing a physical intersection with this one.
    #[serde(default)]
    pub crosses: Vec<String>,
}

/// Fixed-width altitude bands used to group holding aircraft into levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoldingBands {
    pub base_altitude_ft: u32,
    pub band_width_ft: u32,
    /// Soft limit on members before a new holder opens the next level up.
    pub slots_per_level: usize,
}

impl Default for HoldingBands {
    fn default() -> Self {
        HoldingBands {
            base_altitude_ft: 7000,
            band_width_ft: 1000,
            slots_per_level: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirspaceConfig {
    pub radius_nm: f64,
    pub ceiling_ft: u32,
    /// Allows `radius_nm` outside the terminal-area range of 30..=50 nm.
    pub allow_radius_override: bool,
    pub runways: Vec<RunwayConfig>,
    pub queue_capacity: usize,
    pub entry_gates: u32,
    pub holding: HoldingBands,
    /// Minimum seconds between the starts of successive uses of one runway.
    pub separation_s: u64,
    /// Aircraft allowed between queue release and touchdown at once.
    pub approach_capacity: usize,
}

impl Default for AirspaceConfig {
    fn default() -> Self {
        AirspaceConfig {
            radius_nm: 40.0,
            ceiling_ft: 18_000,
            allow_radius_override: false,
            runways: Vec::new(),
            queue_capacity: 12,
            entry_gates: 4,
            holding: HoldingBands::default(),
            separation_s: 90,
            approach_capacity: 3,
        }
    }
}

impl AirspaceConfig {
    pub fn runway(&self, id: &str) -> Option<&RunwayConfig> {
        self.runways.iter().find(|r| r.id == id)
    }

    /// Runway ids with the given mode, in declaration order.
    pub fn runways_for(&self, mode: RunwayMode) -> Vec<&str> {
        self.runways
            .iter()
            .filter(|r| r.mode == mode)
            .map(|r| r.id.as_str())
            .collect()
    }

    /// Appends one message per violated constraint, each prefixed with its field path.
    pub fn validate(&self, errors: &mut Vec<String>) {
        if !self.radius_nm.is_finite() || self.radius_nm <= 0.0 {
            errors.push(format!("airspace.radius_nm: must be positive, got {}", self.radius_nm));
        } else if !self.allow_radius_override && !(30.0..=50.0).contains(&self.radius_nm) {
            errors.push(format!(
                "airspace.radius_nm: {} outside 30..=50 nm (set allow_radius_override to permit)",
                self.radius_nm
            ));
        }
        if self.ceiling_ft <= self.holding.base_altitude_ft {
            errors.push(format!(
                "airspace.ceiling_ft: {} must exceed holding.base_altitude_ft {}",
                self.ceiling_ft, self.holding.base_altitude_ft
            ));
        }
        if self.queue_capacity == 0 {
            errors.push("airspace.queue_capacity: must be positive".into());
        }
        if self.entry_gates == 0 {
            errors.push("airspace.entry_gates: must be positive".into());
        }
        if self.holding.band_width_ft == 0 {
            errors.push("airspace.holding.band_width_ft: must be positive".into());
        }
        if self.holding.slots_per_level == 0 {
            errors.push("airspace.holding.slots_per_level: must be positive".into());
        }
        if self.approach_capacity == 0 {
            errors.push("airspace.approach_capacity: must be positive".into());
        }
        if self.runways.is_empty() {
            errors.push("airspace.runways: at least one runway is required".into());
        }
        let mut seen = BTreeMap::new();
        for (i, rw) in self.runways.iter().enumerate() {
            if rw.id.is_empty() {
                errors.push(format!("airspace.runways[{i}].id: must not be empty"));
            }
            if seen.insert(rw.id.as_str(), i).is_some() {
                errors.push(format!("airspace.runways[{i}].id: duplicate runway id {:?}", rw.id));
            }
        }
        for (i, rw) in self.runways.iter().enumerate() {
            for other in &rw.crosses {
                match self.runway(other) {
                    None => errors.push(format!(
                        "airspace.runways[{i}].crosses: unknown runway id {other:?}"
                    )),
                    Some(o) if o.id == rw.id => errors.push(format!(
                        "airspace.runways[{i}].crosses: runway {:?} cannot cross itself",
                        rw.id
                    )),
                    Some(o) if !o.crosses.contains(&rw.id) => errors.push(format!(
                        "airspace.runways[{i}].crosses: {:?} crosses {other:?} but not vice versa",
                        rw.id
                    )),
                    Some(_) => {}
                }
            }
        }
        if !self.runways.is_empty() {
            if self.runways_for(RunwayMode::Landing).is_empty() {
                errors.push("airspace.runways: no runway with mode \"landing\"".into());
            }
            if self.runways_for(RunwayMode::Takeoff).is_empty() {
                errors.push("airspace.runways: no runway with mode \"takeoff\"".into());
            }
        }
    }
}

/// Liveness and escalation timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timeouts {
    pub heartbeat_s: u64,
    pub failover_s: u64,
    pub escalation_s: u64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Timeouts {
            heartbeat_s: 5,
            failover_s: 30,
            escalation_s: 120,
        }
    }
}

impl Timeouts {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.heartbeat_s == 0 {
            errors.push("timeouts.heartbeat_s: must be positive".into());
        }
        if self.failover_s <= self.heartbeat_s {
            errors.push(format!(
                "timeouts.failover_s: {} must exceed heartbeat_s {}",
                self.failover_s, self.heartbeat_s
            ));
        }
    }
}

/// Position published in the DF registry: polar offset from the airport reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub range_nm: f64,
    pub bearing_deg: f64,
    pub altitude_ft: u32,
}

impl Coordinates {
    pub const GROUND: Coordinates = Coordinates {
        range_nm: 0.0,
        bearing_deg: 0.0,
        altitude_ft: 0,
    };
}

/// Holder of a runway at a moment in time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunwayOccupant {
    pub aircraft: AgentId,
    pub start: u64,
    pub until: u64,
}
