//! Poisson traffic generation and phase timing.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::ids::SimTime;
use crate::phase::FlightPhase;

/// Nominal seconds spent in each timed phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseDurations {
    pub at_entry_gate: u64,
    pub on_path: u64,
    pub holding_lap: u64,
    pub to_metering_fix: u64,
    pub at_metering_fix: u64,
    pub final_descent: u64,
    pub on_runway: u64,
    pub backtrack: u64,
}

impl Default for PhaseDurations {
    fn default() -> Self {
        PhaseDurations {
            at_entry_gate: 60,
            on_path: 300,
            holding_lap: 240,
            to_metering_fix: 120,
            at_metering_fix: 60,
            final_descent: 180,
            on_runway: 60,
            backtrack: 90,
        }
    }
}

impl PhaseDurations {
    pub fn nominal(&self, phase: FlightPhase) -> u64 {
        use FlightPhase::*;
        match phase {
            AtEntryGate => self.at_entry_gate,
            OnPath => self.on_path,
            HoldingPattern => self.holding_lap,
            ToMeteringFix => self.to_metering_fix,
            AtMeteringFix => self.at_metering_fix,
            FinalDescent => self.final_descent,
            OnRunway => self.on_runway,
            Backtrack => self.backtrack,
            ArrivalIntoAirspace | Departed | Diverted => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficModel {
    pub arrival_rate_per_hr: f64,
    pub departure_rate_per_hr: f64,
    pub phase_durations_s: PhaseDurations,
    /// Relative half-width of the uniform jitter applied to every duration.
    pub jitter: f64,
    pub initial_fuel_min: f64,
    pub fuel_jitter: f64,
    /// Inbound aircraft divert once remaining fuel drops to this reserve.
    pub divert_reserve_min: f64,
}

impl Default for TrafficModel {
    fn default() -> Self {
        TrafficModel {
            arrival_rate_per_hr: 10.0,
            departure_rate_per_hr: 30.0,
            phase_durations_s: PhaseDurations::default(),
            jitter: 0.1,
            initial_fuel_min: 80.0,
            fuel_jitter: 0.1,
            divert_reserve_min: 15.0,
        }
    }
}

impl TrafficModel {
    pub fn validate(&self, errors: &mut Vec<String>) {
        for (name, v) in [
            ("arrival_rate_per_hr", self.arrival_rate_per_hr),
            ("departure_rate_per_hr", self.departure_rate_per_hr),
        ] {
            if !v.is_finite() || v < 0.0 {
                errors.push(format!("traffic.{name}: {v} must be a finite non-negative rate"));
            }
        }
        for (name, v) in [("jitter", self.jitter), ("fuel_jitter", self.fuel_jitter)] {
            if !(0.0..1.0).contains(&v) {
                errors.push(format!("traffic.{name}: {v} not in [0, 1)"));
            }
        }
        if !(self.initial_fuel_min.is_finite() && self.initial_fuel_min > 0.0) {
            errors.push(format!(
                "traffic.initial_fuel_min: {} must be positive",
                self.initial_fuel_min
            ));
        }
        if !(self.divert_reserve_min >= 0.0 && self.divert_reserve_min < self.initial_fuel_min) {
            errors.push(format!(
                "traffic.divert_reserve_min: {} must be in [0, initial_fuel_min)",
                self.divert_reserve_min
            ));
        }
        let d = &self.phase_durations_s;
        for (name, v) in [
            ("at_entry_gate", d.at_entry_gate),
            ("on_path", d.on_path),
            ("holding_lap", d.holding_lap),
            ("to_metering_fix", d.to_metering_fix),
            ("at_metering_fix", d.at_metering_fix),
            ("final_descent", d.final_descent),
            ("on_runway", d.on_runway),
            ("backtrack", d.backtrack),
        ] {
            if v == 0 {
                errors.push(format!("traffic.phase_durations_s.{name}: must be positive"));
            }
        }
    }

    /// Jittered duration of `phase`, at least one second for timed phases.
    pub fn dwell<R: Rng>(&self, phase: FlightPhase, rng: &mut R) -> u64 {
        let nominal = self.phase_durations_s.nominal(phase);
        if nominal == 0 {
            return 0;
        }
        jittered(nominal as f64, self.jitter, rng).round().max(1.0) as u64
    }

    pub fn initial_fuel<R: Rng>(&self, rng: &mut R) -> f64 {
        jittered(self.initial_fuel_min, self.fuel_jitter, rng)
    }
}

fn jittered<R: Rng>(nominal: f64, jitter: f64, rng: &mut R) -> f64 {
    if jitter <= 0.0 {
        return nominal;
    }
    nominal * (1.0 + rng.random_range(-jitter..=jitter))
}

/// Arrivals and departures spawned during one step of `dt_s` seconds.
pub fn generate_traffic<R: Rng>(model: &TrafficModel, _t: SimTime, dt_s: u64, rng: &mut R) -> (u64, u64) {
    let draw = |rate: f64, rng: &mut R| -> u64 {
        let lambda = rate * dt_s as f64 / 3600.0;
        if lambda <= 0.0 {
            return 0;
        }
        Poisson::new(lambda).expect("positive finite rate").sample(rng) as u64
    };
    let arrivals = draw(model.arrival_rate_per_hr, rng);
    let departures = draw(model.departure_rate_per_hr, rng);
    (arrivals, departures)
}
