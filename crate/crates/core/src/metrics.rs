//! Per-run metrics computed from the event log, and cross-seed aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunwayMode;
use crate::disturbance::{handled_fraction, handled_fraction_all, tally};
use crate::eventlog::{Event, LogRecord};
use crate::messaging::MessageKind;
use crate::phase::FlightPhase;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("log has no run_start record")]
    MissingRunStart,
    #[error("log ends without a run_end record")]
    TruncatedLog,
    #[error("cannot aggregate runs of different scenarios ({0} vs {1})")]
    MixedScenarios(String, String),
    #[error("nothing to aggregate")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub scenario_hash: String,
    pub duration_s: u64,
    pub movements_per_hr: f64,
    pub landings_per_hr: f64,
    pub takeoffs_per_hr: f64,
    pub handled_fraction: f64,
    pub handled_fraction_all: f64,
    pub flights: u64,
    pub disturbed_flights: u64,
    pub escalations: u64,
    pub lost_escalations: u64,
    pub diversions: u64,
    pub supervision_gaps: u64,
    pub failovers: u64,
    pub failbacks: u64,
    pub mean_holding_time_s: f64,
    pub faults: u64,
}

pub const CSV_HEADER: &str = "seed,scenario_hash,duration_s,movements_per_hr,landings_per_hr,takeoffs_per_hr,\
handled_fraction,handled_fraction_all,flights,disturbed_flights,escalations,lost_escalations,diversions,\
supervision_gaps,failovers,failbacks,mean_holding_time_s,faults";

impl RunMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{},{},{},{:.3},{}",
            self.seed,
            self.scenario_hash,
            self.duration_s,
            self.movements_per_hr,
            self.landings_per_hr,
            self.takeoffs_per_hr,
            self.handled_fraction,
            self.handled_fraction_all,
            self.flights,
            self.disturbed_flights,
            self.escalations,
            self.lost_escalations,
            self.diversions,
            self.supervision_gaps,
            self.failovers,
            self.failbacks,
            self.mean_holding_time_s,
            self.faults,
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}\n", self.csv_row())
    }
}

/// Compute all per-run metrics from a complete log.
pub fn compute_metrics(log: &[LogRecord]) -> Result<RunMetrics, MetricsError> {
    let (seed, scenario_hash, duration_s) = log
        .iter()
        .find_map(|r| match &r.event {
            Event::RunStart {
                seed,
                scenario_hash,
                duration_s,
                ..
            } => Some((*seed, scenario_hash.clone(), *duration_s)),
            _ => None,
        })
        .ok_or(MetricsError::MissingRunStart)?;
    let in_flight = log
        .iter()
        .rev()
        .find_map(|r| match r.event {
            Event::RunEnd {
                escalations_in_flight, ..
            } => Some(escalations_in_flight),
            _ => None,
        })
        .ok_or(MetricsError::TruncatedLog)?;

    let mut landings = 0u64;
    let mut takeoffs = 0u64;
    let mut escalations = 0u64;
    let mut escalations_sent = 0u64;
    let mut escalations_received = 0u64;
    let mut diversions = 0u64;
    let mut gaps = 0u64;
    let mut failovers = 0u64;
    let mut failbacks = 0u64;
    let mut faults = 0u64;
    let mut hold_start: BTreeMap<&str, u64> = BTreeMap::new();
    let mut hold_total = 0u64;
    let mut holds = 0u64;
    for r in log {
        match &r.event {
            Event::RunwayGranted { mode, .. } => match mode {
                RunwayMode::Landing => landings += 1,
                RunwayMode::Takeoff => takeoffs += 1,
            },
            Event::DisturbanceEscalated { .. } => escalations += 1,
            Event::MessageSent {
                msg_kind: MessageKind::Escalation,
                ..
            } => escalations_sent += 1,
            Event::EscalationReceived { .. } => escalations_received += 1,
            Event::Divert { .. } => diversions += 1,
            Event::SupervisionGap {} => gaps += 1,
            Event::Failover { .. } => failovers += 1,
            Event::Failback { .. } => failbacks += 1,
            Event::Fault { .. } => faults += 1,
            Event::Phase { from, to } => {
                if *to == FlightPhase::HoldingPattern {
                    hold_start.insert(r.subject.as_str(), r.time);
                } else if *from == FlightPhase::HoldingPattern {
                    if let Some(s) = hold_start.remove(r.subject.as_str()) {
                        hold_total += r.time - s;
                        holds += 1;
                    }
                }
            }
            _ => {}
        }
    }
    let hours = duration_s as f64 / 3600.0;
    let per_hr = |n: u64| if hours > 0.0 { n as f64 / hours } else { 0.0 };
    let t = tally(log);
    Ok(RunMetrics {
        seed,
        scenario_hash,
        duration_s,
        movements_per_hr: per_hr(landings + takeoffs),
        landings_per_hr: per_hr(landings),
        takeoffs_per_hr: per_hr(takeoffs),
        handled_fraction: handled_fraction(log),
        handled_fraction_all: handled_fraction_all(log),
        flights: t.flights.len() as u64,
        disturbed_flights: t.disturbed.len() as u64,
        escalations,
        lost_escalations: escalations_sent.saturating_sub(escalations_received + in_flight),
        diversions,
        supervision_gaps: gaps,
        failovers,
        failbacks,
        mean_holding_time_s: if holds == 0 { 0.0 } else { hold_total as f64 / holds as f64 },
        faults,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1); zero for a single run.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    /// Order-independent: values are sorted before summation.
    pub fn of(values: &[f64]) -> Stat {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
            dev.sort_by(f64::total_cmp);
            (dev.iter().sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            sd,
            min: v[0],
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scenario_hash: String,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub movements_per_hr: Stat,
    pub landings_per_hr: Stat,
    pub takeoffs_per_hr: Stat,
    pub handled_fraction: Stat,
    pub handled_fraction_all: Stat,
    pub escalations: Stat,
    pub lost_escalations: Stat,
    pub diversions: Stat,
    pub supervision_gaps: Stat,
    pub failovers: Stat,
    pub mean_holding_time_s: Stat,
    pub faults: Stat,
}

type Column = (&'static str, fn(&RunMetrics) -> f64);

const COLUMNS: [Column; 12] = [
    ("movements_per_hr", |m| m.movements_per_hr),
    ("landings_per_hr", |m| m.landings_per_hr),
    ("takeoffs_per_hr", |m| m.takeoffs_per_hr),
    ("handled_fraction", |m| m.handled_fraction),
    ("handled_fraction_all", |m| m.handled_fraction_all),
    ("escalations", |m| m.escalations as f64),
    ("lost_escalations", |m| m.lost_escalations as f64),
    ("diversions", |m| m.diversions as f64),
    ("supervision_gaps", |m| m.supervision_gaps as f64),
    ("failovers", |m| m.failovers as f64),
    ("mean_holding_time_s", |m| m.mean_holding_time_s),
    ("faults", |m| m.faults as f64),
];

pub fn aggregate(runs: &[RunMetrics]) -> Result<AggregateReport, MetricsError> {
    let first = runs.first().ok_or(MetricsError::EmptyInput)?;
    if let Some(other) = runs.iter().find(|r| r.scenario_hash != first.scenario_hash) {
        return Err(MetricsError::MixedScenarios(
            first.scenario_hash.clone(),
            other.scenario_hash.clone(),
        ));
    }
    let col = |f: fn(&RunMetrics) -> f64| Stat::of(&runs.iter().map(f).collect::<Vec<_>>());
    let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    let s: Vec<Stat> = COLUMNS.iter().map(|(_, f)| col(*f)).collect();
    Ok(AggregateReport {
        scenario_hash: first.scenario_hash.clone(),
        n: runs.len(),
        seeds,
        movements_per_hr: s[0],
        landings_per_hr: s[1],
        takeoffs_per_hr: s[2],
        handled_fraction: s[3],
        handled_fraction_all: s[4],
        escalations: s[5],
        lost_escalations: s[6],
        diversions: s[7],
        supervision_gaps: s[8],
        failovers: s[9],
        mean_holding_time_s: s[10],
        faults: s[11],
    })
}

impl AggregateReport {
    fn stats(&self) -> [(&'static str, &Stat); 12] {
        [
            ("movements_per_hr", &self.movements_per_hr),
            ("landings_per_hr", &self.landings_per_hr),
            ("takeoffs_per_hr", &self.takeoffs_per_hr),
            ("handled_fraction", &self.handled_fraction),
            ("handled_fraction_all", &self.handled_fraction_all),
            ("escalations", &self.escalations),
            ("lost_escalations", &self.lost_escalations),
            ("diversions", &self.diversions),
            ("supervision_gaps", &self.supervision_gaps),
            ("failovers", &self.failovers),
            ("mean_holding_time_s", &self.mean_holding_time_s),
            ("faults", &self.faults),
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width text table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario {}  runs {}", self.scenario_hash, self.n);
        let _ = writeln!(s, "{:<22}{:>12}{:>12}{:>12}{:>12}", "metric", "mean", "sd", "min", "max");
        for (name, st) in self.stats() {
            let _ = writeln!(
                s,
                "{name:<22}{:>12.4}{:>12.4}{:>12.4}{:>12.4}",
                st.mean, st.sd, st.min, st.max
            );
        }
        s
    }
}

pub fn runs_csv(runs: &[RunMetrics]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in runs {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::FlightKind;

    fn start(duration_s: u64) -> LogRecord {
        LogRecord::new(
            0,
            "run",
            Event::RunStart {
                seed: 1,
                scenario_hash: "h".into(),
                duration_s,
                dt_s: 1,
            },
        )
    }

    fn end(t: u64) -> LogRecord {
        LogRecord::new(
            t,
            "run",
            Event::RunEnd {
                arrivals_admitted: 0,
                arrivals_landed: 0,
                arrivals_diverted: 0,
                arrivals_in_system: 0,
                departures_admitted: 0,
                departures_departed: 0,
                departures_in_system: 0,
                escalations_in_flight: 0,
            },
        )
    }

    fn grant(t: u64, mode: RunwayMode) -> LogRecord {
        LogRecord::new(
            t,
            "X",
            Event::RunwayGranted {
                runway: "27".into(),
                mode,
                start: t,
                until: t + 60,
            },
        )
    }

    #[test]
    fn fifteen_movements_in_half_an_hour() {
        let mut log = vec![start(1800)];
        for i in 0..10 {
            log.push(grant(i * 100, RunwayMode::Landing));
        }
        for i in 0..5 {
            log.push(grant(i * 100 + 50, RunwayMode::Takeoff));
        }
        log.push(end(1800));
        let m = compute_metrics(&log).unwrap();
        assert!((m.movements_per_hr - 30.0).abs() < 1e-12);
        assert!((m.landings_per_hr - 20.0).abs() < 1e-12);
    }

    #[test]
    fn missing_run_end_is_truncated() {
        assert_eq!(compute_metrics(&[start(60)]), Err(MetricsError::TruncatedLog));
    }

    #[test]
    fn empty_run_has_zero_throughput() {
        let m = compute_metrics(&[start(3600), end(3600)]).unwrap();
        assert_eq!(m.movements_per_hr, 0.0);
        assert_eq!(m.handled_fraction, 1.0);
    }

    #[test]
    fn holding_time_averages_completed_holds() {
        let ph = |t, who: &str, from, to| LogRecord::new(t, who, Event::Phase { from, to });
        let log = vec![
            start(3600),
            LogRecord::new(0, "A", Event::Spawn { flight: FlightKind::Arrival }),
            ph(100, "A", FlightPhase::OnPath, FlightPhase::HoldingPattern),
            ph(400, "A", FlightPhase::HoldingPattern, FlightPhase::ToMeteringFix),
            ph(200, "B", FlightPhase::OnPath, FlightPhase::HoldingPattern),
            ph(300, "B", FlightPhase::HoldingPattern, FlightPhase::ToMeteringFix),
            end(3600),
        ];
        assert_eq!(compute_metrics(&log).unwrap().mean_holding_time_s, 200.0);
    }

    fn metrics(seed: u64, mph: f64) -> RunMetrics {
        let mut m = compute_metrics(&[start(3600), end(3600)]).unwrap();
        m.seed = seed;
        m.movements_per_hr = mph;
        m
    }

    #[test]
    fn aggregate_uses_sample_sd() {
        let runs = vec![metrics(1, 36.0), metrics(2, 38.0), metrics(3, 40.0)];
        let r = aggregate(&runs).unwrap();
        assert_eq!(r.movements_per_hr.mean, 38.0);
        assert_eq!(r.movements_per_hr.sd, 2.0);
        assert_eq!((r.movements_per_hr.min, r.movements_per_hr.max), (36.0, 40.0));
    }

    #[test]
    fn single_run_has_zero_sd() {
        let r = aggregate(&[metrics(1, 36.0)]).unwrap();
        assert_eq!(r.movements_per_hr.sd, 0.0);
    }

    #[test]
    fn aggregate_rejects_empty_and_mixed() {
        assert_eq!(aggregate(&[]), Err(MetricsError::EmptyInput));
        let mut b = metrics(2, 1.0);
        b.scenario_hash = "other".into();
        assert!(matches!(
            aggregate(&[metrics(1, 1.0), b]),
            Err(MetricsError::MixedScenarios(..))
        ));
    }

    #[test]
    fn csv_header_matches_row_width() {
        let m = metrics(1, 1.0);
        assert_eq!(CSV_HEADER.split(',').count(), m.csv_row().split(',').count());
    }
}
