//! Deterministic discrete-event simulator of a multiagent terminal-area
//! air traffic control system.
//!
//! Aircraft are autonomous agents that sequence themselves through a shared
//! landing queue and an altitude-banded holding stack. Supervisors (ATC,
//! with TRACON as fall-back) only listen and take escalations. Every run is
//! a pure function of a scenario file and a seed.

pub mod agents;
pub mod config;
pub mod disturbance;
pub mod engine;
pub mod eventlog;
pub mod experiment;
pub mod ids;
pub mod messaging;
pub mod metrics;
pub mod phase;
pub mod queue;
pub mod rng;
pub mod scenario;
pub mod stack;

pub use engine::{run, Engine, EngineError, RunOutcome};
pub use eventlog::{Event, LogRecord};
pub use experiment::{run_experiment, ExperimentOutcome};
pub use ids::{AgentId, SimTime};
pub use metrics::{aggregate, compute_metrics, AggregateReport, RunMetrics};
pub use phase::{FlightKind, FlightPhase};
pub use scenario::ScenarioFile;
