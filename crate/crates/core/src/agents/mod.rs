pub mod aircraft;
pub mod inprocess;
pub mod leader;
pub mod registry;
pub mod supervisor;

pub use aircraft::{aircraft_step, AircraftAgent, StepError, StepOutput, WorldView};
pub use inprocess::{inprocess_scan, ExternalRecord, MalformedExternalRecord};
pub use leader::{leader_relay, LeaderSystem, RelayPlan};
pub use registry::{DfRegistry, RegistryError};
pub use supervisor::{atc_overhear, tracon_entry_notify, tracon_failover, Role, SupervisorState};
