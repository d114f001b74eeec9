//! Scenario generation, the event-driven run of one multicast session, energy
//! accounting, metrics and parameter sweeps.

mod config;
mod energy;
mod engine;
pub mod metrics;
mod results;
mod run;
mod scenario;
mod sweep;
mod world;

pub use config::{ConfigError, CryptoConfig, ScenarioConfig, TrustConfig};
pub use energy::{Category, DeviceEnergy, EnergyLedger, EnergyModel, Link, Side};
pub use engine::EventQueue;
pub use metrics::DetectionStats;
pub use results::{read_results, results_to_string, write_results, ResultRow, RESULT_COLUMNS};
pub use run::{run, run_config, DeviceOutcome, RunError, RunOptions, RunResult};
pub use scenario::{generate_scenario, substream, DeviceSpec, Scenario};
pub use sweep::{sweep, SweepFailure, SweepGrid, SweepOutcome, SweepPoint};
