//! Seed-reproducible Monte Carlo simulator of a two-tier multi-rate slotted
//! ALOHA network: indoor optical wireless (OWC) cells with SNR capture and
//! multi-packet reception relay their traffic into a LoRa-style RF uplink
//! shared by all cells.
//!
//! Crate layout:
//! - [`owc`] — the indoor optical tier: Lambertian channel, user placement,
//!   SNR statistics, capture erasure.
//! - [`lora`] — the outdoor RF tier: SF table, path loss, Rayleigh fading,
//!   the two-condition decode rule at the base station.
//! - [`engine`] — the slot-by-slot protocol pipeline and throughput
//!   accounting.
//! - [`oracle`] — independent closed-form and brute-force implementations
//!   used to cross-check the sampled paths.
//! - [`scenario`] / [`sweep`] — configuration files, parameter sweeps, and
//!   the adaptive-M lookup table.
//! - [`validate`] — the statistical self-test suite behind `validate`.

pub mod engine;
pub mod error;
pub mod lora;
pub mod oracle;
pub mod owc;
pub mod scenario;
pub mod seed;
pub mod sweep;
pub mod units;
pub mod validate;

pub use engine::{run_simulation, run_simulation_traced, Scenario, ThroughputStats};
pub use error::{Result, SimError};
