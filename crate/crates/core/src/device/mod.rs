//! Simulators for the untrusted two-node device.
//!
//! Both models expose the same per-trial interface: feed inputs (x, y),
//! read outputs (a, b). Outcomes are counter-based — a trial's result
//! depends only on (seed, trial index) — so trial generation parallelizes
//! with bit-exact, schedule-independent results.

mod lhv;
mod quantum;

pub use lhv::{lhv_max_smu, lhv_max_smu_f64, LhvComponent, LhvDeviceModel, LhvSampler, LhvStrategy};
pub use quantum::{
    calibrate_visibility, born_probabilities, expected_values, QuantumDeviceModel,
    QuantumTrialSampler, DEVICE_STREAM,
};
