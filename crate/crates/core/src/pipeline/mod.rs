//! Protocol orchestration: configuration, end-to-end runs, dry runs, and
//! the S-vs-n trade-off sweep.

mod config;
mod run;
mod sweep;

pub use config::{
    DeviceConfig, ExtractorMode, OutputSection, ProtocolConfig, ProtocolSection, SecuritySection,
    SizingMode, SourceConfig,
};
pub use run::{
    dry_run, run_protocol, simulate_trials, DryRunReport, OutputFiles, ProtocolReport,
    SimulateReport, Timings,
};
pub use sweep::{tradeoff_sweep, write_sweep_csv, SweepRow};
