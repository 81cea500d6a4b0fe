//! The falsification campaign: configuration, dataset bookkeeping, and the
//! learn–distill–optimize loop.

mod campaign;
mod config;
mod dataset;

pub use campaign::{
    corners_random_input, initialize_data, manifest_for, persist_campaign, run_campaign,
    validate_candidate, CampaignResult, Outcome,
};
pub use config::RunConfig;
pub use dataset::{
    load_dataset, persist_run, trace_stem, Dataset, IterationRecord, Provenance, RunSummary,
    RUN_SCHEMA_VERSION,
};
