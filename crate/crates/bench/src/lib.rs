//! Fixtures shared by the benchmarks.

use swpe_core::engine::run_batch;
use swpe_core::figures::calibrated_config;
use swpe_core::stats::{tomography_settings, BellSettings};
use swpe_core::{CoincidenceTable, ExperimentConfig, RunPlan};

/// Calibrated source at the given mode count.
pub fn source(m: u32) -> ExperimentConfig {
    calibrated_config().expect("default calibration").with_m(m).with_unit_efficiencies()
}

/// Simulated counts for the four Bell setting pairs.
pub fn bell_table(trials: u64) -> CoincidenceTable {
    let plan = RunPlan::new(source(19), 0.7, BellSettings::default().pairs().to_vec(), trials);
    run_batch(&plan).expect("bell batch").coincidences
}

/// Simulated counts for the nine tomography basis pairs.
pub fn tomography_table(trials: u64) -> CoincidenceTable {
    let plan = RunPlan::new(source(19), 0.7, tomography_settings(), trials);
    run_batch(&plan).expect("tomography batch").coincidences
}
