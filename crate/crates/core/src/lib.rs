//! Monte Carlo simulator and analysis toolkit for a temporally multiplexed
//! spin-wave/photon entanglement source and the repeater link built from it.
//!
//! Two-qubit states use the basis order (HH, HV, VH, VV); the first qubit
//! is the Stokes photon, the second the anti-Stokes photon.

pub mod analyzer;
pub mod calibrate;
pub mod config;
pub mod counts;
pub mod engine;
pub mod error;
pub mod figures;
pub mod link;
pub mod phase_matching;
pub mod prob;
pub mod serde_inf;
pub mod state;
pub mod stats;

pub use analyzer::{projector, AnalyzerSetting, Outcome, SettingPair};
pub use calibrate::{calibrate, CalibrationTargets, ConfigPatch, Target};
pub use config::ExperimentConfig;
pub use counts::{AntiStokesDetector, CoincidenceTable, PairCounts, SettingCounts, StokesDetector};
pub use engine::{
    analytic_p_s, analytic_p_sas, effective_pair_state, run_batch, run_batch_with_threads, run_trial, visibility,
    BatchResult, Herald, RunPlan, TrialRecord, DEFAULT_SEED,
};
pub use error::{Error, Result};
pub use link::{
    avg_entanglement_time, communication_time, feedback_success, feedback_vs_multiplexed_report, p_link_multiplexed,
    FeedbackConfig, LinkConfig,
};
pub use phase_matching::{anti_stokes_wavevector, pmc_residual, scan_geometry, BeamGeometry, GeometryScan};
pub use state::{bell_state, validate_density, werner_state, DensityMatrix, Violation};
pub use stats::{bell_s, correlation_e, fidelity, fit_decay, project_physical, tomo_reconstruct, BellSettings, DecayFit};
