//! Monte Carlo execution of write–clean cycles.
//!
//! A cycle applies a train of `m` write pulses. Each time bin may host one
//! excitation (probability χ) whose Stokes photon is detected with
//! probability η_D. The first click in bin order heralds; the matching
//! spin wave is read out after the storage time and the anti-Stokes photon
//! is analyzed. A clean pulse then resets every mode.

mod batch;
pub mod rng;
mod trial;

pub use batch::{run_batch, run_batch_with_threads, thread_pool, BatchResult, RunPlan, DEFAULT_SEED};
pub use rayon::ThreadPool;
pub use trial::{run_trial, Herald, TrialKernel, TrialRecord};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::prob;
use crate::state::{werner_state, DensityMatrix};

/// Two-photon visibility after `m`-mode preparation and storage time `tau` (µs).
///
/// V = v1 / (1 + β(m − 1)χ) · exp(−(τ − τ_ref)/τ_c), clamped to [0, 1].
/// The first factor models background light from unwanted spin waves, the
/// second the storage decay.
pub fn visibility(config: &ExperimentConfig, m: u32, tau: f64) -> f64 {
    let noise = 1.0 + config.beta * f64::from(m.saturating_sub(1)) * config.chi;
    let decay = if config.tau_c.is_infinite() {
        1.0
    } else {
        (-(tau - config.tau_ref) / config.tau_c).exp()
    };
    (config.v1 / noise * decay).clamp(0.0, 1.0)
}

/// Polarization state of a heralded Stokes/anti-Stokes pair.
pub fn effective_pair_state(config: &ExperimentConfig, m: u32, tau: f64) -> DensityMatrix {
    werner_state(config.theta, visibility(config, m, tau))
        .expect("validated config keeps theta in range and visibility is clamped")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeraldProbability {
    /// 1 − (1 − χη_D)^m
    pub exact: f64,
    /// m·χη_D
    pub linear: f64,
}

/// Closed-form herald probability per trial for an `m`-mode train.
pub fn analytic_p_s(config: &ExperimentConfig, m: u32) -> HeraldProbability {
    let p = config.single_bin_click();
    HeraldProbability {
        exact: prob::at_least_one(p, u64::from(m)),
        linear: prob::at_least_one_linear(p, u64::from(m)),
    }
}

/// Closed-form heralded-coincidence probability per trial (dark counts off).
pub fn analytic_p_sas(config: &ExperimentConfig, m: u32) -> f64 {
    analytic_p_s(config, m).exact * config.readout_efficiency()
}

/// Trials needed for `target` expected coincidences per setting pair.
pub fn trials_for_coincidences(config: &ExperimentConfig, target: u64) -> u64 {
    let p = analytic_p_sas(config, config.m);
    if p <= 0.0 {
        return u64::MAX;
    }
    (target as f64 / p).ceil().max(1.0) as u64
}
