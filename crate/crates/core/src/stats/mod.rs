//! Estimators over coincidence tables.

mod correlation;
mod decay;
mod fidelity;
mod tomography;

pub use correlation::{bell_s, bell_s_exact, correlation, correlation_e, BellParameter, BellSettings, Correlation};
pub use decay::{fit_decay, DecayFit, DecayPoint};
pub use fidelity::{fidelity, fidelity_pure, sqrtm_psd};
pub use tomography::{
    exact_frequencies, project_physical, reconstruct_from_frequencies, redistribute_spectrum, tomo_reconstruct,
    tomography_data, tomography_settings, TomographyData, TOMOGRAPHY_BASES,
};
