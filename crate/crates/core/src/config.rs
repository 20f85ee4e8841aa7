//! Physical parameters of one multiplexed source.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// All parameters of a single source.
///
/// Field names are the JSON keys; unknown keys are rejected so that a typo
/// in a sweep file fails loudly instead of silently falling back to a
/// default. Missing keys take the calibrated defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of temporal mode pairs in the write train.
    pub m: u32,
    /// Per-bin excitation probability.
    pub chi: f64,
    /// Entanglement angle in degrees: cos(theta)|HH> + sin(theta)|VV>.
    pub theta: f64,
    /// Stokes channel and detector efficiency.
    pub eta_d: f64,
    /// Anti-Stokes channel efficiency.
    pub eta_as: f64,
    /// Intrinsic retrieval efficiency.
    pub gamma: f64,
    /// Single-mode visibility at `tau_ref`.
    pub v1: f64,
    /// Background-noise coupling per unwanted mode.
    pub beta: f64,
    /// Visibility decay constant in µs. May be `+inf` (no decay).
    #[serde(with = "crate::serde_inf")]
    pub tau_c: f64,
    /// Storage time (µs) at which `v1` is defined.
    pub tau_ref: f64,
    /// Dark-count probability per detector per gate.
    pub dark_rate: f64,
    /// Write-train duration in µs.
    pub delta_t_train: f64,
    /// Trial repetition rate in 1/s.
    pub rep_rate: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 19,
            chi: 0.01,
            theta: 45.0,
            eta_d: 0.1,
            eta_as: 0.5,
            gamma: 0.3,
            v1: 0.937,
            beta: 0.85,
            tau_c: 235.0,
            tau_ref: 0.7,
            dark_rate: 0.0,
            delta_t_train: 7.0,
            rep_rate: 4.6e4,
        }
    }
}

fn check_prob(field: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(field, format!("{p} is not a probability in [0, 1]")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        check_prob("chi", self.chi)?;
        check_prob("eta_d", self.eta_d)?;
        check_prob("eta_as", self.eta_as)?;
        check_prob("gamma", self.gamma)?;
        check_prob("dark_rate", self.dark_rate)?;
        if !(0.0..=90.0).contains(&self.theta) {
            return Err(invalid("theta", format!("{} deg outside [0, 90]", self.theta)));
        }
        if !(self.v1 > 0.0 && self.v1 <= 1.0) {
            return Err(invalid("v1", format!("{} outside (0, 1]", self.v1)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", format!("{} must be finite and >= 0", self.beta)));
        }
        if self.tau_c.is_nan() || self.tau_c <= 0.0 {
            return Err(invalid("tau_c", format!("{} must be > 0", self.tau_c)));
        }
        if !(self.tau_ref >= 0.0 && self.tau_ref.is_finite()) {
            return Err(invalid("tau_ref", format!("{} must be finite and >= 0", self.tau_ref)));
        }
        if !(self.delta_t_train > 0.0 && self.delta_t_train.is_finite()) {
            return Err(invalid("delta_t_train", format!("{} must be > 0", self.delta_t_train)));
        }
        if !(self.rep_rate > 0.0 && self.rep_rate.is_finite()) {
            return Err(invalid("rep_rate", format!("{} must be > 0", self.rep_rate)));
        }
        if self.chi * self.eta_d >= 1.0 {
            return Err(invalid(
                "chi",
                "chi * eta_d must stay below 1 (single-excitation regime)",
            ));
        }
        Ok(())
    }

    /// Parses and validates a JSON object.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_m(mut self, m: u32) -> Self {
        self.m = m;
        self
    }

    /// Same source with lossless Stokes detection and readout.
    ///
    /// With `dark_rate == 0` the polarization statistics of heralded
    /// coincidences do not depend on `eta_d`, `gamma` or `eta_as`, so this
    /// copy gives the same Bell parameter and tomography at a far higher
    /// coincidence yield per trial.
    pub fn with_unit_efficiencies(mut self) -> Self {
        self.eta_d = 1.0;
        self.gamma = 1.0;
        self.eta_as = 1.0;
        self
    }

    /// Probability that a single bin yields a Stokes click (χ·η_D).
    pub fn single_bin_click(&self) -> f64 {
        self.chi * self.eta_d
    }

    /// Readout success probability for a true herald (γ·η_AS).
    pub fn readout_efficiency(&self) -> f64 {
        self.gamma * self.eta_as
    }
}
