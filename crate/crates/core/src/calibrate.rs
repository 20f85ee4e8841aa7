//! Closed-form inversion of the visibility model against three Bell-parameter targets.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

const S_MAX: f64 = 2.0 * SQRT_2;

/// Relative slack above 2√2 that is still read as unit visibility.
const CLAMP_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub m: u32,
    /// µs
    pub tau: f64,
    pub s: f64,
}

/// Three targets: `few` and `many` share a storage time and differ in
/// mode count; `late` shares the mode count of `many` at a longer time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTargets {
    pub few: Target,
    pub many: Target,
    pub late: Target,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self::from_values(2.65, 2.30, 2.03)
    }
}

impl CalibrationTargets {
    /// S at (m=1, 0.7 µs), (m=19, 0.7 µs) and (m=19, 30 µs).
    pub fn from_values(s1: f64, s19: f64, s19_late: f64) -> Self {
        Self {
            few: Target { m: 1, tau: 0.7, s: s1 },
            many: Target { m: 19, tau: 0.7, s: s19 },
            late: Target { m: 19, tau: 30.0, s: s19_late },
        }
    }
}

/// Fitted model parameters, serialized as a config patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub v1: f64,
    pub beta: f64,
    #[serde(with = "crate::serde_inf")]
    pub tau_c: f64,
}

impl ConfigPatch {
    pub fn apply(&self, config: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            v1: self.v1,
            beta: self.beta,
            tau_c: self.tau_c,
            ..*config
        }
    }
}

fn target_visibility(name: &str, t: &Target) -> Result<f64> {
    if !(t.s > 0.0 && t.s.is_finite()) {
        return Err(Error::Calibration(format!("{name}: S = {} must be positive", t.s)));
    }
    if !(t.tau >= 0.0 && t.tau.is_finite()) || t.m == 0 {
        return Err(Error::Calibration(format!("{name}: invalid (m, tau) = ({}, {})", t.m, t.tau)));
    }
    let v = t.s / S_MAX;
    if v > 1.0 + CLAMP_SLACK {
        return Err(Error::Calibration(format!("{name}: S = {} exceeds 2√2", t.s)));
    }
    Ok(v.min(1.0))
}

/// Solves v1, beta and tau_c from the three targets, keeping `chi` and
/// `tau_ref` from `base`.
pub fn calibrate(base: &ExperimentConfig, targets: &CalibrationTargets) -> Result<ConfigPatch> {
    let (a, b, c) = (&targets.few, &targets.many, &targets.late);
    let va = target_visibility("few", a)?;
    let vb = target_visibility("many", b)?;
    let vc = target_visibility("late", c)?;

    if a.tau != b.tau {
        return Err(Error::Calibration("few and many targets must share a storage time".into()));
    }
    if b.m != c.m {
        return Err(Error::Calibration("many and late targets must share a mode count".into()));
    }
    if b.m <= a.m {
        return Err(Error::Calibration("many target needs more modes than few".into()));
    }
    if c.tau <= b.tau {
        return Err(Error::Calibration("late target needs a longer storage time".into()));
    }
    if vb > va {
        return Err(Error::Calibration(format!(
            "S must not increase with mode count: S({}) = {} > S({}) = {}",
            b.m, b.s, a.m, a.s
        )));
    }
    if vc > vb {
        return Err(Error::Calibration(format!(
            "S must not increase with storage time: S({} µs) = {} > S({} µs) = {}",
            c.tau, c.s, b.tau, b.s
        )));
    }
    if base.chi.is_nan() || base.chi <= 0.0 {
        return Err(Error::Calibration("chi must be positive to resolve beta".into()));
    }

    // va/vb = (1 + β(mb−1)χ) / (1 + β(ma−1)χ)
    let r = va / vb;
    let (ma1, mb1) = (f64::from(a.m - 1), f64::from(b.m - 1));
    let den = base.chi * (mb1 - r * ma1);
    if den <= 0.0 {
        return Err(Error::Calibration("targets imply an unbounded noise coupling".into()));
    }
    let beta = (r - 1.0) / den;

    let tau_c = if vc == vb {
        f64::INFINITY
    } else {
        (c.tau - b.tau) / (vb / vc).ln()
    };

    let decay = if tau_c.is_infinite() {
        1.0
    } else {
        ((a.tau - base.tau_ref) / tau_c).exp()
    };
    let v1 = va * (1.0 + beta * ma1 * base.chi) * decay;
    if v1 > 1.0 + CLAMP_SLACK {
        return Err(Error::Calibration(format!("implied single-mode visibility {v1} exceeds 1")));
    }
    Ok(ConfigPatch {
        v1: v1.min(1.0),
        beta,
        tau_c,
    })
}
