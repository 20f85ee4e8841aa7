//! Polarization analyzer settings and their measurement projectors.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analyzer in front of one polarizing beam splitter.
///
/// `Linear(a)` transmits cos(a)|H> + sin(a)|V> to detector 1 (D1 or T1) and
/// reflects the orthogonal state to detector 2. `Circular` transmits
/// |R> = (|H> + i|V>)/√2 and reflects |L>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzerSetting {
    Linear(f64),
    Circular,
}

/// Which output port of the beam splitter clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Transmit,
    Reflect,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Transmit, Outcome::Reflect];

    pub fn index(self) -> usize {
        match self {
            Outcome::Transmit => 0,
            Outcome::Reflect => 1,
        }
    }
}

impl AnalyzerSetting {
    pub const H: AnalyzerSetting = AnalyzerSetting::Linear(0.0);
    pub const D: AnalyzerSetting = AnalyzerSetting::Linear(45.0);
    pub const R: AnalyzerSetting = AnalyzerSetting::Circular;

    /// Linear analyzer; the angle is reduced into [0°, 180°).
    pub fn linear(angle_deg: f64) -> Result<Self> {
        if !angle_deg.is_finite() {
            return Err(Error::Domain(format!("analyzer angle {angle_deg} is not finite")));
        }
        Ok(AnalyzerSetting::Linear(angle_deg.rem_euclid(180.0)))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AnalyzerSetting::Linear(a) if !(0.0..180.0).contains(&a) => Err(Error::Domain(
                format!("linear analyzer angle {a} outside [0, 180)"),
            )),
            _ => Ok(()),
        }
    }

    /// State transmitted (or reflected) by this analyzer.
    pub fn state(&self, outcome: Outcome) -> Vector2<Complex64> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match (*self, outcome) {
            (AnalyzerSetting::Linear(a), Outcome::Transmit) => {
                let (s, co) = a.to_radians().sin_cos();
                Vector2::new(c(co, 0.0), c(s, 0.0))
            }
            (AnalyzerSetting::Linear(a), Outcome::Reflect) => {
                let (s, co) = a.to_radians().sin_cos();
                Vector2::new(c(-s, 0.0), c(co, 0.0))
            }
            (AnalyzerSetting::Circular, Outcome::Transmit) => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                Vector2::new(c(h, 0.0), c(0.0, h))
            }
            (AnalyzerSetting::Circular, Outcome::Reflect) => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                Vector2::new(c(h, 0.0), c(0.0, -h))
            }
        }
    }

    /// Rank-one projector for one output port.
    pub fn projector(&self, outcome: Outcome) -> Matrix2<Complex64> {
        let v = self.state(outcome);
        v * v.adjoint()
    }
}

/// Free-function form of [`AnalyzerSetting::projector`].
pub fn projector(setting: AnalyzerSetting, outcome: Outcome) -> Result<Matrix2<Complex64>> {
    setting.validate()?;
    Ok(setting.projector(outcome))
}

impl fmt::Display for AnalyzerSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyzerSetting::Linear(a) => write!(f, "{a}"),
            AnalyzerSetting::Circular => f.write_str("R"),
        }
    }
}

impl FromStr for AnalyzerSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "R" | "RL" | "R/L" | "circular" => Ok(AnalyzerSetting::Circular),
            _ => {
                let a: f64 = t
                    .parse()
                    .map_err(|_| Error::Input(format!("cannot parse analyzer setting {s:?}")))?;
                let setting = AnalyzerSetting::Linear(a);
                setting.validate()?;
                Ok(setting)
            }
        }
    }
}

/// Analyzer settings of the Stokes and anti-Stokes arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingPair {
    pub stokes: AnalyzerSetting,
    pub anti_stokes: AnalyzerSetting,
}

impl SettingPair {
    pub fn new(stokes: AnalyzerSetting, anti_stokes: AnalyzerSetting) -> Self {
        Self { stokes, anti_stokes }
    }

    pub fn linear(stokes_deg: f64, anti_stokes_deg: f64) -> Self {
        Self::new(
            AnalyzerSetting::Linear(stokes_deg),
            AnalyzerSetting::Linear(anti_stokes_deg),
        )
    }

    /// H–V basis on both arms.
    pub fn hv() -> Self {
        Self::linear(0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.stokes.validate()?;
        self.anti_stokes.validate()
    }
}
