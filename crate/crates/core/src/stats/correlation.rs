use serde::{Deserialize, Serialize};

use crate::analyzer::SettingPair;
use crate::counts::{CoincidenceTable, PairCounts};
use crate::error::{Error, Result};
use crate::state::DensityMatrix;

/// Correlation E with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub value: f64,
    pub std_err: f64,
}

/// E = (C_D1T1 + C_D2T2 − C_D1T2 − C_D2T1) / ΣC.
///
/// `freq` is in `[D1T1, D1T2, D2T1, D2T2]` order and may hold counts or
/// probabilities; the standard error treats the sum as the number of
/// coincidences.
pub fn correlation(freq: [f64; 4]) -> Result<Correlation> {
    let [d1t1, d1t2, d2t1, d2t2] = freq;
    if freq.iter().any(|c| *c < 0.0 || !c.is_finite()) {
        return Err(Error::Input(format!("counts must be finite and non-negative: {freq:?}")));
    }
    let total = d1t1 + d1t2 + d2t1 + d2t2;
    if total <= 0.0 {
        return Err(Error::Estimation("E is undefined without coincidences".into()));
    }
    let value = ((d1t1 + d2t2 - d1t2 - d2t1) / total).clamp(-1.0, 1.0);
    let std_err = ((1.0 - value * value).max(0.0) / total).sqrt();
    Ok(Correlation { value, std_err })
}

pub fn correlation_e(counts: &PairCounts) -> Result<Correlation> {
    correlation(counts.frequencies())
}

/// Analyzer angles (degrees) for the CHSH combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellSettings {
    pub stokes: f64,
    pub stokes_prime: f64,
    pub anti_stokes: f64,
    pub anti_stokes_prime: f64,
}

impl Default for BellSettings {
    /// θ_S = 0°, θ′_S = 45°, θ_A = 22.5°, θ′_A = 67.5°.
    fn default() -> Self {
        Self {
            stokes: 0.0,
            stokes_prime: 45.0,
            anti_stokes: 22.5,
            anti_stokes_prime: 67.5,
        }
    }
}

impl BellSettings {
    pub fn validate(&self) -> Result<()> {
        for a in [self.stokes, self.stokes_prime, self.anti_stokes, self.anti_stokes_prime] {
            if !(0.0..180.0).contains(&a) {
                return Err(Error::Domain(format!("analyzer angle {a} outside [0, 180)")));
            }
        }
        if self.stokes == self.stokes_prime || self.anti_stokes == self.anti_stokes_prime {
            return Err(Error::Input("CHSH needs two distinct angles per arm".into()));
        }
        Ok(())
    }

    /// (θ_S, θ_A), (θ_S, θ′_A), (θ′_S, θ_A), (θ′_S, θ′_A).
    pub fn pairs(&self) -> [SettingPair; 4] {
        [
            SettingPair::linear(self.stokes, self.anti_stokes),
            SettingPair::linear(self.stokes, self.anti_stokes_prime),
            SettingPair::linear(self.stokes_prime, self.anti_stokes),
            SettingPair::linear(self.stokes_prime, self.anti_stokes_prime),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellParameter {
    pub value: f64,
    pub std_err: f64,
    /// In the order of [`BellSettings::pairs`].
    pub correlations: [Correlation; 4],
}

fn combine(e: [Correlation; 4]) -> BellParameter {
    let value = (e[0].value - e[1].value + e[2].value + e[3].value).abs();
    let std_err = e.iter().map(|c| c.std_err * c.std_err).sum::<f64>().sqrt();
    BellParameter {
        value,
        std_err,
        correlations: e,
    }
}

/// S = |E(θ_S, θ_A) − E(θ_S, θ′_A) + E(θ′_S, θ_A) + E(θ′_S, θ′_A)|.
pub fn bell_s(table: &CoincidenceTable, settings: &BellSettings) -> Result<BellParameter> {
    settings.validate()?;
    let mut counts = [PairCounts::default(); 4];
    for (slot, pair) in counts.iter_mut().zip(settings.pairs()) {
        *slot = *table.get(&pair).ok_or_else(|| {
            Error::Input(format!(
                "setting pair ({}, {}) missing from table",
                pair.stokes, pair.anti_stokes
            ))
        })?;
    }
    let mut e = [Correlation { value: 0.0, std_err: 0.0 }; 4];
    for (slot, c) in e.iter_mut().zip(&counts) {
        *slot = correlation_e(c)?;
    }
    Ok(combine(e))
}

/// Bell parameter from exact outcome probabilities of a state.
pub fn bell_s_exact(rho: &DensityMatrix, settings: &BellSettings) -> Result<f64> {
    settings.validate()?;
    let mut e = [Correlation { value: 0.0, std_err: 0.0 }; 4];
    for (slot, pair) in e.iter_mut().zip(settings.pairs()) {
        *slot = correlation(rho.joint_probabilities(&pair))?;
    }
    Ok(combine(e).value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{bell_state, werner_state};
    use std::f64::consts::SQRT_2;

    #[test]
    fn perfect_correlation() {
        let c = correlation([100.0, 0.0, 0.0, 100.0]).unwrap();
        assert_eq!(c.value, 1.0);
        assert_eq!(c.std_err, 0.0);
    }

    #[test]
    fn no_correlation() {
        let c = correlation([50.0; 4]).unwrap();
        assert_eq!(c.value, 0.0);
        assert!((c.std_err - (1.0f64 / 200.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_counts_is_an_estimation_error() {
        assert!(matches!(correlation([0.0; 4]), Err(Error::Estimation(_))));
    }

    #[test]
    fn bell_state_correlation_at_22_5() {
        // Analytic oracle: Tr[ρ (P⊗P)] combination gives cos 2(a − b).
        let rho = bell_state(45.0).unwrap();
        let e = correlation(rho.joint_probabilities(&SettingPair::linear(0.0, 22.5))).unwrap();
        assert!((e.value - 45f64.to_radians().cos()).abs() < 1e-12);
    }

    #[test]
    fn tsirelson_for_ideal_state() {
        let s = bell_s_exact(&bell_state(45.0).unwrap(), &BellSettings::default()).unwrap();
        assert!((s - 2.0 * SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn werner_chsh_scales_with_visibility() {
        let s = bell_s_exact(&werner_state(45.0, 0.8132).unwrap(), &BellSettings::default()).unwrap();
        assert!((s - 2.300).abs() < 1e-3);
        let mixed = bell_s_exact(&werner_state(45.0, 0.0).unwrap(), &BellSettings::default()).unwrap();
        assert!(mixed.abs() < 1e-15);
    }

    #[test]
    fn missing_pair_is_an_input_error() {
        let settings = BellSettings::default();
        let table = CoincidenceTable::with_settings(&settings.pairs()[..3]);
        assert!(matches!(bell_s(&table, &settings), Err(Error::Input(_))));
    }

    #[test]
    fn counts_table_with_error_propagation() {
        let settings = BellSettings::default();
        let mut table = CoincidenceTable::with_settings(&settings.pairs());
        for (row, (a, b)) in table.rows.iter_mut().zip([(85, 15), (15, 85), (85, 15), (85, 15)]) {
            row.counts = PairCounts {
                d1t1: a,
                d2t2: a,
                d1t2: b,
                d2t1: b,
                n_d1: 1000,
                n_d2: 1000,
                trials: 10_000,
            };
        }
        let s = bell_s(&table, &settings).unwrap();
        assert!((s.value - 4.0 * 0.7).abs() < 1e-12);
        let se_e = ((1.0f64 - 0.49) / 200.0).sqrt();
        assert!((s.std_err - 2.0 * se_e).abs() < 1e-12);
    }

    #[test]
    fn degenerate_settings_rejected() {
        let s = BellSettings { stokes_prime: 0.0, ..Default::default() };
        assert!(s.validate().is_err());
    }
}
