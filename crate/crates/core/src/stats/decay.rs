use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const S_MAX: f64 = 2.0 * SQRT_2;

/// One measured Bell parameter at storage time `tau` (µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayPoint {
    pub tau: f64,
    pub s: f64,
    pub s_err: f64,
}

/// Exponential visibility decay V(τ) = v_ref · exp(−(τ − τ_ref)/τ_c).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub tau_ref: f64,
    /// µs; `inf` when the data show no decay.
    #[serde(with = "crate::serde_inf")]
    pub tau_c: f64,
    pub v_ref: f64,
    /// Storage time at which S falls to 2; `None` when S never exceeds 2.
    #[serde(with = "crate::serde_inf::option")]
    pub lifetime_chsh: Option<f64>,
    /// Covariance of (tau_c, v_ref).
    pub covariance: [[f64; 2]; 2],
    pub warnings: Vec<String>,
}

impl DecayFit {
    pub fn visibility(&self, tau: f64) -> f64 {
        if self.tau_c.is_infinite() {
            self.v_ref
        } else {
            self.v_ref * (-(tau - self.tau_ref) / self.tau_c).exp()
        }
    }

    pub fn bell_s(&self, tau: f64) -> f64 {
        S_MAX * self.visibility(tau)
    }
}

/// Weighted least squares of ln(S/2√2) against τ − τ_ref, with τ_ref set
/// to the earliest storage time.
///
/// Two points are interpolated exactly. Flat or rising data and data that
/// never drop below 2√2 produce warnings rather than errors.
pub fn fit_decay(points: &[DecayPoint]) -> Result<DecayFit> {
    if points.len() < 2 {
        return Err(Error::Input("decay fit needs at least two points".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if !(p.tau.is_finite() && p.tau >= 0.0) {
            return Err(Error::Input(format!("point {i}: storage time {} is invalid", p.tau)));
        }
        if !(p.s > 0.0 && p.s.is_finite()) {
            return Err(Error::Input(format!("point {i}: S = {} must be positive", p.s)));
        }
        if !(p.s_err > 0.0 && p.s_err.is_finite()) {
            return Err(Error::Input(format!("point {i}: S error {} must be positive", p.s_err)));
        }
    }
    if points.windows(2).any(|w| w[1].tau <= w[0].tau) {
        return Err(Error::Input("storage times must be strictly increasing".into()));
    }

    let mut warnings = Vec::new();
    if points.iter().all(|p| p.s >= S_MAX) {
        warnings.push("every S is at or above 2√2; visibility is clamped at the maximum".into());
    }

    let tau_ref = points[0].tau;
    // y = ln(S/2√2), σ_y = σ_S / S.
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let x = p.tau - tau_ref;
        let y = (p.s / S_MAX).ln();
        let w = (p.s / p.s_err).powi(2);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det <= 0.0 {
        return Err(Error::Estimation("degenerate storage-time design".into()));
    }
    let a = (sxx * sy - sx * sxy) / det;
    let b = (sw * sxy - sx * sy) / det;
    let (var_a, var_b, cov_ab) = (sxx / det, sw / det, -sx / det);

    let v_ref = a.exp();
    let (tau_c, covariance) = if b < 0.0 {
        // tau_c = −1/b, v_ref = e^a (delta method).
        let tau_c = -1.0 / b;
        let d_tc = 1.0 / (b * b);
        let cov = [
            [d_tc * d_tc * var_b, d_tc * v_ref * cov_ab],
            [d_tc * v_ref * cov_ab, v_ref * v_ref * var_a],
        ];
        (tau_c, cov)
    } else {
        warnings.push(format!("non-decreasing data (slope {b:.3e} per µs); no decay resolved"));
        (f64::INFINITY, [[f64::INFINITY, 0.0], [0.0, v_ref * v_ref * var_a]])
    };

    // S(τ) = 2 ⇔ τ = τ_ref + τ_c ln(√2 v_ref).
    let lifetime_chsh = if v_ref * S_MAX > 2.0 {
        Some(if tau_c.is_infinite() {
            f64::INFINITY
        } else {
            tau_ref + tau_c * (SQRT_2 * v_ref).ln()
        })
    } else {
        warnings.push("S never exceeds 2 in the fitted model".into());
        None
    };

    Ok(DecayFit {
        tau_ref,
        tau_c,
        v_ref,
        lifetime_chsh,
        covariance,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(tau: f64, s: f64) -> DecayPoint {
        DecayPoint { tau, s, s_err: 0.02 }
    }

    #[test]
    fn two_published_points() {
        let fit = fit_decay(&[pt(0.7, 2.30), pt(30.0, 2.03)]).unwrap();
        // Two-point oracle: tau_c = Δτ / ln(S_a/S_b).
        let tc = 29.3 / (2.30f64 / 2.03).ln();
        assert!((fit.tau_c - tc).abs() < 1e-9);
        assert!((fit.tau_c - 235.0).abs() < 1.0);
        let life = fit.lifetime_chsh.unwrap();
        assert!((life - 33.0).abs() < 1.0, "{life}");
        assert!((fit.bell_s(life) - 2.0).abs() < 1e-12);
        assert!(fit.warnings.is_empty());
    }

    #[test]
    fn exact_exponential_round_trip() {
        let (v, tc) = (0.95, 100.0);
        let pts: Vec<_> = [0.0, 10.0, 25.0, 60.0]
            .iter()
            .map(|&t| pt(t, S_MAX * v * (-t / tc).exp()))
            .collect();
        let fit = fit_decay(&pts).unwrap();
        assert!((fit.tau_c - tc).abs() < 1e-9);
        assert!((fit.v_ref - v).abs() < 1e-12);
    }

    #[test]
    fn flat_data_warns() {
        let fit = fit_decay(&[pt(1.0, 2.9), pt(2.0, 2.9)]).unwrap();
        assert!(fit.tau_c.is_infinite());
        assert_eq!(fit.warnings.len(), 2);
        let json = serde_json::to_string(&fit).unwrap();
        assert!(json.contains("\"tau_c\":\"inf\""));
    }

    #[test]
    fn bad_input() {
        assert!(fit_decay(&[pt(1.0, 2.5)]).is_err());
        assert!(fit_decay(&[pt(2.0, 2.5), pt(1.0, 2.4)]).is_err());
        assert!(fit_decay(&[pt(1.0, -2.5), pt(2.0, 2.4)]).is_err());
    }
}
