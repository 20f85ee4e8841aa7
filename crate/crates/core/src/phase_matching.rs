//! Planar wavevector geometry of anti-Stokes emission.
//!
//! All wavevectors share one optical frequency and are given in units of
//! |k|. The Stokes collection axis is z; angles are in degrees, measured in
//! the collection plane. The read beam of mode i counter-propagates its
//! write beam, so θ_Ri = θ_wi.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default directionality threshold on the residual.
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// k_As = k_wk + k_Rl − k_S, returned as (z, x) components.
pub fn anti_stokes_wavevector(theta_wk: f64, theta_rl: f64, theta_s: f64) -> [f64; 2] {
    let (sw, cw) = theta_wk.to_radians().sin_cos();
    let (sr, cr) = theta_rl.to_radians().sin_cos();
    let (ss, cs) = theta_s.to_radians().sin_cos();
    [cw - cr - cs, sw - sr - ss]
}

/// |‖k_As‖ − 1|; zero iff the emission is phase matched.
pub fn pmc_residual(theta_wk: f64, theta_rl: f64, theta_s: f64) -> f64 {
    let [z, x] = anti_stokes_wavevector(theta_wk, theta_rl, theta_s);
    (z.hypot(x) - 1.0).abs()
}

/// ∂‖k_As‖/∂θ_wk, per degree.
pub fn wavevector_norm_slope(theta_wk: f64, theta_rl: f64, theta_s: f64) -> f64 {
    let [z, x] = anti_stokes_wavevector(theta_wk, theta_rl, theta_s);
    let (sw, cw) = theta_wk.to_radians().sin_cos();
    (-z * sw + x * cw) / z.hypot(x) * 1f64.to_radians()
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

/// A fan of write beams sharing one Stokes collection direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamGeometry {
    pub write_angles: Vec<f64>,
    #[serde(default)]
    pub stokes_angle: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl BeamGeometry {
    pub fn new(write_angles: Vec<f64>) -> Result<Self> {
        let g = Self {
            write_angles,
            stokes_angle: 0.0,
            tolerance: DEFAULT_TOLERANCE,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn modes(&self) -> usize {
        self.write_angles.len()
    }

    /// Read angles; each read beam is antiparallel to its write beam.
    pub fn read_angles(&self) -> &[f64] {
        &self.write_angles
    }

    /// Smallest pairwise separation of write angles (∞ for a single beam).
    pub fn min_separation(&self) -> f64 {
        let mut sorted = self.write_angles.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.write_angles.is_empty() {
            return Err(invalid("write_angles", "at least one beam is required"));
        }
        for &a in &self.write_angles {
            if !(a > -90.0 && a < 90.0) {
                return Err(invalid("write_angles", format!("{a} outside (-90, 90)")));
            }
        }
        if !(self.stokes_angle > -90.0 && self.stokes_angle < 90.0) {
            return Err(invalid("stokes_angle", format!("{} outside (-90, 90)", self.stokes_angle)));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(invalid("tolerance", "must be finite and >= 0"));
        }
        if self.min_separation() <= 0.0 {
            return Err(invalid("write_angles", "write angles must be pairwise distinct"));
        }
        Ok(())
    }
}

/// One off-diagonal pair that the tolerance classifies as phase matched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegenerateEntry {
    pub write_index: usize,
    pub read_index: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryScan {
    pub write_angles: Vec<f64>,
    pub stokes_angle: f64,
    pub tolerance: f64,
    /// residuals[k][l] for write beam k read by beam l.
    pub residuals: Vec<Vec<f64>>,
    /// Share of off-diagonal entries within tolerance (0 for a single beam).
    pub directional_fraction: f64,
    /// Off-diagonal on-shell entries, such as collinear cross terms.
    pub degenerate: Vec<DegenerateEntry>,
}

impl GeometryScan {
    pub fn is_nondirectional(&self, k: usize, l: usize) -> bool {
        self.residuals[k][l] > self.tolerance
    }

    /// Long-format CSV: `k,l,theta_w,theta_r,residual,directional`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "l", "theta_w", "theta_r", "residual", "directional"])?;
        for (k, row) in self.residuals.iter().enumerate() {
            for (l, r) in row.iter().enumerate() {
                out.write_record([
                    (k + 1).to_string(),
                    (l + 1).to_string(),
                    self.write_angles[k].to_string(),
                    self.write_angles[l].to_string(),
                    format!("{r:e}"),
                    (!self.is_nondirectional(k, l)).to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Row of the residual CSV.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ResidualRow {
    pub k: usize,
    pub l: usize,
    pub theta_w: f64,
    pub theta_r: f64,
    pub residual: f64,
    pub directional: bool,
}

pub fn read_residual_csv<R: Read>(r: R) -> Result<Vec<ResidualRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<ResidualRow>, _>>()?;
    if rows.iter().any(|row| row.k == 0 || row.l == 0) {
        return Err(Error::Input("beam indices are 1-based".into()));
    }
    Ok(rows)
}

/// Residual matrix of every write/read combination.
pub fn scan_geometry(geometry: &BeamGeometry) -> Result<GeometryScan> {
    geometry.validate()?;
    let m = geometry.modes();
    let reads = geometry.read_angles();
    let residuals: Vec<Vec<f64>> = geometry
        .write_angles
        .iter()
        .map(|&w| reads.iter().map(|&r| pmc_residual(w, r, geometry.stokes_angle)).collect())
        .collect();

    let mut degenerate = Vec::new();
    for (k, row) in residuals.iter().enumerate() {
        for (l, &r) in row.iter().enumerate() {
            if k != l && r <= geometry.tolerance {
                degenerate.push(DegenerateEntry {
                    write_index: k,
                    read_index: l,
                    residual: r,
                });
            }
        }
    }
    let cross = m * (m - 1);
    let directional_fraction = if cross == 0 {
        0.0
    } else {
        degenerate.len() as f64 / cross as f64
    };
    Ok(GeometryScan {
        write_angles: geometry.write_angles.clone(),
        stokes_angle: geometry.stokes_angle,
        tolerance: geometry.tolerance,
        residuals,
        directional_fraction,
        degenerate,
    })
}
