//! Linear-inversion two-qubit tomography and projection onto physical states.
//!
//! Observable convention: H/V ↔ σ_z, D/A ↔ σ_x, R/L ↔ σ_y, with the
//! transmitted port (H, D, R) as the +1 eigenstate.

use nalgebra::{Matrix2, Vector4};
use num_complex::Complex64;

use crate::analyzer::{AnalyzerSetting, SettingPair};
use crate::counts::CoincidenceTable;
use crate::error::{Error, Result};
use crate::state::{hermitian_eigenvalues, CMatrix4, DensityMatrix, ALGEBRAIC_TOL};

/// Analyzer per measured Pauli axis: z (H/V), x (D/A), y (R/L).
pub const TOMOGRAPHY_BASES: [AnalyzerSetting; 3] = [
    AnalyzerSetting::Linear(0.0),
    AnalyzerSetting::Linear(45.0),
    AnalyzerSetting::Circular,
];

/// Coincidence frequencies `[D1T1, D1T2, D2T1, D2T2]` for the nine basis
/// pairs, indexed `3 * stokes_basis + anti_stokes_basis`.
pub type TomographyData = [[f64; 4]; 9];

/// The nine setting pairs, Stokes basis major.
pub fn tomography_settings() -> Vec<SettingPair> {
    let mut out = Vec::with_capacity(9);
    for s in TOMOGRAPHY_BASES {
        for a in TOMOGRAPHY_BASES {
            out.push(SettingPair::new(s, a));
        }
    }
    out
}

fn pauli(axis: usize) -> Matrix2<Complex64> {
    let c = |re, im| Complex64::new(re, im);
    let z = c(0.0, 0.0);
    match axis {
        0 => Matrix2::identity(),
        1 => Matrix2::new(c(1.0, 0.0), z, z, c(-1.0, 0.0)), // σ_z
        2 => Matrix2::new(z, c(1.0, 0.0), c(1.0, 0.0), z),  // σ_x
        3 => Matrix2::new(z, c(0.0, -1.0), c(0.0, 1.0), z), // σ_y
        _ => unreachable!("two-qubit Pauli index"),
    }
}

/// Exact outcome probabilities of `rho` for all nine basis pairs.
pub fn exact_frequencies(rho: &DensityMatrix) -> TomographyData {
    let mut out = [[0.0; 4]; 9];
    for (slot, pair) in out.iter_mut().zip(tomography_settings()) {
        *slot = rho.joint_probabilities(&pair);
    }
    out
}

/// Extracts the nine basis-pair quadruples from a coincidence table.
pub fn tomography_data(table: &CoincidenceTable) -> Result<TomographyData> {
    let mut out = [[0.0; 4]; 9];
    for (slot, pair) in out.iter_mut().zip(tomography_settings()) {
        let counts = table.get(&pair).ok_or_else(|| {
            Error::Input(format!(
                "tomography setting ({}, {}) missing from table",
                pair.stokes, pair.anti_stokes
            ))
        })?;
        *slot = counts.frequencies();
    }
    Ok(out)
}

/// Reconstructs ρ = ¼ Σ s_jk σ_j ⊗ σ_k from frequencies.
///
/// The result is Hermitian with unit trace but may have negative
/// eigenvalues; see [`project_physical`].
pub fn reconstruct_from_frequencies(data: &TomographyData) -> Result<DensityMatrix> {
    // Normalized probabilities per basis pair.
    let mut p = [[0.0; 4]; 9];
    for (i, (dst, q)) in p.iter_mut().zip(data).enumerate() {
        if q.iter().any(|c| *c < 0.0 || !c.is_finite()) {
            return Err(Error::Input(format!("invalid counts at basis pair {i}: {q:?}")));
        }
        let total: f64 = q.iter().sum();
        if total <= 0.0 {
            return Err(Error::Input(format!("basis pair {i} has zero coincidences")));
        }
        *dst = q.map(|c| c / total);
    }

    // s[j][k] with j, k ∈ {I, z, x, y}.
    let mut s = [[0.0; 4]; 4];
    s[0][0] = 1.0;
    for js in 0..3 {
        for ka in 0..3 {
            let [tt, tr, rt, rr] = p[3 * js + ka];
            s[js + 1][ka + 1] = tt - tr - rt + rr;
            // Single-arm expectations are averaged over the other arm's bases.
            s[js + 1][0] += (tt + tr - rt - rr) / 3.0;
            s[0][ka + 1] += (tt - tr + rt - rr) / 3.0;
        }
    }

    let mut rho = CMatrix4::zeros();
    for (j, row) in s.iter().enumerate() {
        for (k, &sjk) in row.iter().enumerate() {
            rho += pauli(j).kronecker(&pauli(k)).scale(sjk);
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(rho.scale(0.25)))
}

/// Linear-inversion reconstruction from a measured coincidence table.
pub fn tomo_reconstruct(table: &CoincidenceTable) -> Result<DensityMatrix> {
    reconstruct_from_frequencies(&tomography_data(table)?)
}

/// Applies the eigenvalue redistribution rule to a spectrum.
///
/// Repeatedly zeroes the most negative eigenvalue and spreads its weight
/// evenly over the strictly positive ones, then renormalizes to unit sum.
pub fn redistribute_spectrum(ev: &mut [f64]) {
    loop {
        let (imin, &min) = ev
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty spectrum");
        if min >= 0.0 {
            break;
        }
        ev[imin] = 0.0;
        let positive = ev.iter().filter(|&&x| x > 0.0).count();
        if positive == 0 {
            break;
        }
        let share = min / positive as f64;
        for x in ev.iter_mut().filter(|x| **x > 0.0) {
            *x += share;
        }
    }
    let sum: f64 = ev.iter().sum();
    if sum > 0.0 {
        for x in ev.iter_mut() {
            *x /= sum;
        }
    }
}

/// Nearest-physical correction of a Hermitian, unit-trace matrix.
pub fn project_physical(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let m = rho.matrix();
    let herm_dev = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm_dev > ALGEBRAIC_TOL {
        return Err(Error::Input(format!("matrix is not Hermitian (deviation {herm_dev:e})")));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > ALGEBRAIC_TOL || tr.im.abs() > ALGEBRAIC_TOL {
        return Err(Error::Input(format!("matrix trace {} is not 1", tr.re)));
    }
    if hermitian_eigenvalues(m)[0] >= 0.0 {
        return Ok(*rho);
    }

    let herm = (m + m.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    redistribute_spectrum(&mut ev);
    let d = Vector4::from_iterator(ev.into_iter().map(Complex64::from));
    let v = eig.eigenvectors;
    let out = v * CMatrix4::from_diagonal(&d) * v.adjoint();
    let out = (out + out.adjoint()).scale(0.5);
    Ok(DensityMatrix::from_matrix_unchecked(out))
}
