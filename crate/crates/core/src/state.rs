//! Two-qubit polarization states of the Stokes/anti-Stokes photon pair.
//!
//! Every matrix in this crate uses the ordered basis (HH, HV, VH, VV), where
//! the first letter is the Stokes photon and the second the anti-Stokes
//! photon.

use std::fmt;

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analyzer::{Outcome, SettingPair};
use crate::error::{Error, Result};

pub type CMatrix4 = Matrix4<Complex64>;

/// Tolerance for algebraic identities (hermiticity, trace, purity).
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Slack allowed below zero for the smallest eigenvalue.
pub const PSD_TOL: f64 = 1e-10;

pub const BASIS_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];

/// A 4×4 two-qubit density matrix.
///
/// Constructors in this crate return physical states. Linear-inversion
/// tomography can produce matrices that are not positive semidefinite;
/// those are wrapped with [`DensityMatrix::from_matrix_unchecked`] and
/// should be passed through `project_physical` before further use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(CMatrix4);

impl DensityMatrix {
    /// Wraps a matrix after checking every density-matrix invariant.
    pub fn new(m: CMatrix4) -> Result<Self> {
        let violations = validate_density(&m);
        if violations.is_empty() {
            Ok(Self(m))
        } else {
            Err(Error::Input(format!(
                "not a density matrix: {}",
                violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
            )))
        }
    }

    pub fn from_matrix_unchecked(m: CMatrix4) -> Self {
        Self(m)
    }

    pub fn maximally_mixed() -> Self {
        Self(CMatrix4::identity().scale(0.25))
    }

    pub fn from_pure(psi: &Vector4<Complex64>) -> Self {
        let n = psi.norm_squared();
        Self(psi * psi.adjoint() / Complex64::from(n))
    }

    pub fn matrix(&self) -> &CMatrix4 {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix4 {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Eigenvalues in ascending order (the matrix is treated as Hermitian).
    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.0)
    }

    /// Joint outcome probabilities `[TT, TR, RT, RR]` (Stokes port first).
    pub fn joint_probabilities(&self, pair: &SettingPair) -> [f64; 4] {
        let mut out = [0.0; 4];
        for s in Outcome::BOTH {
            let ps = pair.stokes.projector(s);
            for a in Outcome::BOTH {
                let pa = pair.anti_stokes.projector(a);
                let op = ps.kronecker(&pa);
                out[2 * s.index() + a.index()] = (self.0 * op).trace().re;
            }
        }
        out
    }

    /// Expectation of the Stokes-side projector alone, Tr[ρ (P ⊗ I)].
    pub fn stokes_marginal(&self, pair: &SettingPair, outcome: Outcome) -> f64 {
        let op = pair.stokes.projector(outcome).kronecker(&Matrix2::identity());
        (self.0 * op).trace().re
    }

    /// Exchanges the Stokes and anti-Stokes subsystems (HV ↔ VH).
    pub fn swap_subsystems(&self) -> Self {
        Self(swap_subsystems(&self.0))
    }
}

/// Permutation matrix exchanging the two qubits in (HH, HV, VH, VV) order.
pub fn swap_subsystems(m: &CMatrix4) -> CMatrix4 {
    const PERM: [usize; 4] = [0, 2, 1, 3];
    CMatrix4::from_fn(|r, c| m[(PERM[r], PERM[c])])
}

pub(crate) fn hermitian_eigenvalues(m: &CMatrix4) -> [f64; 4] {
    let eig = m.symmetric_eigen();
    let mut ev = [0.0; 4];
    for (dst, src) in ev.iter_mut().zip(eig.eigenvalues.iter()) {
        *dst = *src;
    }
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

fn check_theta(theta_deg: f64) -> Result<()> {
    if (0.0..=90.0).contains(&theta_deg) {
        Ok(())
    } else {
        Err(Error::Domain(format!("entanglement angle {theta_deg} deg outside [0, 90]")))
    }
}

/// Pure state cos(θ)|HH> + sin(θ)|VV>.
pub fn bell_state(theta_deg: f64) -> Result<DensityMatrix> {
    check_theta(theta_deg)?;
    let (s, c) = theta_deg.to_radians().sin_cos();
    let psi = Vector4::new(
        Complex64::from(c),
        Complex64::from(0.0),
        Complex64::from(0.0),
        Complex64::from(s),
    );
    Ok(DensityMatrix(psi * psi.adjoint()))
}

/// Isotropic mixture V·bell_state(θ) + (1 − V)·I/4.
pub fn werner_state(theta_deg: f64, visibility: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::Domain(format!("visibility {visibility} outside [0, 1]")));
    }
    let bell = bell_state(theta_deg)?;
    let mixed = CMatrix4::identity().scale(0.25 * (1.0 - visibility));
    Ok(DensityMatrix(bell.0.scale(visibility) + mixed))
}

/// A broken density-matrix invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonFinite,
    NotHermitian { max_deviation: f64 },
    Trace { trace: f64 },
    NotPositive { min_eigenvalue: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite => f.write_str("non-finite entry"),
            Violation::NotHermitian { max_deviation } => {
                write!(f, "not Hermitian (max |ρ − ρ†| = {max_deviation:e})")
            }
            Violation::Trace { trace } => write!(f, "trace {trace} ≠ 1"),
            Violation::NotPositive { min_eigenvalue } => {
                write!(f, "negative eigenvalue {min_eigenvalue:e}")
            }
        }
    }
}

/// Lists every density-matrix invariant that `m` breaks; empty when valid.
pub fn validate_density(m: &CMatrix4) -> Vec<Violation> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return vec![Violation::NonFinite];
    }
    let mut out = Vec::new();
    let herm_dev = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm_dev > ALGEBRAIC_TOL {
        out.push(Violation::NotHermitian {
            max_deviation: herm_dev,
        });
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > ALGEBRAIC_TOL || tr.im.abs() > ALGEBRAIC_TOL {
        out.push(Violation::Trace { trace: tr.re });
    }
    // The eigenvalue check is only meaningful for the Hermitian part.
    let herm = (m + m.adjoint()).scale(0.5);
    let min_ev = hermitian_eigenvalues(&herm)[0];
    if min_ev < -PSD_TOL {
        out.push(Violation::NotPositive {
            min_eigenvalue: min_ev,
        });
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityJson {
    basis: Vec<String>,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut entries = Vec::with_capacity(16);
        for r in 0..4 {
            for c in 0..4 {
                let z = self.0[(r, c)];
                entries.push([z.re, z.im]);
            }
        }
        DensityJson {
            basis: BASIS_LABELS.iter().map(|s| s.to_string()).collect(),
            entries,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = DensityJson::deserialize(d)?;
        if j.basis != BASIS_LABELS {
            return Err(D::Error::custom(format!(
                "basis must be {BASIS_LABELS:?}, got {:?}",
                j.basis
            )));
        }
        if j.entries.len() != 16 {
            return Err(D::Error::custom("expected 16 entries"));
        }
        Ok(DensityMatrix(CMatrix4::from_fn(|r, c| {
            let [re, im] = j.entries[4 * r + c];
            Complex64::new(re, im)
        })))
    }
}
