use nalgebra::Vector4;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{validate_density, CMatrix4, DensityMatrix};

/// Eigenvalues below this are treated as exact zeros before taking roots.
const SQRT_FLOOR: f64 = 1e-13;

fn check(rho: &DensityMatrix, name: &str) -> Result<()> {
    let violations = validate_density(rho.matrix());
    if let Some(v) = violations.first() {
        return Err(Error::Input(format!("{name} is not a valid density matrix: {v}")));
    }
    Ok(())
}

fn hermitian_part(m: &CMatrix4) -> CMatrix4 {
    (m + m.adjoint()).scale(0.5)
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn sqrtm_psd(m: &CMatrix4) -> CMatrix4 {
    let eig = hermitian_part(m).symmetric_eigen();
    let roots = eig
        .eigenvalues
        .map(|x| if x > SQRT_FLOOR { Complex64::from(x.sqrt()) } else { Complex64::from(0.0) });
    let v = eig.eigenvectors;
    hermitian_part(&(v * CMatrix4::from_diagonal(&roots) * v.adjoint()))
}

/// Uhlmann fidelity F = (Tr √(√ρ σ √ρ))².
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check(rho, "rho")?;
    check(sigma, "sigma")?;
    let r = sqrtm_psd(rho.matrix());
    let inner = hermitian_part(&(r * sigma.matrix() * r));
    let tr: f64 = inner
        .symmetric_eigenvalues()
        .iter()
        .map(|&x| if x > SQRT_FLOOR { x.sqrt() } else { 0.0 })
        .sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// ⟨ψ|ρ|ψ⟩ for a normalized pure state ψ.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &Vector4<Complex64>) -> Result<f64> {
    check(rho, "rho")?;
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Input(format!("state vector norm {norm} is not 1")));
    }
    Ok((psi.adjoint() * rho.matrix() * psi)[(0, 0)].re.clamp(0.0, 1.0))
}
