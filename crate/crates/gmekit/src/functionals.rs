//! Scalar functionals on density operators: entropies, purity-type quantities,
//! trace norm, matrix square root, and the three fidelities.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{DensityOperator, EIG_CLAMP};

/// Logarithm base for the von Neumann entropy. Base 2 is the default; the
/// Rényi entropy always uses the natural log.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

impl LogBase {
    fn ln_of_base(self) -> f64 {
        match self {
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::E => 1.0,
        }
    }
}

/// Entropy-family parameters: Tsallis order q > 1, Rényi order 0 < alpha < 1,
/// and the von Neumann log base.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    pub q: f64,
    pub alpha: f64,
    pub log_base: LogBase,
}

impl Default for EntropyParams {
    fn default() -> Self {
        EntropyParams {
            q: 2.0,
            alpha: 0.5,
            log_base: LogBase::Two,
        }
    }
}

impl EntropyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.q.is_finite() && self.q > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Tsallis order q must be finite and > 1, got {}",
                self.q
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Renyi order alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

fn require_hermitian(m: &DMatrix<Complex64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    let dev = (m - m.adjoint()).camax();
    if dev > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "matrix is not Hermitian (deviation {dev:.3e})"
        )));
    }
    Ok(())
}

/// Rank-truncation threshold: eigenvalues below d·ε·λ_max are numerical zeros.
/// Square roots amplify them (√1e−17 ≈ 3e−9), so they must not reach a sqrt.
pub fn spectral_cutoff(eigs: &[f64]) -> f64 {
    let top = eigs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    top.max(1.0) * eigs.len() as f64 * f64::EPSILON
}

/// Eigenvalues of a Hermitian matrix, descending. No positivity requirement.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    require_hermitian(m)?;
    let mut vals: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(vals)
}

/// Von Neumann entropy −Σ λ log λ in the chosen base, with 0·log 0 = 0.
pub fn von_neumann(rho: &DensityOperator, base: LogBase) -> f64 {
    von_neumann_spectrum(&rho.eigensystem().0, base)
}

/// [`von_neumann`] on a known spectrum.
pub fn von_neumann_spectrum(vals: &[f64], base: LogBase) -> f64 {
    let nats: f64 = vals
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum();
    (nats / base.ln_of_base()).max(0.0)
}

/// Tsallis entropy (1−q)⁻¹ [tr(ρ^q) − 1] for q > 1.
pub fn tsallis(rho: &DensityOperator, q: f64) -> Result<f64> {
    tsallis_spectrum(&rho.eigensystem().0, q)
}

/// [`tsallis`] on a known spectrum.
pub fn tsallis_spectrum(vals: &[f64], q: f64) -> Result<f64> {
    if !(q.is_finite() && q > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Tsallis order q must be finite and > 1, got {q}"
        )));
    }
    let power_sum: f64 = vals.iter().filter(|&&l| l > 0.0).map(|&l| l.powf(q)).sum();
    Ok(((power_sum - 1.0) / (1.0 - q)).max(0.0))
}

/// Rényi entropy (1−α)⁻¹ ln tr(ρ^α) for 0 < α < 1. Natural log.
pub fn renyi(rho: &DensityOperator, alpha: f64) -> Result<f64> {
    renyi_spectrum(&rho.eigensystem().0, alpha)
}

/// [`renyi`] on a known spectrum.
pub fn renyi_spectrum(vals: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Renyi order alpha must lie in (0, 1), got {alpha}"
        )));
    }
    // α < 1 inflates numerical zeros ((1e−16)^½ = 1e−8); truncate first.
    let cutoff = spectral_cutoff(vals);
    let power_sum: f64 = vals
        .iter()
        .filter(|&&l| l > cutoff)
        .map(|&l| l.powf(alpha))
        .sum();
    Ok((power_sum.ln() / (1.0 - alpha)).max(0.0))
}

/// Trace norm Σ|λ| of a Hermitian matrix.
pub fn trace_norm(m: &DMatrix<Complex64>) -> Result<f64> {
    Ok(hermitian_eigenvalues(m)?.iter().map(|l| l.abs()).sum())
}

/// tr √ρ = Σ √λ, truncated like [`matrix_sqrt`].
pub fn trace_sqrt(rho: &DensityOperator) -> f64 {
    let (vals, _) = rho.eigensystem();
    let cutoff = spectral_cutoff(&vals);
    vals.iter()
        .filter(|&&l| l > cutoff)
        .map(|&l| l.sqrt())
        .sum()
}

/// Square root of a PSD Hermitian matrix via its eigendecomposition.
pub fn matrix_sqrt(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    require_hermitian(m)?;
    let herm = (m + m.adjoint()) * Complex64::from(0.5);
    let eig = herm.symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -EIG_CLAMP {
        return Err(Error::InvalidArgument(format!(
            "matrix_sqrt needs a PSD input; found eigenvalue {min:.3e}"
        )));
    }
    let d = m.nrows();
    let all: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    let cutoff = spectral_cutoff(&all);
    let mut scaled = eig.eigenvectors.clone();
    for j in 0..d {
        let lambda = eig.eigenvalues[j];
        let root = Complex64::from(if lambda > cutoff { lambda.sqrt() } else { 0.0 });
        for i in 0..d {
            scaled[(i, j)] *= root;
        }
    }
    Ok(&scaled * eig.eigenvectors.adjoint())
}

fn check_same_dim(rho: &DensityOperator, sigma: &DensityOperator) -> Result<()> {
    if rho.matrix().nrows() != sigma.matrix().nrows() {
        return Err(Error::InvalidArgument(format!(
            "fidelity needs equal dimensions, got {} and {}",
            rho.matrix().nrows(),
            sigma.matrix().nrows()
        )));
    }
    Ok(())
}

/// Uhlmann fidelity (tr √(√ρ σ √ρ))².
pub fn fidelity_uhlmann(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    check_same_dim(rho, sigma)?;
    let s = matrix_sqrt(rho.matrix())?;
    let inner = &s * sigma.matrix() * &s;
    let eigs = hermitian_eigenvalues(&inner)?;
    let cutoff = spectral_cutoff(&eigs);
    let sum_roots: f64 = eigs
        .iter()
        .filter(|&&l| l > cutoff)
        .map(|&l| l.sqrt())
        .sum();
    Ok((sum_roots * sum_roots).clamp(0.0, 1.0))
}

/// √F(ρ,σ).
pub fn fidelity_sqrt(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    Ok(fidelity_uhlmann(rho, sigma)?.sqrt())
}

/// Affinity fidelity [tr(√ρ √σ)]².
pub fn fidelity_affinity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    check_same_dim(rho, sigma)?;
    let a = matrix_sqrt(rho.matrix())?;
    let b = matrix_sqrt(sigma.matrix())?;
    let t = (&a * &b).trace().re;
    Ok((t * t).clamp(0.0, 1.0))
}
