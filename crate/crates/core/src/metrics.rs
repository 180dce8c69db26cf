//! Distances between Gaussian models and between point clouds.

use nalgebra::DMatrix;

use crate::correction::matching::{match_squared, squared_euclidean};
use crate::error::{CoreError, Result};
use crate::model::{check_dim, to_param_vector, Dataset, GaussianParams};

fn symmetric_eigenvalues(m: DMatrix<f64>) -> Result<Vec<f64>> {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(CoreError::EigFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::EigFailure);
    }
    Ok(eig.eigenvalues.iter().copied().collect())
}

/// Square root of a PSD matrix with negative eigenvalues clamped to zero.
fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(CoreError::EigFailure)?;
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Closed-form Wasserstein-2 distance between two Gaussians.
pub fn gaussian_w2(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    check_dim(p.dim(), q.dim())?;
    let mean_sq = (p.mean() - q.mean()).norm_squared();
    if p.cov() == q.cov() {
        return Ok(mean_sq.sqrt());
    }
    let root_p = psd_sqrt(p.cov())?;
    let inner = &root_p * q.cov() * &root_p;
    let cross: f64 = symmetric_eigenvalues(inner)?
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    let total = mean_sq + p.cov().trace() + q.cov().trace() - 2.0 * cross;
    Ok(total.max(0.0).sqrt())
}

/// Wasserstein-2 distance between two equal-size empirical measures,
/// through an optimal permutation coupling.
pub fn empirical_w2(a: &Dataset, b: &Dataset) -> Result<f64> {
    let perm = match_squared(a, b)?;
    let total: f64 = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| squared_euclidean(a.point(i), b.point(j)))
        .sum();
    Ok((total / a.len() as f64).sqrt())
}

/// Euclidean distance between flattened parameter vectors.
pub fn param_distance(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    check_dim(p.dim(), q.dim())?;
    let (a, b) = (to_param_vector(p), to_param_vector(q));
    Ok(a.entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}
