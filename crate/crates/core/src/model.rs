//! Multivariate Gaussian model family: datasets, parameters, exact
//! maximum-likelihood fitting, sampling and density evaluation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};

/// Jitter added to every fitted covariance unless configured otherwise.
pub const DEFAULT_COV_FLOOR: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-12;

/// A finite point cloud in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
}

impl Dataset {
    pub fn empty(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::invalid("dimension", "must be at least 1"));
        }
        Ok(Self {
            dim,
            coords: Vec::new(),
        })
    }

    pub fn with_capacity(dim: usize, points: usize) -> Result<Self> {
        let mut data = Self::empty(dim)?;
        data.coords.reserve(points * dim);
        Ok(data)
    }

    /// Builds a dataset from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::invalid("dimension", "must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(CoreError::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::invalid("point", "coordinates must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<I, P>(dim: usize, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut data = Self::empty(dim)?;
        for p in points {
            data.push(p.as_ref())?;
        }
        Ok(data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                found: point.len(),
            });
        }
        if point.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::invalid("point", "coordinates must be finite"));
        }
        self.coords.extend_from_slice(point);
        Ok(())
    }

    pub fn extend_from(&mut self, other: &Dataset) -> Result<()> {
        check_dim(self.dim, other.dim)?;
        self.coords.extend_from_slice(&other.coords);
        Ok(())
    }

    /// Points in the order given by `indices`.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Dataset {
            dim: self.dim,
            coords,
        }
    }

    // Points are finite by construction; only internal callers use this.
    pub(crate) fn push_unchecked(&mut self, point: &[f64]) {
        debug_assert_eq!(point.len(), self.dim);
        self.coords.extend_from_slice(point);
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(CoreError::DimensionMismatch { expected, found })
    }
}

/// Mean and covariance of a multivariate normal.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianParams {
    /// Validates symmetry (relative tolerance 1e-12), positive
    /// semi-definiteness and finiteness.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(CoreError::invalid("dimension", "must be at least 1"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                found: cov.nrows().max(cov.ncols()),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("parameters", "entries must be finite"));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in (i + 1)..d {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(CoreError::invalid("covariance", "not symmetric"));
                }
            }
        }
        let eig = cov
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 10_000)
            .ok_or(CoreError::EigFailure)?;
        if eig.eigenvalues.min() < -SYMMETRY_TOL * scale {
            return Err(CoreError::invalid(
                "covariance",
                "has a negative eigenvalue",
            ));
        }
        Ok(Self { mean, cov })
    }

    pub fn from_slices(mean: &[f64], cov_row_major: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov_row_major.len() != d * d {
            return Err(CoreError::DimensionMismatch {
                expected: d * d,
                found: cov_row_major.len(),
            });
        }
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_row_slice(d, d, cov_row_major),
        )
    }

    /// `N(0, I_dim)`.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::isotropic(&vec![0.0; dim], 1.0)
    }

    pub fn isotropic(mean: &[f64], variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal_element(d, d, variance),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.cov[(i, j)] == 0.0))
    }
}

/// Flattened parameters: mean entries, then the full covariance row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    dim: usize,
    entries: Vec<f64>,
}

impl ParamVector {
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim + dim * dim {
            return Err(CoreError::DimensionMismatch {
                expected: dim + dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

pub fn to_param_vector(params: &GaussianParams) -> ParamVector {
    let d = params.dim();
    let mut entries = Vec::with_capacity(d + d * d);
    entries.extend(params.mean.iter());
    for i in 0..d {
        for j in 0..d {
            entries.push(params.cov[(i, j)]);
        }
    }
    ParamVector { dim: d, entries }
}

pub fn from_param_vector(vector: &ParamVector) -> Result<GaussianParams> {
    let d = vector.dim;
    GaussianParams::from_slices(&vector.entries[..d], &vector.entries[d..])
}

/// Maximum-likelihood Gaussian: sample mean and divisor-`n` covariance, plus
/// `cov_floor * I`.
pub fn fit_gaussian(data: &Dataset, cov_floor: f64) -> Result<GaussianParams> {
    fit_gaussian_parts(&[data], cov_floor)
}

/// Fits the union of several datasets without concatenating them.
pub fn fit_gaussian_parts(parts: &[&Dataset], cov_floor: f64) -> Result<GaussianParams> {
    let first = parts.first().ok_or(CoreError::EmptyOrSingleton(0))?;
    let d = first.dim();
    for p in parts {
        check_dim(d, p.dim())?;
    }
    if !(cov_floor >= 0.0 && cov_floor.is_finite()) {
        return Err(CoreError::invalid("cov_floor", format!("{cov_floor}")));
    }
    let n: usize = parts.iter().map(|p| p.len()).sum();
    if n < 2 {
        return Err(CoreError::EmptyOrSingleton(n));
    }
    let points = || parts.iter().flat_map(|p| p.iter());

    let mut mean = vec![0.0; d];
    for x in points() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    let inv_n = 1.0 / n as f64;
    mean.iter_mut().for_each(|m| *m *= inv_n);

    let mut cov = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for x in points() {
        for k in 0..d {
            centered[k] = x[k] - mean[k];
        }
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] * inv_n;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
        cov[(i, i)] += cov_floor;
    }
    GaussianParams::new(DVector::from_vec(mean), cov)
}

/// Mean plus lower Cholesky factor, reused across draws.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    lower: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(params: &GaussianParams) -> Result<Self> {
        let chol = params
            .cov
            .clone()
            .cholesky()
            .ok_or(CoreError::CholeskyFailure)?;
        Ok(Self {
            mean: params.mean.clone(),
            lower: chol.unpack(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Writes one draw into `out` using `z` as scratch for the standard
    /// normal vector.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        self.transform(z, out);
    }

    /// `out = mean + L z`.
    #[allow(clippy::needless_range_loop)]
    pub fn transform(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = self.mean[i];
            for j in 0..=i {
                acc += self.lower[(i, j)] * z[j];
            }
            out[i] = acc;
        }
    }
}

pub fn sample_gaussian<R: Rng + ?Sized>(
    params: &GaussianParams,
    m: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if m == 0 {
        return Err(CoreError::invalid("sample size", "must be at least 1"));
    }
    let sampler = GaussianSampler::new(params)?;
    let d = sampler.dim();
    let mut out = Dataset::with_capacity(d, m)?;
    let mut z = vec![0.0; d];
    let mut x = vec![0.0; d];
    for _ in 0..m {
        sampler.sample_into(rng, &mut z, &mut x);
        out.push_unchecked(&x);
    }
    Ok(out)
}

/// Precomputed normal density for repeated evaluation.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    lower: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianDensity {
    pub fn new(params: &GaussianParams) -> Result<Self> {
        let chol = params
            .cov
            .clone()
            .cholesky()
            .ok_or(CoreError::CholeskyFailure)?;
        let lower = chol.unpack();
        let d = params.dim() as f64;
        let log_det_half: f64 = lower.diagonal().iter().map(|v| v.ln()).sum();
        Ok(Self {
            mean: params.mean.clone(),
            lower,
            log_norm: -0.5 * d * (2.0 * PI).ln() - log_det_half,
        })
    }

    #[allow(clippy::needless_range_loop)]
    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        let d = self.mean.len();
        check_dim(d, x.len())?;
        // forward substitution L y = x - mu
        let mut y = vec![0.0; d];
        let mut quad = 0.0;
        for i in 0..d {
            let mut acc = x[i] - self.mean[i];
            for j in 0..i {
                acc -= self.lower[(i, j)] * y[j];
            }
            y[i] = acc / self.lower[(i, i)];
            quad += y[i] * y[i];
        }
        Ok(self.log_norm - 0.5 * quad)
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        self.log_pdf(x).map(f64::exp)
    }
}

pub fn log_pdf(params: &GaussianParams, x: &[f64]) -> Result<f64> {
    GaussianDensity::new(params)?.log_pdf(x)
}

/// Fit / sample / log-density interface for model families. The Gaussian
/// is the only built-in implementation.
pub trait ModelFamily {
    type Params;

    fn fit(&self, parts: &[&Dataset]) -> Result<Self::Params>;

    fn sample<R: Rng + ?Sized>(
        &self,
        params: &Self::Params,
        m: usize,
        rng: &mut R,
    ) -> Result<Dataset>;

    fn log_density(&self, params: &Self::Params, x: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFamily {
    pub cov_floor: f64,
}

impl Default for GaussianFamily {
    fn default() -> Self {
        Self {
            cov_floor: DEFAULT_COV_FLOOR,
        }
    }
}

impl ModelFamily for GaussianFamily {
    type Params = GaussianParams;

    fn fit(&self, parts: &[&Dataset]) -> Result<GaussianParams> {
        fit_gaussian_parts(parts, self.cov_floor)
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        params: &GaussianParams,
        m: usize,
        rng: &mut R,
    ) -> Result<Dataset> {
        sample_gaussian(params, m, rng)
    }

    fn log_density(&self, params: &GaussianParams, x: &[f64]) -> Result<f64> {
        log_pdf(params, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn fit_two_points_by_hand() {
        let data = Dataset::from_points(2, [[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let fit = fit_gaussian(&data, 0.0).unwrap();
        assert_eq!(fit.mean().as_slice(), &[1.0, 0.0]);
        assert_eq!(fit.cov().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn fit_repeated_point_gives_floor() {
        let p = [0.3, -1.7, 4.0];
        let data = Dataset::from_points(3, std::iter::repeat_n(p, 10)).unwrap();
        let fit = fit_gaussian(&data, 1e-9).unwrap();
        for (a, b) in fit.mean().iter().zip(p) {
            assert!((a - b).abs() < 1e-15);
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1e-9 } else { 0.0 };
                assert!((fit.cov()[(i, j)] - want).abs() < 1e-20);
            }
        }
    }

    #[test]
    fn fit_rejects_small_and_mismatched() {
        let one = Dataset::from_points(1, [[1.0]]).unwrap();
        assert_eq!(fit_gaussian(&one, 0.0), Err(CoreError::EmptyOrSingleton(1)));
        let empty = Dataset::empty(2).unwrap();
        assert_eq!(
            fit_gaussian(&empty, 0.0),
            Err(CoreError::EmptyOrSingleton(0))
        );
        let a = Dataset::from_points(1, [[1.0], [2.0]]).unwrap();
        let b = Dataset::from_points(2, [[1.0, 2.0]]).unwrap();
        assert!(matches!(
            fit_gaussian_parts(&[&a, &b], 0.0),
            Err(CoreError::DimensionMismatch { .. })
        ));
        let mut c = Dataset::empty(2).unwrap();
        assert!(c.push(&[1.0]).is_err());
    }

    #[test]
    fn fit_recovers_standard_normal_at_scale() {
        let target = GaussianParams::standard(2).unwrap();
        let data = sample_gaussian(&target, 1_000_000, &mut rng(11)).unwrap();
        let fit = fit_gaussian(&data, 0.0).unwrap();
        for m in fit.mean().iter() {
            assert!(m.abs() < 0.01, "mean {m}");
        }
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((fit.cov()[(i, j)] - want).abs() < 0.02);
            }
        }
    }

    #[test]
    fn sample_degenerate_covariance() {
        let p = GaussianParams::isotropic(&[0.0, 0.0], 1e-18).unwrap();
        let data = sample_gaussian(&p, 3, &mut rng(1)).unwrap();
        assert_eq!(data.len(), 3);
        assert!(data.as_flat().iter().all(|c| c.abs() < 1e-6));
    }

    #[test]
    fn sample_singular_covariance_fails() {
        let p = GaussianParams::isotropic(&[0.0], 0.0).unwrap();
        assert_eq!(
            sample_gaussian(&p, 3, &mut rng(1)),
            Err(CoreError::CholeskyFailure)
        );
    }

    #[test]
    fn sample_is_deterministic() {
        let p = GaussianParams::standard(3).unwrap();
        let a = sample_gaussian(&p, 50, &mut rng(42)).unwrap();
        let b = sample_gaussian(&p, 50, &mut rng(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_moments_one_dimensional() {
        let p = GaussianParams::standard(1).unwrap();
        let data = sample_gaussian(&p, 100_000, &mut rng(5)).unwrap();
        let n = data.len() as f64;
        let mean = data.as_flat().iter().sum::<f64>() / n;
        let var = data
            .as_flat()
            .iter()
            .map(|x| (x - mean).powi(2))
            .sum::<f64>()
            / n;
        assert!(mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn log_pdf_closed_forms() {
        let p = GaussianParams::standard(1).unwrap();
        let v = log_pdf(&p, &[0.0]).unwrap();
        assert!((v - (-0.918_938_533_204_672_7)).abs() < 1e-12);
        assert_eq!(log_pdf(&p, &[1.0]).unwrap(), log_pdf(&p, &[-1.0]).unwrap());

        let mu = [1.5, -2.0, 0.25];
        let q = GaussianParams::isotropic(&mu, 1.0).unwrap();
        let mode = log_pdf(&q, &mu).unwrap();
        assert!((mode + 1.5 * (2.0 * PI).ln()).abs() < 1e-12);
        assert!(matches!(
            log_pdf(&q, &[0.0]),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn log_pdf_integrates_to_one() {
        let sigma = 1.7;
        let p = GaussianParams::isotropic(&[0.4], sigma * sigma).unwrap();
        let dens = GaussianDensity::new(&p).unwrap();
        let (lo, hi) = (0.4 - 8.0 * sigma, 0.4 + 8.0 * sigma);
        let steps = 20_000;
        let h = (hi - lo) / steps as f64;
        let mut total = 0.0;
        for k in 0..=steps {
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            total += w * dens.pdf(&[lo + k as f64 * h]).unwrap();
        }
        assert!((total * h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn param_vector_layout() {
        let p = GaussianParams::from_slices(&[1.0, 2.0], &[3.0, 0.5, 0.5, 4.0]).unwrap();
        let v = to_param_vector(&p);
        assert_eq!(v.entries(), &[1.0, 2.0, 3.0, 0.5, 0.5, 4.0]);
        let s = to_param_vector(&GaussianParams::standard(1).unwrap());
        assert_eq!(s.entries(), &[0.0, 1.0]);
        assert!(ParamVector::from_entries(2, vec![0.0; 5]).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(GaussianParams::from_slices(&[0.0, 0.0], &[1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(GaussianParams::from_slices(&[0.0, 0.0], &[1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(GaussianParams::from_slices(&[f64::NAN], &[1.0]).is_err());
        assert!(GaussianParams::from_slices(&[0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn family_trait_matches_free_functions() {
        let fam = GaussianFamily::default();
        let data = Dataset::from_points(1, [[0.0], [1.0], [3.0]]).unwrap();
        let fit = fam.fit(&[&data]).unwrap();
        assert_eq!(fit, fit_gaussian(&data, DEFAULT_COV_FLOOR).unwrap());
        assert_eq!(
            fam.log_density(&fit, &[0.5]).unwrap(),
            log_pdf(&fit, &[0.5]).unwrap()
        );
    }
}
