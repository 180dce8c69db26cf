//! Correction operators. The distribution-wise form mixes a model density
//! with the target density at strength `gamma`; the pointwise form moves
//! each synthetic point onto a matched draw from that mixture.

pub mod assignment;
mod ecdf;
pub(crate) mod matching;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::model::{check_dim, Dataset, GaussianDensity, GaussianParams, GaussianSampler};

pub use ecdf::{empirical_cdf, empirical_cdf_sup_distance, normal_cdf, TARGET_CDF_DRAWS};
pub use matching::{match_pointwise, Matching};

/// Correction strength. `Infinite` replaces the model by the target.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Gamma {
    Finite(f64),
    Infinite,
}

impl Gamma {
    pub const ZERO: Gamma = Gamma::Finite(0.0);

    pub fn finite(value: f64) -> Result<Self> {
        if value >= 0.0 && value.is_finite() {
            Ok(Gamma::Finite(value))
        } else {
            Err(CoreError::invalid("gamma", format!("{value}")))
        }
    }

    /// Weight `1/(1+gamma)` of the model component.
    pub fn model_weight(self) -> f64 {
        match self {
            Gamma::Finite(g) => 1.0 / (1.0 + g),
            Gamma::Infinite => 0.0,
        }
    }

    /// Weight `gamma/(1+gamma)` of the target component.
    pub fn target_weight(self) -> f64 {
        match self {
            Gamma::Finite(g) => g / (1.0 + g),
            Gamma::Infinite => 1.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Gamma::Infinite)
    }

    /// `f64::INFINITY` for the infinite strength.
    pub fn as_f64(self) -> f64 {
        match self {
            Gamma::Finite(g) => g,
            Gamma::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Finite(g) => write!(f, "{g}"),
            Gamma::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Gamma {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "+inf" | "infinity" | "Infinity" => Ok(Gamma::Infinite),
            other => {
                let value: f64 = other
                    .parse()
                    .map_err(|_| CoreError::invalid("gamma", other.to_string()))?;
                if value == f64::INFINITY {
                    Ok(Gamma::Infinite)
                } else {
                    Gamma::finite(value)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorrectionMode {
    /// Draw corrected points directly from the mixture.
    DistributionWise,
    /// Move each synthetic point to its distance-minimizing partner among
    /// mixture draws.
    PointwiseMatched,
    /// Move each synthetic point to a uniformly random mixture draw.
    PointwiseRandom,
}

impl CorrectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrectionMode::DistributionWise => "distribution_wise",
            CorrectionMode::PointwiseMatched => "pointwise_matched",
            CorrectionMode::PointwiseRandom => "pointwise_random",
        }
    }
}

impl fmt::Display for CorrectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorrectionMode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distribution_wise" => Ok(CorrectionMode::DistributionWise),
            "pointwise_matched" => Ok(CorrectionMode::PointwiseMatched),
            "pointwise_random" => Ok(CorrectionMode::PointwiseRandom),
            other => Err(CoreError::invalid("correction mode", other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionSpec {
    pub gamma: Gamma,
    pub mode: CorrectionMode,
}

/// How pointwise correction pairs synthetic points with corrected draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchRule {
    MinimumDistance,
    RandomPermutation,
}

/// `(p(x) + gamma * p_star(x)) / (1 + gamma)`, or `p_star(x)` at infinite
/// strength.
pub fn mixture_density(
    p: &GaussianParams,
    p_star: &GaussianParams,
    gamma: Gamma,
    x: &[f64],
) -> Result<f64> {
    check_dim(p.dim(), p_star.dim())?;
    check_dim(p.dim(), x.len())?;
    let star = GaussianDensity::new(p_star)?.pdf(x)?;
    match gamma {
        Gamma::Infinite => Ok(star),
        Gamma::Finite(g) => {
            let model = GaussianDensity::new(p)?.pdf(x)?;
            Ok((model + g * star) / (1.0 + g))
        }
    }
}

/// Draws `m` points from `(p_synth + gamma * p_target) / (1 + gamma)` where
/// `p_synth` is the empirical measure of `synth`.
///
/// Each output consumes the same random draws (branch uniform, resampling
/// index, one standard-normal vector) whichever branch is taken, so runs that
/// differ only in `gamma` stay coupled on a shared stream.
pub fn sample_corrected<R: Rng + ?Sized>(
    synth: &Dataset,
    target: &GaussianParams,
    gamma: Gamma,
    m: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if synth.is_empty() {
        return Err(CoreError::EmptySynthSet);
    }
    check_dim(synth.dim(), target.dim())?;
    if m == 0 {
        return Err(CoreError::invalid("sample size", "must be at least 1"));
    }
    let sampler = GaussianSampler::new(target)?;
    let d = synth.dim();
    let keep_model = gamma.model_weight();
    let mut out = Dataset::with_capacity(d, m)?;
    let mut z = vec![0.0; d];
    let mut x = vec![0.0; d];
    for _ in 0..m {
        let branch: f64 = rng.random();
        let index = rng.random_range(0..synth.len());
        sampler.sample_into(rng, &mut z, &mut x);
        if branch < keep_model {
            out.push_unchecked(synth.point(index));
        } else {
            out.push_unchecked(&x);
        }
    }
    Ok(out)
}

/// Pointwise correction with distance-minimizing matching.
pub fn apply_pointwise_correction<R: Rng + ?Sized>(
    synth: &Dataset,
    target: &GaussianParams,
    gamma: Gamma,
    rng: &mut R,
) -> Result<Dataset> {
    apply_pointwise_correction_with(synth, target, gamma, MatchRule::MinimumDistance, rng)
}

/// Draws `|synth|` corrected points and returns them reordered so that
/// output `i` is the partner of `synth[i]`.
pub fn apply_pointwise_correction_with<R: Rng + ?Sized>(
    synth: &Dataset,
    target: &GaussianParams,
    gamma: Gamma,
    rule: MatchRule,
    rng: &mut R,
) -> Result<Dataset> {
    let drawn = sample_corrected(synth, target, gamma, synth.len().max(1), rng)?;
    let permutation = match rule {
        MatchRule::MinimumDistance => match_pointwise(synth, &drawn)?.into_permutation(),
        MatchRule::RandomPermutation => {
            let mut perm: Vec<usize> = (0..drawn.len()).collect();
            perm.shuffle(rng);
            perm
        }
    };
    Ok(drawn.select(&permutation))
}
