use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::correction::Gamma;
use crate::error::{CoreError, Result};
use crate::exec::Execution;
use crate::model::{check_dim, sample_gaussian, Dataset, GaussianParams};

/// Monte-Carlo draws used for the target CDF when its covariance is not
/// diagonal.
pub const TARGET_CDF_DRAWS: usize = 100_000;

const TARGET_CDF_SEED: u64 = 0x5EED_CDF0;

/// Fraction of points whose every coordinate is `<=` the matching
/// coordinate of `v`.
pub fn empirical_cdf(data: &Dataset, v: &[f64]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let below = data
        .iter()
        .filter(|p| p.iter().zip(v).all(|(x, bound)| x <= bound))
        .count();
    below as f64 / data.len() as f64
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

enum TargetCdf {
    Product { mean: Vec<f64>, sd: Vec<f64> },
    MonteCarlo(Dataset),
}

impl TargetCdf {
    fn new(target: &GaussianParams) -> Result<Self> {
        if target.is_diagonal() {
            let d = target.dim();
            Ok(TargetCdf::Product {
                mean: target.mean().iter().copied().collect(),
                sd: (0..d).map(|i| target.cov()[(i, i)].sqrt()).collect(),
            })
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(TARGET_CDF_SEED);
            Ok(TargetCdf::MonteCarlo(sample_gaussian(
                target,
                TARGET_CDF_DRAWS,
                &mut rng,
            )?))
        }
    }

    fn eval(&self, v: &[f64]) -> f64 {
        match self {
            TargetCdf::Product { mean, sd } => mean
                .iter()
                .zip(sd)
                .zip(v)
                .map(|((m, s), x)| {
                    if *s == 0.0 {
                        if x >= m {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        normal_cdf((x - m) / s)
                    }
                })
                .product(),
            TargetCdf::MonteCarlo(draws) => empirical_cdf(draws, v),
        }
    }
}

/// `max_v |F_sample(v) - F_mix(v)|` over the probe points, where
/// `F_mix = (F_synth_ref + gamma * F_target) / (1 + gamma)`.
pub fn empirical_cdf_sup_distance(
    sample: &Dataset,
    synth_ref: &Dataset,
    target: &GaussianParams,
    gamma: Gamma,
    probes: &Dataset,
) -> Result<f64> {
    if probes.is_empty() || sample.is_empty() {
        return Err(CoreError::EmptyInput);
    }
    let d = sample.dim();
    check_dim(d, probes.dim())?;
    check_dim(d, target.dim())?;
    check_dim(d, synth_ref.dim())?;
    if synth_ref.is_empty() && !gamma.is_infinite() {
        return Err(CoreError::EmptySynthSet);
    }
    let target_cdf = TargetCdf::new(target)?;
    let (wm, wt) = (gamma.model_weight(), gamma.target_weight());
    let gaps = Execution::default().map_range(probes.len(), |k| {
        let v = probes.point(k);
        let mix = match gamma {
            Gamma::Infinite => target_cdf.eval(v),
            Gamma::Finite(_) => wm * empirical_cdf(synth_ref, v) + wt * target_cdf.eval(v),
        };
        (empirical_cdf(sample, v) - mix).abs()
    });
    Ok(gaps.into_iter().fold(0.0, f64::max))
}
