//! The retraining loop: fit on real data, then per generation synthesize
//! from the previous model, correct, pool, and refit on real plus pool.

mod pool;
mod sweep;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::correction::{
    apply_pointwise_correction_with, sample_corrected, CorrectionMode, CorrectionSpec, Gamma,
    MatchRule,
};
use crate::error::{CoreError, Result};
use crate::metrics::{gaussian_w2, param_distance};
use crate::model::{check_dim, fit_gaussian_parts, sample_gaussian, Dataset, GaussianParams};

pub use pool::{Accrual, SyntheticPool};
pub use sweep::{
    replicate_seed, summarize, sweep, sweep_with, sweep_with_real, ConfigSummary, RunOutcome,
};

/// Slack for `floor(lambda * n)` so that e.g. `0.29 * 100` counts as 29.
const BATCH_ROUNDING: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    pub dim: usize,
    /// Size of the real dataset.
    pub n: usize,
    /// Synthetic points per generation as a fraction of `n`.
    pub lambda: f64,
    pub correction: CorrectionSpec,
    pub generations: usize,
    pub accrual: Accrual,
    pub seed: u64,
    pub cov_floor: f64,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(CoreError::invalid("dim", "must be at least 1"));
        }
        if self.n < 2 {
            return Err(CoreError::invalid("n", "must be at least 2"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CoreError::invalid("lambda", format!("{}", self.lambda)));
        }
        if let Gamma::Finite(g) = self.correction.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(CoreError::invalid("gamma", format!("{g}")));
            }
        }
        if self.generations == 0 {
            return Err(CoreError::invalid("generations", "must be at least 1"));
        }
        if !(self.cov_floor >= 0.0 && self.cov_floor.is_finite()) {
            return Err(CoreError::invalid(
                "cov_floor",
                format!("{}", self.cov_floor),
            ));
        }
        Ok(())
    }

    /// `floor(lambda * n)`.
    pub fn synth_batch_size(&self) -> usize {
        (self.lambda * self.n as f64 + BATCH_ROUNDING).floor() as usize
    }

    /// Everything except the seed; runs sharing a key are replicates.
    pub(crate) fn group_key(&self) -> LoopConfig {
        LoopConfig { seed: 0, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub t: usize,
    pub theta: GaussianParams,
    pub w2_to_target: f64,
    pub param_dist_to_target: f64,
    /// Synthetic points in the training set at this generation.
    pub synth_pool_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: LoopConfig,
    pub target: GaussianParams,
    /// Generations `0..=T`.
    pub records: Vec<GenerationRecord>,
}

impl Trajectory {
    pub fn w2(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.w2_to_target).collect()
    }

    pub fn param_dist(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.param_dist_to_target)
            .collect()
    }
}

/// Random stream for one purpose of one generation. Stream 0 draws the
/// real data; generation `t` synthesizes on `2t` and corrects on `2t + 1`.
pub fn generation_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs the loop with real data drawn from `target`.
pub fn run_loop(config: &LoopConfig, target: &GaussianParams) -> Result<Trajectory> {
    config.validate()?;
    check_dim(config.dim, target.dim())?;
    let real = sample_gaussian(target, config.n, &mut generation_rng(config.seed, 0))?;
    run_loop_with_real(config, target, &real)
}

/// Runs the loop on a supplied real dataset; `config.n` must equal its size.
pub fn run_loop_with_real(
    config: &LoopConfig,
    target: &GaussianParams,
    real: &Dataset,
) -> Result<Trajectory> {
    config.validate()?;
    check_dim(config.dim, target.dim())?;
    check_dim(config.dim, real.dim())?;
    if real.len() != config.n {
        return Err(CoreError::SizeMismatch {
            left: config.n,
            right: real.len(),
        });
    }

    let record = |t: usize, theta: GaussianParams, pool: usize| -> Result<GenerationRecord> {
        Ok(GenerationRecord {
            t,
            w2_to_target: gaussian_w2(&theta, target)?,
            param_dist_to_target: param_distance(&theta, target)?,
            theta,
            synth_pool_size: pool,
        })
    };

    let theta0 = fit_gaussian_parts(&[real], config.cov_floor).map_err(|e| e.at_generation(0))?;
    let mut records = Vec::with_capacity(config.generations + 1);
    records.push(record(0, theta0, 0)?);

    let batch = config.synth_batch_size();
    let mut pool = SyntheticPool::new(config.accrual);
    for t in 1..=config.generations {
        let previous = &records[t - 1].theta;
        let rec = (|| -> Result<GenerationRecord> {
            if batch > 0 {
                let corrected = synthesize_and_correct(config, previous, target, batch, t)?;
                pool.accrue(corrected, t);
            }
            let mut parts: Vec<&Dataset> = vec![real];
            parts.extend(pool.datasets());
            let theta = fit_gaussian_parts(&parts, config.cov_floor)?;
            record(t, theta, pool.len())
        })()
        .map_err(|e| e.at_generation(t))?;
        records.push(rec);
    }
    Ok(Trajectory {
        config: *config,
        target: target.clone(),
        records,
    })
}

fn synthesize_and_correct(
    config: &LoopConfig,
    previous: &GaussianParams,
    target: &GaussianParams,
    batch: usize,
    t: usize,
) -> Result<Dataset> {
    let stream = 2 * t as u64;
    let synth = sample_gaussian(previous, batch, &mut generation_rng(config.seed, stream))?;
    let mut rng = generation_rng(config.seed, stream + 1);
    let gamma = config.correction.gamma;
    match config.correction.mode {
        CorrectionMode::DistributionWise => {
            sample_corrected(&synth, target, gamma, batch, &mut rng)
        }
        CorrectionMode::PointwiseMatched => apply_pointwise_correction_with(
            &synth,
            target,
            gamma,
            MatchRule::MinimumDistance,
            &mut rng,
        ),
        CorrectionMode::PointwiseRandom => apply_pointwise_correction_with(
            &synth,
            target,
            gamma,
            MatchRule::RandomPermutation,
            &mut rng,
        ),
    }
}

#[cfg(test)]
mod tests;
