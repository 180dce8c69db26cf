use crate::engine::{run_loop, run_loop_with_real, LoopConfig, Trajectory};
use crate::error::{CoreError, Result};
use crate::exec::Execution;
use crate::model::{Dataset, GaussianParams};

/// One run of a sweep. Failed runs keep their error instead of aborting
/// the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub config_index: usize,
    pub replicate: usize,
    pub seed: u64,
    pub result: Result<Trajectory>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `r`. It does not depend on the configuration, so every
/// configuration sees the same real data and the same random streams for a
/// given replicate and comparisons between configurations are paired.
pub fn replicate_seed(base_seed: u64, replicate: usize) -> u64 {
    base_seed ^ splitmix64(replicate as u64)
}

/// Every configuration times every replicate, ordered config-major.
pub fn sweep(
    configs: &[LoopConfig],
    target: &GaussianParams,
    base_seed: u64,
    replicates: usize,
) -> Result<Vec<RunOutcome>> {
    sweep_with(Execution::default(), configs, target, base_seed, replicates)
}

pub fn sweep_with(
    exec: Execution,
    configs: &[LoopConfig],
    target: &GaussianParams,
    base_seed: u64,
    replicates: usize,
) -> Result<Vec<RunOutcome>> {
    sweep_runs(exec, configs, target, None, base_seed, replicates)
}

/// Like [`sweep_with`], but every run trains on the same supplied real data.
pub fn sweep_with_real(
    exec: Execution,
    configs: &[LoopConfig],
    target: &GaussianParams,
    real: &Dataset,
    base_seed: u64,
    replicates: usize,
) -> Result<Vec<RunOutcome>> {
    sweep_runs(exec, configs, target, Some(real), base_seed, replicates)
}

fn sweep_runs(
    exec: Execution,
    configs: &[LoopConfig],
    target: &GaussianParams,
    real: Option<&Dataset>,
    base_seed: u64,
    replicates: usize,
) -> Result<Vec<RunOutcome>> {
    if configs.is_empty() {
        return Err(CoreError::EmptyInput);
    }
    if replicates == 0 {
        return Err(CoreError::invalid("replicates", "must be at least 1"));
    }
    Ok(exec.map_range(configs.len() * replicates, |k| {
        let (config_index, replicate) = (k / replicates, k % replicates);
        let seed = replicate_seed(base_seed, replicate);
        let config = LoopConfig {
            seed,
            ..configs[config_index]
        };
        RunOutcome {
            config_index,
            replicate,
            seed,
            result: match real {
                Some(real) => run_loop_with_real(&config, target, real),
                None => run_loop(&config, target),
            },
        }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSummary {
    /// Shared configuration, with the seed zeroed.
    pub config: LoopConfig,
    pub replicates: usize,
    pub w2_late_mean: f64,
    /// Population standard deviation over all late-window values.
    pub w2_late_std: f64,
    pub param_dist_late_mean: f64,
    pub param_dist_late_std: f64,
    /// Median of `param_dist(t) / param_dist(t - 1)` over all steps and
    /// replicates; `None` when every previous distance is zero.
    pub contraction_ratio_median: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub(crate) fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

/// Groups runs by configuration (ignoring the seed), in order of first
/// appearance, and summarizes the last `late_window` generations.
pub fn summarize(trajectories: &[Trajectory], late_window: usize) -> Result<Vec<ConfigSummary>> {
    if trajectories.is_empty() {
        return Err(CoreError::EmptyInput);
    }
    let mut groups: Vec<(LoopConfig, Vec<&Trajectory>)> = Vec::new();
    for tr in trajectories {
        let len = tr.records.len();
        if late_window == 0 || late_window > len {
            return Err(CoreError::invalid(
                "late_window",
                format!("{late_window} outside 1..={len}"),
            ));
        }
        let key = tr.config.group_key();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(tr),
            None => groups.push((key, vec![tr])),
        }
    }

    Ok(groups
        .into_iter()
        .map(|(config, members)| {
            let mut w2 = Vec::new();
            let mut pd = Vec::new();
            let mut ratios = Vec::new();
            for tr in &members {
                let late = &tr.records[tr.records.len() - late_window..];
                w2.extend(late.iter().map(|r| r.w2_to_target));
                pd.extend(late.iter().map(|r| r.param_dist_to_target));
                ratios.extend(tr.records.windows(2).filter_map(|w| {
                    let prev = w[0].param_dist_to_target;
                    (prev > 0.0).then(|| w[1].param_dist_to_target / prev)
                }));
            }
            let (w2_late_mean, w2_late_std) = mean_std(&w2);
            let (param_dist_late_mean, param_dist_late_std) = mean_std(&pd);
            ConfigSummary {
                config,
                replicates: members.len(),
                w2_late_mean,
                w2_late_std,
                param_dist_late_mean,
                param_dist_late_std,
                contraction_ratio_median: median(ratios),
            }
        })
        .collect())
}
