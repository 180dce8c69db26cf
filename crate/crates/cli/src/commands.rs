use std::path::{Path, PathBuf};

use selfcorrect::bounds::{admissibility_grid, bound_trajectory};
use selfcorrect::engine::{
    run_loop, run_loop_with_real, summarize, sweep, sweep_with_real, RunOutcome, Trajectory,
};
use selfcorrect::Execution;

use crate::config::{check_late_window, Experiment, ExperimentFile};
use crate::csvio;
use crate::error::{CliError, Result};

/// Command-line values that take precedence over the experiment file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Dotted `key=value` assignments, applied in order.
    pub set: Vec<String>,
    pub out: Option<PathBuf>,
    /// Loop seed for `run`, base seed for `sweep`.
    pub seed: Option<u64>,
    pub late_window: Option<usize>,
}

pub fn load(config: &Path, overrides: &Overrides) -> Result<Experiment> {
    let file = ExperimentFile::load(config, &overrides.set)?;
    let base_dir = config.parent().unwrap_or(Path::new("."));
    let mut exp = Experiment::resolve(&file, base_dir)?;
    if let Some(out) = &overrides.out {
        exp.output_dir = out.clone();
    }
    if let Some(w) = overrides.late_window {
        check_late_window(w, exp.base.generations)?;
        if let Some(s) = exp.sweep.as_mut() {
            s.late_window = w;
        }
    }
    Ok(exp)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn cmd_run(exp: &Experiment, seed: Option<u64>) -> Result<PathBuf> {
    let mut config = exp.base;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let trajectory = match &exp.real {
        Some(real) => run_loop_with_real(&config, &exp.target, real)?,
        None => run_loop(&config, &exp.target)?,
    };
    create_dir(&exp.output_dir)?;
    let path = exp.output_dir.join("trajectory.csv");
    csvio::write_trajectory(&path, &trajectory)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepReport {
    pub runs: usize,
    pub failures: usize,
    pub summary: PathBuf,
}

pub fn run_file_name(config_index: usize, replicate: usize) -> String {
    format!("c{config_index:03}_r{replicate:03}.csv")
}

pub fn cmd_sweep(exp: &Experiment, seed: Option<u64>) -> Result<SweepReport> {
    let plan = exp
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep requires a [sweep] section".into()))?;
    let base_seed = seed.unwrap_or(plan.base_seed);
    let configs = plan.configs(&exp.base);
    let outcomes = match &exp.real {
        Some(real) => sweep_with_real(
            Execution::default(),
            &configs,
            &exp.target,
            real,
            base_seed,
            plan.replicates,
        )?,
        None => sweep(&configs, &exp.target, base_seed, plan.replicates)?,
    };

    let runs_dir = exp.output_dir.join("runs");
    create_dir(&runs_dir)?;
    let mut failed: Vec<(&RunOutcome, f64, selfcorrect::Gamma)> = Vec::new();
    for o in &outcomes {
        let cfg = &configs[o.config_index];
        match &o.result {
            Ok(tr) => csvio::write_trajectory(
                &runs_dir.join(run_file_name(o.config_index, o.replicate)),
                tr,
            )?,
            Err(_) => failed.push((o, cfg.lambda, cfg.correction.gamma)),
        }
    }

    let mut rows = Vec::with_capacity(configs.len());
    for (ci, cfg) in configs.iter().enumerate() {
        let ok: Vec<Trajectory> = outcomes
            .iter()
            .filter(|o| o.config_index == ci)
            .filter_map(|o| o.result.as_ref().ok().cloned())
            .collect();
        let summary = if ok.is_empty() {
            None
        } else {
            summarize(&ok, plan.late_window)?.into_iter().next()
        };
        rows.push((
            cfg.lambda,
            cfg.correction.gamma,
            cfg.correction.mode,
            summary,
        ));
    }
    let summary = exp.output_dir.join("summary.csv");
    csvio::write_summary(&summary, &rows)?;
    csvio::write_failures(&exp.output_dir.join("failures.csv"), &failed)?;
    Ok(SweepReport {
        runs: outcomes.len(),
        failures: failed.len(),
        summary,
    })
}

pub fn cmd_bounds(exp: &Experiment) -> Result<PathBuf> {
    let plan = exp
        .bounds
        .as_ref()
        .ok_or_else(|| CliError::Config("bounds requires a [constants] section".into()))?;
    let (lambdas, gammas) = exp.bounds_grid();
    let cells = admissibility_grid(&lambdas, &gammas, &plan.constants)
        .into_iter()
        .map(|cell| {
            let bound = bound_trajectory(
                plan.horizon,
                exp.base.n,
                plan.delta,
                plan.theta0_dist,
                cell.lambda,
                cell.gamma,
                &plan.constants,
            )?;
            Ok((cell, bound))
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(&exp.output_dir)?;
    let path = exp.output_dir.join("bounds.csv");
    csvio::write_bounds(&path, &cells)?;
    Ok(path)
}
