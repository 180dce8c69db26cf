//! CSV files written by the CLI, and the readers used for real data and
//! round-trip checks. Floats are written with 17 significant digits so that
//! parsing them back is exact.

use std::path::Path;

use selfcorrect::bounds::GridCell;
use selfcorrect::engine::{ConfigSummary, RunOutcome, Trajectory};
use selfcorrect::{CorrectionMode, Dataset, Gamma};

use crate::error::{CliError, Result};

pub const TRAJECTORY_HEADER: [&str; 9] = [
    "generation",
    "seed",
    "lambda",
    "gamma",
    "mode",
    "n",
    "w2",
    "param_dist",
    "synth_pool_size",
];

pub const SUMMARY_HEADER: [&str; 8] = [
    "lambda",
    "gamma",
    "mode",
    "replicates",
    "w2_late_mean",
    "w2_late_std",
    "param_dist_late_mean",
    "contraction_ratio_median",
];

pub const FAILURES_HEADER: [&str; 5] = ["config_index", "replicate", "lambda", "gamma", "error"];

pub const BOUNDS_HEADER: [&str; 6] = [
    "lambda",
    "gamma",
    "admissible",
    "rho",
    "contraction_factor",
    "bound_t",
];

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_gamma(g: Gamma) -> String {
    match g {
        Gamma::Infinite => "inf".to_string(),
        Gamma::Finite(v) => format_float(v),
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        w.write_record(&row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_trajectory(path: &Path, tr: &Trajectory) -> Result<()> {
    let c = &tr.config;
    write_rows(
        path,
        &TRAJECTORY_HEADER,
        tr.records.iter().map(|r| {
            [
                r.t.to_string(),
                c.seed.to_string(),
                format_float(c.lambda),
                format_gamma(c.correction.gamma),
                c.correction.mode.as_str().to_string(),
                c.n.to_string(),
                format_float(r.w2_to_target),
                format_float(r.param_dist_to_target),
                r.synth_pool_size.to_string(),
            ]
        }),
    )
}

/// One parsed row of a trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub generation: usize,
    pub seed: u64,
    pub lambda: f64,
    pub gamma: Gamma,
    pub mode: CorrectionMode,
    pub n: usize,
    pub w2: f64,
    pub param_dist: f64,
    pub synth_pool_size: usize,
}

impl TrajectoryRow {
    pub fn from_trajectory(tr: &Trajectory) -> Vec<TrajectoryRow> {
        let c = &tr.config;
        tr.records
            .iter()
            .map(|r| TrajectoryRow {
                generation: r.t,
                seed: c.seed,
                lambda: c.lambda,
                gamma: c.correction.gamma,
                mode: c.correction.mode,
                n: c.n,
                w2: r.w2_to_target,
                param_dist: r.param_dist_to_target,
                synth_pool_size: r.synth_pool_size,
            })
            .collect()
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or_default();
    raw.parse().map_err(|_| {
        CliError::Config(format!(
            "{}: line {}: cannot parse `{raw}` in column {}",
            path.display(),
            rec.position().map_or(0, |p| p.line()),
            i + 1
        ))
    })
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut r = reader(path)?;
    let header = r.headers().map_err(|e| CliError::csv(path, e))?;
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(CliError::Config(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        rows.push(TrajectoryRow {
            generation: field(path, &rec, 0)?,
            seed: field(path, &rec, 1)?,
            lambda: field(path, &rec, 2)?,
            gamma: field(path, &rec, 3)?,
            mode: field(path, &rec, 4)?,
            n: field(path, &rec, 5)?,
            w2: field(path, &rec, 6)?,
            param_dist: field(path, &rec, 7)?,
            synth_pool_size: field(path, &rec, 8)?,
        });
    }
    Ok(rows)
}

/// Real data: a header row followed by one point per row.
pub fn read_dataset(path: &Path, dim: usize) -> Result<Dataset> {
    let mut r = reader(path)?;
    let mut data = Dataset::empty(dim)?;
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        if rec.len() != dim {
            return Err(CliError::Config(format!(
                "{}: row has {} columns, expected {dim}",
                path.display(),
                rec.len()
            )));
        }
        let point = (0..dim)
            .map(|i| field(path, &rec, i))
            .collect::<Result<Vec<f64>>>()?;
        data.push(&point)?;
    }
    Ok(data)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let header: Vec<String> = (0..data.dim()).map(|i| format!("x{i}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        data.iter()
            .map(|p| p.iter().map(|&v| format_float(v)).collect::<Vec<_>>()),
    )
}

/// `None` marks a configuration with no successful run.
pub fn write_summary(
    path: &Path,
    rows: &[(f64, Gamma, CorrectionMode, Option<ConfigSummary>)],
) -> Result<()> {
    write_rows(
        path,
        &SUMMARY_HEADER,
        rows.iter().map(|(lambda, gamma, mode, s)| {
            let mut row = vec![
                format_float(*lambda),
                format_gamma(*gamma),
                mode.as_str().to_string(),
            ];
            match s {
                Some(s) => row.extend([
                    s.replicates.to_string(),
                    format_float(s.w2_late_mean),
                    format_float(s.w2_late_std),
                    format_float(s.param_dist_late_mean),
                    format_opt(s.contraction_ratio_median),
                ]),
                None => row.extend([
                    "0".to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]),
            }
            row
        }),
    )
}

pub fn write_failures(path: &Path, failed: &[(&RunOutcome, f64, Gamma)]) -> Result<()> {
    write_rows(
        path,
        &FAILURES_HEADER,
        failed.iter().map(|(o, lambda, gamma)| {
            let message = match &o.result {
                Err(e) => e.to_string(),
                Ok(_) => String::new(),
            };
            [
                o.config_index.to_string(),
                o.replicate.to_string(),
                format_float(*lambda),
                format_gamma(*gamma),
                message,
            ]
        }),
    )
}

pub fn write_bounds(path: &Path, cells: &[(GridCell, Option<f64>)]) -> Result<()> {
    write_rows(
        path,
        &BOUNDS_HEADER,
        cells.iter().map(|(c, bound)| {
            [
                format_float(c.lambda),
                format_gamma(c.gamma),
                c.admissible.to_string(),
                format_opt(c.rho),
                format_opt(c.contraction_factor),
                format_opt(*bound),
            ]
        }),
    )
}
