//! Experiment files (TOML) and their resolution into loop configurations.
//!
//! ```toml
//! [target]
//! dim = 2
//! mean = [0.0, 0.0]
//! cov = [[1.0, 0.0], [0.0, 1.0]]
//!
//! [loop]
//! n = 50
//! lambda = 0.5
//! gamma = 1.0            # or inf / "inf"
//! mode = "distribution_wise"
//! generations = 50
//! accrual = "fresh"      # or "log"
//!
//! [sweep]
//! gammas = [0.0, 0.1, 0.5, 1.0]
//! replicates = 20
//! ```

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::Deserialize;
use toml::{Table, Value};

use selfcorrect::bounds::StabilityConstants;
use selfcorrect::engine::{Accrual, LoopConfig};
use selfcorrect::model::DEFAULT_COV_FLOOR;
use selfcorrect::{CorrectionMode, CorrectionSpec, Dataset, Gamma, GaussianParams};

use crate::csvio::read_dataset;
use crate::error::{CliError, Result};

pub const DEFAULT_LATE_WINDOW: usize = 11;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub target: TargetSection,
    #[serde(rename = "loop")]
    pub run: LoopSection,
    pub sweep: Option<SweepSection>,
    pub constants: Option<ConstantsSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub dim: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub n: usize,
    pub lambda: f64,
    #[serde(deserialize_with = "gamma")]
    pub gamma: Gamma,
    #[serde(default = "default_mode", deserialize_with = "token")]
    pub mode: CorrectionMode,
    pub generations: usize,
    #[serde(default, deserialize_with = "token")]
    pub accrual: Accrual,
    #[serde(default = "default_cov_floor")]
    pub cov_floor: f64,
    #[serde(default)]
    pub seed: u64,
    /// CSV of real points, relative to the experiment file.
    pub real_data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, deserialize_with = "nonempty_lambdas")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "gamma_list")]
    pub gammas: Option<Vec<Gamma>>,
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub late_window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub alpha: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub epsilon: f64,
    pub eps_opt: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Defaults to the loop's generation count.
    pub horizon: Option<usize>,
    #[serde(default)]
    pub theta0_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_output_dir(),
            formats: default_formats(),
        }
    }
}

fn default_mode() -> CorrectionMode {
    CorrectionMode::DistributionWise
}

fn default_cov_floor() -> f64 {
    DEFAULT_COV_FLOOR
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(DEFAULT_OUTPUT_DIR)
}

fn default_formats() -> Vec<String> {
    vec!["csv".to_string()]
}

fn token<'de, D, T>(d: D) -> std::result::Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: Display,
{
    String::deserialize(d)?.parse().map_err(de::Error::custom)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GammaRepr {
    Number(f64),
    Text(String),
}

impl GammaRepr {
    fn resolve<E: de::Error>(self) -> std::result::Result<Gamma, E> {
        match self {
            GammaRepr::Number(v) if v == f64::INFINITY => Ok(Gamma::Infinite),
            GammaRepr::Number(v) => Gamma::finite(v).map_err(E::custom),
            GammaRepr::Text(s) => s.parse().map_err(E::custom),
        }
    }
}

fn gamma<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Gamma, D::Error> {
    GammaRepr::deserialize(d)?.resolve()
}

fn gamma_list<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<Vec<Gamma>>, D::Error> {
    let raw = Vec::<GammaRepr>::deserialize(d)?;
    if raw.is_empty() {
        return Err(de::Error::custom("gammas must not be empty"));
    }
    raw.into_iter()
        .map(GammaRepr::resolve)
        .collect::<std::result::Result<_, _>>()
        .map(Some)
}

fn nonempty_lambdas<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<Vec<f64>>, D::Error> {
    let raw = Vec::<f64>::deserialize(d)?;
    if raw.is_empty() {
        return Err(de::Error::custom("lambdas must not be empty"));
    }
    Ok(Some(raw))
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, column)
}

fn parse_error(path: &Path, text: &str, err: &toml::de::Error) -> CliError {
    let (line, column) = err
        .span()
        .map_or((1, 1), |span| line_column(text, span.start));
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: err.message().to_string(),
    }
}

/// `key=value` with a dotted key; the value is read as a TOML value and
/// falls back to a bare string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Override {
            key: assignment.to_string(),
            message: "expected key=value".into(),
        })?;
    let (key, raw) = (key.trim(), raw.trim());
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Override {
            key: key.to_string(),
            message: "empty key segment".into(),
        });
    }
    let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };

    let (last, parents) = parts.split_last().expect("nonempty key");
    let mut node = table;
    for part in parents {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry.as_table_mut().ok_or_else(|| CliError::Override {
            key: key.to_string(),
            message: format!("`{part}` is not a section"),
        })?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentFile {
    pub fn parse(path: &Path, text: &str, overrides: &[String]) -> Result<Self> {
        // Parse the file alone first so its errors point at file positions.
        let file: ExperimentFile = toml::from_str(text).map_err(|e| parse_error(path, text, &e))?;
        if overrides.is_empty() {
            return Ok(file);
        }
        let mut table: Table = toml::from_str(text).map_err(|e| parse_error(path, text, &e))?;
        for assignment in overrides {
            apply_override(&mut table, assignment)?;
        }
        Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Override {
                key: overrides.join(" "),
                message: e.message().to_string(),
            })
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(path, &text, overrides)
    }
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub target: GaussianParams,
    pub base: LoopConfig,
    pub real: Option<Dataset>,
    pub sweep: Option<SweepPlan>,
    pub bounds: Option<BoundsPlan>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<Gamma>,
    pub replicates: usize,
    pub base_seed: u64,
    pub late_window: usize,
}

impl SweepPlan {
    /// Lambda-major grid of configurations derived from `base`.
    pub fn configs(&self, base: &LoopConfig) -> Vec<LoopConfig> {
        self.lambdas
            .iter()
            .flat_map(|&lambda| {
                self.gammas.iter().map(move |&gamma| LoopConfig {
                    lambda,
                    correction: CorrectionSpec {
                        gamma,
                        ..base.correction
                    },
                    ..*base
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsPlan {
    pub constants: StabilityConstants,
    pub delta: f64,
    pub horizon: usize,
    pub theta0_dist: f64,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Experiment {
    /// `base_dir` anchors relative paths inside the file.
    pub fn resolve(file: &ExperimentFile, base_dir: &Path) -> Result<Self> {
        let t = &file.target;
        if t.mean.len() != t.dim {
            return Err(config_error(format!(
                "target.mean has {} entries, dim is {}",
                t.mean.len(),
                t.dim
            )));
        }
        if t.cov.len() != t.dim || t.cov.iter().any(|row| row.len() != t.dim) {
            return Err(config_error(format!("target.cov must be {0}x{0}", t.dim)));
        }
        let flat: Vec<f64> = t.cov.iter().flatten().copied().collect();
        let target = GaussianParams::from_slices(&t.mean, &flat)?;

        let l = &file.run;
        let base = LoopConfig {
            dim: t.dim,
            n: l.n,
            lambda: l.lambda,
            correction: CorrectionSpec {
                gamma: l.gamma,
                mode: l.mode,
            },
            generations: l.generations,
            accrual: l.accrual,
            seed: l.seed,
            cov_floor: l.cov_floor,
        };
        base.validate()?;

        let real = match &l.real_data {
            Some(p) => {
                let path = base_dir.join(p);
                let data = read_dataset(&path, t.dim)?;
                if data.len() != l.n {
                    return Err(config_error(format!(
                        "{} holds {} points but loop.n is {}",
                        path.display(),
                        data.len(),
                        l.n
                    )));
                }
                Some(data)
            }
            None => None,
        };

        let sweep = match &file.sweep {
            Some(s) => {
                if s.replicates == 0 {
                    return Err(config_error("sweep.replicates must be at least 1"));
                }
                let late_window = s
                    .late_window
                    .unwrap_or(DEFAULT_LATE_WINDOW.min(l.generations + 1));
                check_late_window(late_window, l.generations)?;
                let plan = SweepPlan {
                    lambdas: s.lambdas.clone().unwrap_or(vec![l.lambda]),
                    gammas: s.gammas.clone().unwrap_or(vec![l.gamma]),
                    replicates: s.replicates,
                    base_seed: s.base_seed,
                    late_window,
                };
                for cfg in plan.configs(&base) {
                    cfg.validate()?;
                }
                Some(plan)
            }
            None => None,
        };

        let bounds = match &file.constants {
            Some(c) => {
                let constants =
                    StabilityConstants::new(c.alpha, c.lipschitz, c.epsilon, c.eps_opt, c.a, c.b)?;
                let horizon = c.horizon.unwrap_or(l.generations);
                if horizon == 0 {
                    return Err(config_error("constants.horizon must be at least 1"));
                }
                if !(c.theta0_dist >= 0.0 && c.theta0_dist.is_finite()) {
                    return Err(config_error("constants.theta0_dist must be nonnegative"));
                }
                Some(BoundsPlan {
                    constants,
                    delta: c.delta,
                    horizon,
                    theta0_dist: c.theta0_dist,
                })
            }
            None => None,
        };

        if let Some(bad) = file.output.formats.iter().find(|f| f.as_str() != "csv") {
            return Err(config_error(format!("unsupported output format `{bad}`")));
        }
        Ok(Experiment {
            target,
            base,
            real,
            sweep,
            bounds,
            output_dir: file.output.directory.clone(),
        })
    }

    /// Grid for the bounds table: the sweep grid, or the single loop setting.
    pub fn bounds_grid(&self) -> (Vec<f64>, Vec<Gamma>) {
        match &self.sweep {
            Some(s) => (s.lambdas.clone(), s.gammas.clone()),
            None => (vec![self.base.lambda], vec![self.base.correction.gamma]),
        }
    }
}

pub(crate) fn check_late_window(late_window: usize, generations: usize) -> Result<()> {
    if late_window == 0 || late_window > generations + 1 {
        return Err(config_error(format!(
            "late_window {late_window} must lie in 1..={}",
            generations + 1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[target]
dim = 2
mean = [0.0, 0.0]
cov = [[1.0, 0.0], [0.0, 1.0]]

[loop]
n = 50
lambda = 0.5
gamma = 1
generations = 10
"#;

    fn parse(text: &str, overrides: &[&str]) -> Result<ExperimentFile> {
        let owned: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        ExperimentFile::parse(Path::new("exp.toml"), text, &owned)
    }

    #[test]
    fn defaults_fill_in() {
        let f = parse(BASIC, &[]).unwrap();
        assert_eq!(f.run.gamma, Gamma::Finite(1.0));
        assert_eq!(f.run.mode, CorrectionMode::DistributionWise);
        assert_eq!(f.run.accrual, Accrual::FreshEachGeneration);
        assert_eq!(f.run.cov_floor, DEFAULT_COV_FLOOR);
        assert_eq!(f.output.directory, PathBuf::from("out"));
        let e = Experiment::resolve(&f, Path::new(".")).unwrap();
        assert!(e.sweep.is_none() && e.bounds.is_none());
        assert_eq!(e.base.synth_batch_size(), 25);
    }

    #[test]
    fn infinite_gamma_spellings() {
        for g in ["inf", "\"inf\"", "+inf"] {
            let text = BASIC.replace("gamma = 1", &format!("gamma = {g}"));
            assert_eq!(parse(&text, &[]).unwrap().run.gamma, Gamma::Infinite, "{g}");
        }
        let text = format!("{BASIC}\n[sweep]\ngammas = [0, 0.5, inf, \"inf\"]\nreplicates = 2\n");
        let gammas = parse(&text, &[]).unwrap().sweep.unwrap().gammas.unwrap();
        assert_eq!(gammas[2], Gamma::Infinite);
        assert_eq!(gammas[3], Gamma::Infinite);
        assert!(parse(&BASIC.replace("gamma = 1", "gamma = -1"), &[]).is_err());
        assert!(parse(&BASIC.replace("gamma = 1", "gamma = -inf"), &[]).is_err());
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = BASIC.replace("n = 50", "n = 50\nlamda = 0.3");
        match parse(&text, &[]) {
            Err(CliError::Parse { line, message, .. }) => {
                assert_eq!(line, 9);
                assert!(message.contains("lamda"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        match parse("[target]\ndim = = 2\n", &[]) {
            Err(CliError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 7)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_gamma_list_is_a_parse_error() {
        let text = format!("{BASIC}\n[sweep]\ngammas = []\nreplicates = 2\n");
        let err = parse(&text, &[]);
        assert!(
            matches!(err, Err(CliError::Parse { line: 14, .. })),
            "{err:?}"
        );
    }

    #[test]
    fn overrides_take_precedence_per_key() {
        type Case = (&'static str, fn(&ExperimentFile) -> String, &'static str);
        let cases: [Case; 6] = [
            ("loop.lambda=0.3", |f| f.run.lambda.to_string(), "0.3"),
            ("loop.gamma=inf", |f| f.run.gamma.to_string(), "inf"),
            (
                "loop.mode=pointwise_matched",
                |f| f.run.mode.to_string(),
                "pointwise_matched",
            ),
            (
                "loop.accrual=log",
                |f| f.run.accrual.as_str().to_string(),
                "log",
            ),
            ("loop.seed=99", |f| f.run.seed.to_string(), "99"),
            (
                "output.directory=elsewhere",
                |f| f.output.directory.display().to_string(),
                "elsewhere",
            ),
        ];
        for (assignment, read, want) in cases {
            let f = parse(BASIC, &[assignment]).unwrap();
            assert_eq!(read(&f), want, "{assignment}");
        }
        let f = parse(BASIC, &["sweep.replicates=3", "sweep.gammas=[0, 1]"]).unwrap();
        assert_eq!(f.sweep.unwrap().gammas.unwrap().len(), 2);
        assert!(matches!(
            parse(BASIC, &["loop.lamda=1"]),
            Err(CliError::Override { .. })
        ));
        assert!(parse(BASIC, &["novalue"]).is_err());
        assert!(parse(BASIC, &["loop.n.x=1"]).is_err());
    }

    #[test]
    fn resolution_checks_shapes() {
        let f = parse(&BASIC.replace("mean = [0.0, 0.0]", "mean = [0.0]"), &[]).unwrap();
        assert!(matches!(
            Experiment::resolve(&f, Path::new(".")),
            Err(CliError::Config(_))
        ));
        let f = parse(BASIC, &["loop.n=1"]).unwrap();
        assert!(Experiment::resolve(&f, Path::new(".")).is_err());
        let f = parse(BASIC, &["output.formats=[\"parquet\"]"]).unwrap();
        assert!(Experiment::resolve(&f, Path::new(".")).is_err());
        let f = parse(BASIC, &["sweep.replicates=2", "sweep.late_window=12"]).unwrap();
        assert!(Experiment::resolve(&f, Path::new(".")).is_err());
    }

    #[test]
    fn sweep_grid_is_lambda_major() {
        let text = format!(
            "{BASIC}\n[sweep]\nlambdas = [0.1, 0.2]\ngammas = [0, 1, inf]\nreplicates = 2\n"
        );
        let e = Experiment::resolve(&parse(&text, &[]).unwrap(), Path::new(".")).unwrap();
        let plan = e.sweep.as_ref().unwrap();
        let configs = plan.configs(&e.base);
        assert_eq!(configs.len(), 6);
        assert_eq!(configs[2].lambda, 0.1);
        assert_eq!(configs[2].correction.gamma, Gamma::Infinite);
        assert_eq!(configs[3].lambda, 0.2);
        assert_eq!(plan.late_window, 11);
    }

    #[test]
    fn constants_section() {
        let text = format!(
            "{BASIC}\n[constants]\nalpha = 1.0\nL = 2.0\nepsilon = 0.0\neps_opt = 0.0\na = 1.0\nb = 3.0\n"
        );
        let e = Experiment::resolve(&parse(&text, &[]).unwrap(), Path::new(".")).unwrap();
        let b = e.bounds.unwrap();
        assert_eq!(b.horizon, 10);
        assert_eq!(b.delta, DEFAULT_DELTA);
        assert_eq!(b.constants.lipschitz, 2.0);
    }

    #[test]
    fn line_column_offsets() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
