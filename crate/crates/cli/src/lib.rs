//! Library side of the `rankql` binary: CSV ingestion, run configuration and
//! the command implementations. Every command returns a JSON value; the binary
//! only handles argument parsing, output and exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rankql::montecarlo::{self, GeneratorKind, Schedule, SimConfig, SimReport, Thresholds};
use rankql::{
    central_moments, correlate, embed, estimate_sigma2, fit_2sls, fit_ql, fit_weighted, variance_bound,
    DesignEmbedding, RegressionFit, TiePolicy,
};
use serde::Deserialize;
use serde_json::{json, Value};

/// Exit status for success, or for a simulation whose claims all hold.
pub const EXIT_OK: u8 = 0;
/// A simulation ran but at least one claim check failed.
pub const EXIT_CLAIMS_FAILED: u8 = 1;
/// Usage or data error.
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path} is empty")]
    EmptyFile { path: String },
    #[error("row {row} has {got} fields, header has {expected}")]
    RaggedRows { row: u64, expected: usize, got: usize },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    ParseError { row: u64, column: String, value: String },
    #[error("malformed CSV: {0}")]
    Csv(String),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Core(#[from] rankql::Error),
    #[error("column `{0}` is constant (its rank embedding is identically zero)")]
    Degenerate(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        EXIT_ERROR
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub column_names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub source_path: String,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> CliResult<&[f64]> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| CliError::UnknownColumn(name.to_string()))
    }
}

/// Reads a headed CSV of decimal numbers. Row numbers in errors are file
/// lines, the header being row 1.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    if text.trim().is_empty() {
        return Err(IngestError::EmptyFile { path: shown });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let width = header.len();
    let mut columns = vec![Vec::new(); width];
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Csv(e.to_string()))?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(IngestError::RaggedRows {
                row,
                expected: width,
                got: record.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::ParseError {
                    row,
                    column: header[j].clone(),
                    value: cell.to_string(),
                })?;
            columns[j].push(value);
        }
    }
    if columns.first().is_none_or(Vec::is_empty) {
        return Err(IngestError::EmptyFile { path: shown });
    }
    Ok(Dataset {
        column_names: header,
        columns,
        source_path: shown,
    })
}

/// Keys accepted in a `--config` JSON file. All optional; command-line flags
/// win over the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub tie_policy: Option<TiePolicy>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub bins: Option<usize>,
    pub columns: Option<Vec<String>>,
    pub thresholds: Option<Thresholds>,
    pub n_grid: Option<Vec<usize>>,
    pub eps_grid: Option<Vec<f64>>,
    pub generator: Option<GeneratorKind>,
}

impl FileConfig {
    pub fn load(path: impl AsRef<Path>) -> CliResult<FileConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tie_policy: TiePolicy,
    pub seed: u64,
    /// `None` writes to standard output.
    pub output_path: Option<PathBuf>,
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub bins: Option<usize>,
    pub columns: Option<Vec<String>>,
    pub thresholds: Thresholds,
    pub n_grid: Option<Vec<usize>>,
    pub eps_grid: Option<Vec<f64>>,
    pub generator: Option<GeneratorKind>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tie_policy: TiePolicy::KemenyZero,
            seed: 0,
            output_path: None,
            reps: None,
            n: None,
            bins: None,
            columns: None,
            thresholds: Thresholds::default(),
            n_grid: None,
            eps_grid: None,
            generator: None,
        }
    }
}

/// Flag values as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tie_policy: Option<TiePolicy>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub bins: Option<usize>,
    pub columns: Option<Vec<String>>,
}

impl RunConfig {
    pub fn resolve(file: FileConfig, flags: Overrides) -> RunConfig {
        let d = RunConfig::default();
        RunConfig {
            tie_policy: flags.tie_policy.or(file.tie_policy).unwrap_or(d.tie_policy),
            seed: flags.seed.or(file.seed).unwrap_or(d.seed),
            output_path: flags.out.or(file.out),
            reps: flags.reps.or(file.reps),
            n: flags.n.or(file.n),
            bins: flags.bins.or(file.bins),
            columns: flags.columns.or(file.columns),
            thresholds: file.thresholds.unwrap_or_default(),
            n_grid: file.n_grid,
            eps_grid: file.eps_grid,
            generator: file.generator,
        }
    }

    fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            n: self.n,
            reps: self.reps,
            n_grid: self.n_grid.clone(),
            eps_grid: self.eps_grid.clone(),
            generator: self.generator,
            bins: self.bins,
            thresholds: self.thresholds.clone(),
        }
    }
}

fn selected<'a>(ds: &'a Dataset, names: Option<&[String]>) -> CliResult<Vec<(&'a str, &'a [f64])>> {
    match names {
        None => Ok(ds
            .column_names
            .iter()
            .zip(&ds.columns)
            .map(|(n, c)| (n.as_str(), c.as_slice()))
            .collect()),
        Some(names) => names
            .iter()
            .map(|name| {
                let col = ds.column(name)?;
                let idx = ds.column_names.iter().position(|c| c == name).unwrap();
                Ok((ds.column_names[idx].as_str(), col))
            })
            .collect(),
    }
}

fn degenerate(err: rankql::Error, x: &str, y: &str) -> CliError {
    match err {
        rankql::Error::DegenerateVariable(which) => match which.as_str() {
            "x" => CliError::Degenerate(x.to_string()),
            "y" => CliError::Degenerate(y.to_string()),
            _ => CliError::Degenerate(format!("{x}, {y}")),
        },
        other => CliError::Core(other),
    }
}

/// Pairwise rank correlations of the selected columns (all by default).
pub fn cmd_corr(ds: &Dataset, cfg: &RunConfig) -> CliResult<Value> {
    let cols = selected(ds, cfg.columns.as_deref())?;
    if cols.len() < 2 {
        return Err(CliError::Usage("corr needs at least two columns".into()));
    }
    let mut pairs = Vec::new();
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            let (xn, x) = cols[i];
            let (yn, y) = cols[j];
            let fit = correlate(x, y, cfg.tie_policy).map_err(|e| degenerate(e, xn, yn))?;
            let bound = variance_bound(&fit).ok();
            pairs.push(json!({
                "x": xn,
                "y": yn,
                "rho_hat": fit.rho_hat,
                "t_stat": fit.t_stat,
                "p_value": fit.p_value,
                "dof": fit.dof,
                "fisher_info": fit.fisher_info,
                "variance_bound": bound,
                "lambda": fit.lambda,
                "s2_x": fit.s2_x,
                "s2_y": fit.s2_y,
            }));
        }
    }
    Ok(json!({
        "command": "corr",
        "source": ds.source_path,
        "n": ds.n(),
        "tie_policy": cfg.tie_policy,
        "pairs": pairs,
    }))
}

fn design(ds: &Dataset, response: &str, predictors: &[String], policy: TiePolicy) -> CliResult<DesignEmbedding> {
    if predictors.is_empty() {
        return Err(CliError::Usage("no predictors given".into()));
    }
    let y = ds.column(response)?;
    let xs: Vec<&[f64]> = predictors.iter().map(|p| ds.column(p)).collect::<CliResult<_>>()?;
    if y.iter().all(|v| *v == y[0]) {
        return Err(CliError::Degenerate(response.to_string()));
    }
    for (name, col) in predictors.iter().zip(&xs) {
        if col.iter().all(|v| *v == col[0]) {
            return Err(CliError::Degenerate(name.clone()));
        }
    }
    Ok(DesignEmbedding::from_raw(&xs, y, policy)?)
}

/// Predictors default to every column other than the response.
fn predictors_or_rest(ds: &Dataset, response: &str, predictors: &[String]) -> Vec<String> {
    if predictors.is_empty() {
        ds.column_names.iter().filter(|c| *c != response).cloned().collect()
    } else {
        predictors.to_vec()
    }
}

fn residual_summary(res: &[f64]) -> Value {
    let n = res.len() as f64;
    let min = res.iter().copied().fold(f64::INFINITY, f64::min);
    let max = res.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = res.iter().sum::<f64>() / n;
    let rss: f64 = res.iter().map(|r| r * r).sum();
    json!({"min": min, "max": max, "mean": mean, "rss": rss})
}

fn fit_json(fit: &RegressionFit) -> Value {
    let mut v = json!({
        "beta": fit.beta,
        "cov_beta": fit.cov_beta,
        "cov_sandwich": fit.cov_sandwich,
        "s2": fit.s2,
        "residuals": residual_summary(&fit.residuals),
    });
    if let Some(w) = &fit.weights {
        v["weights"] = json!(w);
    }
    if let Some(s) = &fit.sigma2_by_obs {
        v["sigma2_by_obs"] = json!(s);
    }
    v
}

/// Rank-space regression of `response` on `predictors`, optionally with
/// binned inverse-variance weights.
pub fn cmd_fit(ds: &Dataset, response: &str, predictors: &[String], weighted: bool, cfg: &RunConfig) -> CliResult<Value> {
    let predictors = predictors_or_rest(ds, response, predictors);
    let d = design(ds, response, &predictors, cfg.tie_policy)?;
    let ols = fit_ql(&d)?;
    let (fit, bins) = if weighted {
        let bins = cfg.bins.unwrap_or_else(|| rankql::regression::default_bins(d.n));
        let s2 = estimate_sigma2(&ols, &d, bins)?;
        (fit_weighted(&d, &s2)?, Some(bins))
    } else {
        (ols, None)
    };
    let mut v = fit_json(&fit);
    v["command"] = json!("fit");
    v["source"] = json!(ds.source_path);
    v["response"] = json!(response);
    v["predictors"] = json!(predictors);
    v["weighted"] = json!(weighted);
    v["n"] = json!(d.n);
    v["tie_policy"] = json!(cfg.tie_policy);
    if let Some(b) = bins {
        v["bins"] = json!(b);
    }
    Ok(v)
}

/// Two-stage least squares with embedded instruments.
pub fn cmd_iv(
    ds: &Dataset,
    response: &str,
    predictors: &[String],
    instruments: &[String],
    cfg: &RunConfig,
) -> CliResult<Value> {
    if instruments.is_empty() {
        return Err(CliError::Usage("iv needs --instruments".into()));
    }
    let d = design(ds, response, predictors, cfg.tie_policy)?;
    let mut z = Vec::with_capacity(instruments.len());
    for name in instruments {
        let col = ds.column(name)?;
        if col.iter().all(|v| *v == col[0]) {
            return Err(CliError::Degenerate(name.clone()));
        }
        z.push(embed(col, cfg.tie_policy)?.values);
    }
    let z = DMatrix::from_vec(d.n, z.len(), z.concat());
    let fit = fit_2sls(&d, &z)?;
    Ok(json!({
        "command": "iv",
        "source": ds.source_path,
        "response": response,
        "predictors": predictors,
        "instruments": instruments,
        "n": d.n,
        "tie_policy": cfg.tie_policy,
        "beta_2sls": fit.beta_2sls,
        "first_stage_f": fit.first_stage_f,
        "first_stage_f_by_column": fit.first_stage_f_by_column,
        "projection_trace": fit.projection_trace,
        "residuals": residual_summary(&fit.residuals),
    }))
}

/// Embedding moments of each selected column.
pub fn cmd_moments(ds: &Dataset, cfg: &RunConfig) -> CliResult<Value> {
    let cols = selected(ds, cfg.columns.as_deref())?;
    let mut out = Vec::new();
    for (name, col) in cols {
        let e = embed(col, cfg.tie_policy)?;
        let m = central_moments(&e);
        out.push(json!({
            "column": name,
            "mu2": m.mu2,
            "mu3": m.mu3,
            "mu4": m.mu4,
            "tie_groups": e.tie_groups.len(),
            "embedding_sum": e.sum(),
        }));
    }
    Ok(json!({
        "command": "moments",
        "source": ds.source_path,
        "n": ds.n(),
        "tie_policy": cfg.tie_policy,
        "columns": out,
    }))
}

pub fn cmd_simulate(name: &str, cfg: &RunConfig) -> CliResult<SimReport> {
    Ok(montecarlo::simulate(name, &cfg.sim_config(), Schedule::Parallel)?)
}

/// Canonical JSON (sorted keys, 17 significant digits) plus newline.
pub fn render(v: &Value) -> String {
    rankql::report::to_canonical_json(v).expect("JSON values always serialize")
}

pub fn write_output(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => fs::write(p, text).map_err(|e| CliError::Output {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
    }
}
