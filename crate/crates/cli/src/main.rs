use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rankql::TiePolicy;
use rankql_cli::{
    cmd_corr, cmd_fit, cmd_iv, cmd_moments, cmd_simulate, ingest_csv, render, write_output, CliError, CliResult,
    FileConfig, Overrides, RunConfig, EXIT_CLAIMS_FAILED, EXIT_ERROR, EXIT_OK,
};

#[derive(Parser)]
#[command(name = "rankql", version, about = "Rank-embedding correlation, regression and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Tie handling: kemeny (ties score 0) or paper (ties score +1)
    #[arg(long, value_parser = parse_policy)]
    tie_policy: Option<TiePolicy>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write JSON here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Bins for the residual-variance estimate of weighted fits
    #[arg(long)]
    bins: Option<usize>,
    /// Comma-separated column subset
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// JSON file with any of the flags above; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise rank correlations with t tests
    Corr {
        #[command(flatten)]
        common: Common,
        input: PathBuf,
    },
    /// Rank-space regression
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        response: String,
        /// Defaults to every other column
        #[arg(long, value_delimiter = ',')]
        predictors: Vec<String>,
        /// Reweight by binned residual variances
        #[arg(long)]
        weighted: bool,
        input: PathBuf,
    },
    /// Two-stage least squares on embeddings
    Iv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        response: String,
        #[arg(long, value_delimiter = ',', required = true)]
        predictors: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        instruments: Vec<String>,
        input: PathBuf,
    },
    /// Embedding moments per column
    Moments {
        #[command(flatten)]
        common: Common,
        input: PathBuf,
    },
    /// Run a simulation experiment
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Include per-replicate estimates in the JSON report
        #[arg(long)]
        replicates: bool,
        /// Also write per-replicate estimates as CSV
        #[arg(long)]
        dump_csv: Option<PathBuf>,
        /// unbiasedness, null-calibration, rate-check, breakdown, weak-iv or hetero-recovery
        experiment: String,
    },
}

fn parse_policy(s: &str) -> Result<TiePolicy, String> {
    s.parse()
}

fn config(common: &Common) -> CliResult<RunConfig> {
    let file = match &common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        tie_policy: common.tie_policy,
        seed: common.seed,
        out: common.out.clone(),
        reps: common.reps,
        n: common.n,
        bins: common.bins,
        columns: common.columns.clone(),
    };
    Ok(RunConfig::resolve(file, flags))
}

fn run(cli: Cli) -> CliResult<u8> {
    let (cfg, json) = match cli.command {
        Command::Corr { common, input } => {
            let cfg = config(&common)?;
            let v = cmd_corr(&ingest_csv(input)?, &cfg)?;
            (cfg, v)
        }
        Command::Fit {
            common,
            response,
            predictors,
            weighted,
            input,
        } => {
            let cfg = config(&common)?;
            let v = cmd_fit(&ingest_csv(input)?, &response, &predictors, weighted, &cfg)?;
            (cfg, v)
        }
        Command::Iv {
            common,
            response,
            predictors,
            instruments,
            input,
        } => {
            let cfg = config(&common)?;
            let v = cmd_iv(&ingest_csv(input)?, &response, &predictors, &instruments, &cfg)?;
            (cfg, v)
        }
        Command::Moments { common, input } => {
            let cfg = config(&common)?;
            let v = cmd_moments(&ingest_csv(input)?, &cfg)?;
            (cfg, v)
        }
        Command::Simulate {
            common,
            replicates,
            dump_csv,
            experiment,
        } => {
            let cfg = config(&common)?;
            let report = cmd_simulate(&experiment, &cfg)?;
            if let Some(path) = &dump_csv {
                write_output(&report.to_csv(), Some(path))?;
            }
            write_output(&report.to_json(replicates), cfg.output_path.as_deref())?;
            for c in report.claim_checks.iter().filter(|c| !c.pass) {
                eprintln!("claim failed: {} = {} ({})", c.claim, c.observed, c.threshold);
            }
            return Ok(if report.all_pass() { EXIT_OK } else { EXIT_CLAIMS_FAILED });
        }
    };
    write_output(&render(&json), cfg.output_path.as_deref())?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CliError::exit_code(&e))
        }
    }
}
