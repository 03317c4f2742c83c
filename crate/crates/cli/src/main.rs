mod commands;
mod config;
mod error;
mod ingest;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpte_core::PreferenceKind;

use config::{IngestConfig, PreferenceConfig, RunConfig};
use error::CliError;

/// Preference-based treatment effects: simulation, estimation, policy learning and experiments.
#[derive(Debug, Parser)]
#[command(name = "cpte", version)]
struct Cli {
    /// Run config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Append hidden potential outcomes and propensities to simulated data.
    #[arg(long, global = true)]
    with_oracle: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset from the config's `dgp` section.
    Simulate {
        #[arg(long)]
        out: PathBuf,
    },
    /// CPTE estimates at query points for every configured estimator.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a policy and report its plug-in and one-step values.
    Learn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment grid and write results, summary and config echo.
    Experiment {
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write per-cell wall times (not reproducible byte for byte).
        #[arg(long)]
        timings: bool,
    },
    /// Convert an external CSV into the dataset layout.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        treatment: Option<String>,
        /// Outcome column, in priority order; repeatable.
        #[arg(long = "outcome")]
        outcomes: Vec<String>,
        /// `1` or `-1` per outcome, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        orientation: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        categorical: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        continuous: Vec<String>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.with_oracle |= cli.with_oracle;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Schema(format!("--threads: {e}")))?;
    }
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Simulate { out } => commands::simulate(&cfg, &out),
        Command::Estimate { data, points, out } => commands::estimate(&cfg, &data, &points, &out),
        Command::Learn { data, out } => {
            let rec = commands::learn(&mut cfg, &data, &out)?;
            print!("{}", commands::learn_report(&rec));
            Ok(())
        }
        Command::Experiment { out_dir, timings } => {
            let failed = commands::experiment(&mut cfg, &out_dir, timings)?;
            println!("wrote {}; {failed} failed cell(s)", out_dir.display());
            Ok(())
        }
        Command::Ingest {
            data,
            out,
            treatment,
            outcomes,
            orientation,
            categorical,
            continuous,
        } => {
            let mut spec = cfg.ingest.clone().unwrap_or_default();
            if let Some(t) = treatment {
                spec.treatment = t;
            }
            let flag = |v: Vec<String>, base: &mut Vec<String>| {
                if !v.is_empty() {
                    *base = v;
                }
            };
            flag(outcomes, &mut spec.outcomes);
            flag(categorical, &mut spec.categorical);
            flag(continuous, &mut spec.continuous);
            if !orientation.is_empty() {
                spec.orientation = orientation;
            }
            if spec.treatment.is_empty() {
                return Err(CliError::Schema("ingest: --treatment is required".into()));
            }
            let report = ingest::ingest(&spec, &data, &out)?;
            print!("{}", report.render());
            echo_ingest(&mut cfg, spec);
            io::write_text(&commands::echo_path(&out), &cfg.to_toml())
        }
    }
}

/// The echo of an ingest run also carries the preference implied by the outcomes.
fn echo_ingest(cfg: &mut RunConfig, spec: IngestConfig) {
    if cfg.preference.is_none() {
        let d = spec.outcomes.len();
        let orientation = if spec.orientation.is_empty() { vec![1.0; d] } else { spec.orientation.clone() };
        let kind = if d == 1 { PreferenceKind::PnsIndicator } else { PreferenceKind::LexicographicWin };
        cfg.preference = Some(PreferenceConfig {
            kind,
            orientation: Some(orientation),
        });
    }
    cfg.ingest = Some(spec);
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CPTE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
