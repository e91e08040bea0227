use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pwkit::pwcore::CatalogKind;
use pwkit_cli::{describe_catalog, run_experiment, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "pwkit", version, about = "Paley-Wiener warp experiments")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    emit_plots: bool,
    /// Overrides the tolerance that decides pass or fail for this experiment kind.
    #[arg(long)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed form, support and L2 norm of a catalog function.
    Describe {
        /// Dimension n.
        n: usize,
        /// K, P or Q.
        kind: String,
        /// Axis j for P and Q (1-based).
        j: Option<usize>,
    },
    /// Print the effective config (after overrides) and its hash, then exit.
    Check,
}

fn parse_kind(kind: &str, j: Option<usize>) -> Result<CatalogKind, CliError> {
    match (kind.to_ascii_uppercase().as_str(), j) {
        ("K", None) => Ok(CatalogKind::K),
        ("P", Some(j)) => Ok(CatalogKind::P(j)),
        ("Q", Some(j)) => Ok(CatalogKind::Q(j)),
        ("K", Some(_)) => Err(CliError::Usage("K takes no axis index".into())),
        ("P" | "Q", None) => Err(CliError::Usage(format!("{kind} needs an axis index j"))),
        _ => Err(CliError::Usage(format!(
            "unknown catalog kind {kind:?}; expected K, P or Q"
        ))),
    }
}

fn load(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <PATH> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if cli.emit_plots {
        cfg.output.plots = true;
    }
    if let Some(tol) = cli.tol {
        cfg.set_primary_tolerance(tol)?;
    }
    cfg.validate()?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn main_inner(cli: Cli) -> Result<i32, CliError> {
    match &cli.command {
        Some(Command::Describe { n, kind, j }) => {
            println!("{}", describe_catalog(*n, parse_kind(kind, *j)?)?);
            Ok(0)
        }
        Some(Command::Check) => {
            let (cfg, _) = load(&cli)?;
            print!("{}", cfg.to_json());
            println!("config hash {}", cfg.hash());
            Ok(0)
        }
        None => {
            let (cfg, base) = load(&cli)?;
            let outcome = run_experiment(&cfg, &base)?;
            println!("{}", outcome.summary);
            for p in &outcome.artifacts {
                println!("wrote {}", p.display());
            }
            println!("{}: {:?}", cfg.experiment.name(), outcome.status);
            Ok(outcome.status.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("pwkit: {e}");
            ExitCode::from(1)
        }
    }
}
