use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use letf_cli::commands::{self, CliError, Outcome};
use letf_cli::config::{ConfigError, LoadedConfig};

/// Short-maturity prices and implied volatilities of leveraged ETF options.
#[derive(Debug, Parser)]
#[command(name = "letf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; defaults to `<output.directory>/<command>.csv`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Leading-order prices per leverage ratio, strike and side.
    Price(Common),
    /// ETF and LETF Lévy densities on a grid.
    Density(Common),
    /// Monte Carlo and asymptotic implied volatility smiles.
    Smile {
        #[command(flatten)]
        common: Common,
        /// Overrides `mc.paths`.
        #[arg(long)]
        paths: Option<u64>,
        /// Overrides `mc.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Error-decomposition constants per leverage ratio and truncation level.
    Diagnose(Common),
    /// Closed forms against quadrature; exits 4 on drift.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        column: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(LoadedConfig::parse(&src)?)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("LETF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| ConfigError {
            line: None,
            column: None,
            message: format!("LETF_THREADS must be a positive integer, got {v:?}"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(())
}

fn emit(
    outcome: &Outcome,
    out: Option<&Path>,
    dir: Option<&str>,
    name: &str,
) -> Result<(), CliError> {
    let text = outcome.table.render();
    let target = match (out, dir) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(d)) => {
            std::fs::create_dir_all(d)?;
            Some(Path::new(d).join(format!("{name}.csv")))
        }
        (None, None) => None,
    };
    match target {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    let (name, common) = match &cli.command {
        Command::Selftest { out } => {
            let outcome = commands::selftest()?;
            emit(&outcome, out.as_deref(), None, "selftest")?;
            return Ok(outcome);
        }
        Command::Price(c) => ("price", c),
        Command::Density(c) => ("density", c),
        Command::Smile { common, .. } => ("smile", common),
        Command::Diagnose(c) => ("diagnose", c),
    };
    let cfg = load(&common.config)?;
    let dir = cfg.output_directory()?.map(str::to_owned);
    let outcome = match &cli.command {
        Command::Price(_) => commands::price(&cfg)?,
        Command::Density(_) => commands::density(&cfg)?,
        Command::Smile { paths, seed, .. } => commands::smile(&cfg, *paths, *seed)?,
        Command::Diagnose(_) => commands::diagnose(&cfg)?,
        Command::Selftest { .. } => unreachable!("handled above"),
    };
    emit(&outcome, common.out.as_deref(), dir.as_deref(), name)?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let selftest = matches!(cli.command, Command::Selftest { .. });
    match run(cli) {
        Ok(o) if o.flagged == 0 => ExitCode::SUCCESS,
        Ok(o) => {
            let code = if selftest { 4 } else { 3 };
            eprintln!("letf: {} flagged row(s)", o.flagged);
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("letf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
