use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlwpi_cli::config::RunConfig;
use nlwpi_cli::run::{run, Mode, RunOptions};
use nlwpi_cli::CliError;
use nlwpi_core::propagation::PulseMode;

#[derive(Parser)]
#[command(name = "nlwpi", version, about = "Nonlinear wave-packet interferometry of a vibronic dimer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List pathway terms per family.
    Terms {
        #[command(flatten)]
        common: Common,
        /// Restrict to one family id, e.g. "++:B|DCAPP".
        #[arg(long)]
        family: Option<String>,
    },
    /// Signature components and the assembled interferogram over a delay grid.
    Signal(Common),
    /// GSB / ESA / SE pump-probe decomposition over a t_CA scan.
    PumpProbe(Common),
    /// Oracle convergence ladder; exits 3 if the observed order is too low.
    Verify(Common),
    /// Print the JSON schema of the config file.
    Schema,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    include_anomalous_term: bool,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PulseMode>,
}

fn parse_mode(s: &str) -> Result<PulseMode, String> {
    match s {
        "impulsive" => Ok(PulseMode::Impulsive),
        "finite" => Ok(PulseMode::Finite),
        _ => Err(format!("expected impulsive or finite, got {s}")),
    }
}

fn execute(mode: Mode, common: Common, family: Option<String>) -> Result<(), CliError> {
    let mut config = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.include_anomalous_term {
        config.include_anomalous_term = true;
    }
    if let Some(m) = common.mode {
        config.propagation.mode = m;
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let outcome = run(mode, config, &RunOptions { out: common.out, family })?;
    let mut stdout = std::io::stdout();
    let _ = writeln!(stdout, "{}", outcome.summary);
    let _ = writeln!(stdout, "wrote {} files to {}", outcome.artifacts.len() + 1, outcome.dir.display());
    match outcome.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Terms { common, family } => execute(Mode::Terms, common, family),
        Command::Signal(c) => execute(Mode::Signal, c, None),
        Command::PumpProbe(c) => execute(Mode::PumpProbe, c, None),
        Command::Verify(c) => execute(Mode::Verify, c, None),
        Command::Schema => {
            let schema = schemars::schema_for!(RunConfig);
            let text = serde_json::to_string_pretty(&schema).expect("schema serializes");
            // a closed pipe (`nlwpi schema | head`) is not an error
            let _ = writeln!(std::io::stdout(), "{text}");
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
