use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matfield::harness::{run, ExperimentConfig, ExperimentReport, Mode};
use matfield::Error;

/// Weighted-MSE transceiver design experiments.
///
/// Exit status: 0 all checks passed, 1 some invariant failed, 2 bad
/// configuration, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "matfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize the trace of the weighted MSE matrix.
    DesignTrace(Common),
    /// Minimize the log-determinant of the weighted MSE matrix.
    DesignDet(Common),
    /// Sum-MSE relay forwarding design.
    RelayMse(Common),
    /// Capacity-maximizing relay forwarding design.
    RelayCapacity(Common),
    /// Sweep the two eigenvalue lower bounds and their equality cases.
    VerifyInequalities(Common),
    /// Cross-check relay quantities computed by independent routes.
    VerifyEquivalence(Common),
    /// Compare both designs with the random-search oracle.
    OracleCompare(Common),
    /// Informational: DFT-rotated weights with nearly equal gains.
    DemoSchur(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a per-record CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Regularize a singular Π instead of refusing.
    #[arg(long)]
    jitter_pi: bool,
    /// Random samples for the search oracle (0 disables it).
    #[arg(long)]
    budget: Option<usize>,
    /// Suppress the text table.
    #[arg(long, short)]
    quiet: bool,
}

impl Command {
    fn split(self) -> (Mode, Common) {
        match self {
            Command::DesignTrace(c) => (Mode::DesignTrace, c),
            Command::DesignDet(c) => (Mode::DesignDet, c),
            Command::RelayMse(c) => (Mode::RelayMse, c),
            Command::RelayCapacity(c) => (Mode::RelayCapacity, c),
            Command::VerifyInequalities(c) => (Mode::VerifyInequalities, c),
            Command::VerifyEquivalence(c) => (Mode::VerifyEquivalence, c),
            Command::OracleCompare(c) => (Mode::OracleCompare, c),
            Command::DemoSchur(c) => (Mode::DemoSchur, c),
        }
    }
}

fn load_config(mode: Mode, args: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text, Some(mode))?
        }
        None => ExperimentConfig::new(mode),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(budget) = args.budget {
        config.budget = budget;
    }
    config.jitter_pi |= args.jitter_pi;
    config.validate()?;
    Ok(config)
}

fn write_outputs(report: &ExperimentReport, args: &Common) -> Result<(), Error> {
    if let Some(path) = &args.out {
        fs::write(path, report.to_json()? + "\n")
            .map_err(|e| Error::Config(format!("writing {}: {e}", path.display())))?;
    }
    if let Some(path) = &args.csv {
        let file = fs::File::create(path).map_err(|e| Error::Config(format!("writing {}: {e}", path.display())))?;
        report.write_csv(file)?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let (mode, args) = Cli::parse().command.split();
    let config = match load_config(mode, &args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if !args.quiet {
        print!("{}", report.text_table());
    }
    if let Err(e) = write_outputs(&report, &args) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
