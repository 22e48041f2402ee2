mod args;
mod bench;
mod commands;

use std::process::ExitCode;

use bopnn::BopnnError;
use clap::Parser;

use args::{Cli, Command};

/// `println!` that ignores a closed stdout.
#[macro_export]
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// Failure of a subcommand, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input: exit 2.
    Usage(String),
    /// Anything else: exit 1.
    Internal(String),
}

impl From<BopnnError> for CliError {
    fn from(e: BopnnError) -> Self {
        use BopnnError::*;
        match e {
            Io(_)
            | ParseError { .. }
            | MissingValue { .. }
            | UnknownTarget(_)
            | SchemaMismatch(_)
            | DimensionMismatch { .. }
            | InvalidHyperParams(_)
            | VersionMismatch { .. }
            | CorruptFile(_)
            | TooSmall { .. }
            | DegenerateColumn { .. }
            | ProjectionDisabled => CliError::Usage(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Importance(a) => commands::importance(&a),
        Command::Project(a) => commands::project(&a),
        Command::Bench(a) => bench::bench(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(1)
        }
    }
}
