//! Command-line front end: run configured experiments, emit presets, sweep a
//! parameter and re-analyze stored frames.
//!
//! Exit status: 0 on success, 2 for usage, configuration or input errors,
//! 3 for numerical failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "rabilitho", version, about = "Standing-wave Rabi patterning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `shots.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `shots.num_shots`.
    #[arg(long)]
    shots: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Dotted-path override, e.g. `sequence.0.area_in_pi=9`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Analysis window `lo,hi` in µm for every metric.
    #[arg(long, value_parser = commands::parse_window, allow_hyphen_values = true)]
    window: Option<(f64, f64)>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured experiment and write frames, report and manifest.
    Run(RunArgs),
    /// Write a fully populated reference config.
    Preset {
        /// One of fig1c, fig2, fig3.
        name: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per value of a numeric config field.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted path of the swept field; defaults to `sweep.parameter`.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values; defaults to `sweep.values`.
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
    },
    /// Analyze stored frame files.
    Analyze {
        #[arg(required = true)]
        frames: Vec<PathBuf>,
        /// Config supplying the analysis settings; defaults apply otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = commands::parse_window, allow_hyphen_values = true)]
        window: Option<(f64, f64)>,
        #[arg(long)]
        min_prominence: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(&args.into()),
        Command::Preset { name, out } => commands::preset(&name, out.as_deref()),
        Command::Sweep { run, param, values } => commands::sweep(&run.into(), param.as_deref(), values.as_deref()),
        Command::Analyze {
            frames,
            config,
            window,
            min_prominence,
        } => commands::analyze(&frames, config.as_deref(), window, min_prominence),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

impl From<RunArgs> for commands::RunOptions {
    fn from(a: RunArgs) -> Self {
        commands::RunOptions {
            config: a.config,
            seed: a.seed,
            shots: a.shots,
            out_dir: a.out_dir,
            overrides: a.overrides,
            window: a.window,
        }
    }
}
