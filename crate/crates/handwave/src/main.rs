use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use handwave::cli::{
    cmd_eval, cmd_fp_soak, cmd_gridsearch, cmd_induce, cmd_run, cmd_synth, cmd_train, SourceSpec,
};
use handwave::config::RunConfig;

/// Gesture recognition from Wi-Fi signal strength: synthesis, training,
/// evaluation and live recognition.
#[derive(Parser)]
#[command(name = "handwave", version, about)]
struct Cli {
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for models, CSVs and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Individual `key=value` configuration overrides (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled RSSI session log.
    Synth,
    /// Train the recognition stack on session logs.
    Train {
        /// Input session logs.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Repeated random-split evaluation of the classifier.
    Eval {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Cross-validated hyperparameter sweep.
    Gridsearch {
        /// Sweep spec, e.g. `tau=13,25,50;layers=1,2`.
        #[arg(long)]
        grid: String,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Gesture-free soak test measuring false positives.
    FpSoak {
        /// Directory holding model.bin and pipeline.params.
        #[arg(long)]
        model: PathBuf,
    },
    /// Stream recognition decisions to stdout.
    Run {
        #[arg(long)]
        model: PathBuf,
        /// `replay:<file>` or `live`.
        #[arg(long)]
        source: String,
    },
    /// Induce reply traffic with paced echo requests.
    Induce,
}

static STOP: AtomicBool = AtomicBool::new(false);

extern "C" fn handle_sigint(_: libc::c_int) {
    STOP.store(true, Ordering::Relaxed);
}

fn install_sigint_handler() {
    unsafe {
        libc::signal(libc::SIGINT, handle_sigint as *const () as libc::sighandler_t);
        libc::signal(libc::SIGTERM, handle_sigint as *const () as libc::sighandler_t);
    }
}

fn run(cli: Cli) -> handwave::Result<()> {
    let mut config = RunConfig::resolve(cli.config.as_deref(), &cli.sets)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    eprint!("resolved configuration:\n{}", config.to_kv_lines());

    match cli.command {
        Command::Synth => {
            cmd_synth(&config, &cli.out)?;
        }
        Command::Train { inputs } => {
            cmd_train(&config, &inputs, &cli.out)?;
        }
        Command::Eval { inputs } => {
            cmd_eval(&config, &inputs, &cli.out)?;
        }
        Command::Gridsearch { grid, inputs } => {
            cmd_gridsearch(&config, &inputs, &grid, &cli.out)?;
        }
        Command::FpSoak { model } => {
            cmd_fp_soak(&config, &model, &cli.out)?;
        }
        Command::Run { model, source } => {
            install_sigint_handler();
            let spec = SourceSpec::parse(&source)?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            cmd_run(&config, &model, spec, &mut lock, &STOP)?;
        }
        Command::Induce => {
            install_sigint_handler();
            cmd_induce(&config, &STOP)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
