use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use terrace_core::experiment::{
    cmd_ode_scan, cmd_report, cmd_resume, cmd_signs, cmd_simulate, cmd_sweep, cmd_terrace, Against, Outcome,
    RunConfig,
};
use terrace_core::Error;

/// Periodic reaction-diffusion experiments: phase ladders, front
/// simulations and terrace detection.
#[derive(Parser, Debug)]
#[command(name = "terrace-lab", version)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Run definition (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Parent directory for the new run directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan the period map for fixed points.
    OdeScan(ConfigArgs),
    /// Simulate Heaviside data and store period snapshots.
    Simulate {
        #[arg(long, required_unless_present = "resume", conflicts_with = "resume")]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "resume")]
        out: Option<PathBuf>,
        /// Continue an interrupted or failed run directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Detect the terrace of a finished run.
    Terrace {
        #[arg(long)]
        run: PathBuf,
        /// Ladder JSON (defaults to the run's own).
        #[arg(long)]
        ladder: Option<PathBuf>,
        /// Take measurement settings from this config instead of the run's.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (defaults to a new `terrace` directory in the run).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sign words of differences between a run and a reference.
    Signs {
        #[arg(long)]
        run: PathBuf,
        /// Run directory, `self`, or `flat:<value>`.
        #[arg(long)]
        against: String,
        #[arg(long, default_value_t = -2, allow_hyphen_values = true)]
        k_min: i64,
        #[arg(long, default_value_t = 2, allow_hyphen_values = true)]
        k_max: i64,
        /// Dead band around zero.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every point of the config's [sweep] section.
    Sweep {
        #[command(flatten)]
        args: ConfigArgs,
        /// Concurrent runs.
        #[arg(long, env = "TERRACE_LAB_WORKERS")]
        workers: Option<usize>,
    },
    /// Write plot-ready CSVs for a run.
    Report {
        #[arg(long)]
        run: PathBuf,
        /// Terrace directory (defaults to the latest one in the run).
        #[arg(long)]
        terrace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<RunConfig, Error> {
    RunConfig::load(path)
}

fn run(cmd: Command) -> Result<Outcome, Error> {
    match cmd {
        Command::OdeScan(a) => cmd_ode_scan(&load(&a.config)?, a.out.as_deref()),
        Command::Simulate { config, out, resume } => match (resume, config) {
            (Some(dir), _) => cmd_resume(&dir),
            (None, Some(c)) => cmd_simulate(&load(&c)?, out.as_deref()),
            (None, None) => Err(Error::config("simulate needs --config or --resume")),
        },
        Command::Terrace { run, ladder, config, out } => {
            let settings = config.map(|c| load(&c)).transpose()?.map(|c| c.measure.terrace);
            cmd_terrace(&run, ladder.as_deref(), settings.as_ref(), out.as_deref())
        }
        Command::Signs {
            run,
            against,
            k_min,
            k_max,
            tol,
            out,
        } => {
            if k_min > k_max {
                return Err(Error::config("--k-min exceeds --k-max"));
            }
            cmd_signs(&run, &Against::parse(&against)?, k_min..=k_max, tol, out.as_deref())
        }
        Command::Sweep { args, workers } => {
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if workers == 0 {
                return Err(Error::config("worker budget must be at least 1"));
            }
            cmd_sweep(&load(&args.config)?, args.out.as_deref(), workers)
        }
        Command::Report { run, terrace, out } => cmd_report(&run, terrace.as_deref(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(o) => {
            println!("{}", o.dir.display());
            let h = &o.manifest.headline;
            if let Some(n) = h.n_fronts {
                println!("fronts: {n}");
                println!("speeds: {:?}", h.speeds);
                println!("floors: {:?}", h.floors);
            } else if !h.fixed_points.is_empty() {
                println!("fixed points: {:?}", h.fixed_points);
            }
            for n in &h.notes {
                println!("note: {n}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("terrace-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
