use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod events;

#[derive(Parser)]
#[command(name = "pthink", version, about = "Parallel generate/verify/refine runs and their analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline once per problem, appending to the store; resumable.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        store: PathBuf,
    },
    /// Execute a (threads x rounds x verdicts) grid and write the scaling CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Sweep spec file; defaults to the config's `sweep` section.
        #[arg(long)]
        sweep: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
        /// Overrides the sweep's problem source.
        #[arg(long)]
        problems: Option<PathBuf>,
        /// Overrides the sweep's CSV path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Produce a report from the run store.
    Analyze {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        #[arg(long)]
        out: PathBuf,
        /// k values for the passk report, e.g. 1,2,4; defaults to 1..=n.
        #[arg(long, value_delimiter = ',')]
        k: Vec<u64>,
    },
    /// Evaluate a length-capped reward.
    Reward {
        /// 1 if the answer is correct, 0 otherwise.
        #[arg(long)]
        score: u8,
        #[arg(long)]
        length: f64,
        /// hard:L, uniform:a:b, gaussian:mu:sigma or truncexp:rate:upper.
        #[arg(long)]
        dist: String,
        /// Monte Carlo samples; closed form when absent.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compile and run one source file against a problem's tests.
    Judge {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        source: PathBuf,
        /// Config whose `judge.execution` section supplies toolchains.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        toolchain: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ReportKind {
    Selection,
    Passk,
    Fit,
    Verification,
}

fn init_logging() {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .parse_env("PTHINK_LOG")
        .format(|buf, record| {
            let line = serde_json::json!({
                "event": "log",
                "level": record.level().as_str().to_ascii_lowercase(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, problems, store } => commands::run(&config, &problems, &store),
        Command::Sweep { config, sweep, store, problems, csv } => {
            commands::sweep(&config, sweep.as_deref(), &store, problems.as_deref(), csv.as_deref())
        }
        Command::Analyze { store, kind, out, k } => commands::analyze(&store, kind, &out, &k),
        Command::Reward { score, length, dist, samples, seed } => {
            commands::reward(score, length, &dist, samples, seed)
        }
        Command::Judge { problem, source, config, toolchain } => {
            commands::judge(&problem, &source, config.as_deref(), toolchain.as_deref())
        }
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            events::emit(&failure.event());
            ExitCode::from(failure.exit_code())
        }
    }
}
