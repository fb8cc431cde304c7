//! `sinai-lab`: validate configs, run experiments, write reports.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sinai_core::experiments::{self, ExperimentConfig, Report, EXPERIMENTS};

#[derive(Parser)]
#[command(name = "sinai-lab", version, about = "Monte Carlo checks for Sinai's walk in a random environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Check a config without running it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set n=1000` or `--set params.f_up=2`.
    #[arg(long = "set", value_name = "K=V")]
    set: Vec<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Print the experiment names and exit.
    #[arg(long)]
    list: bool,
    /// Validate only.
    #[arg(long)]
    validate: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long = "set", value_name = "K=V")]
    set: Vec<String>,
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args),
        Command::Validate(args) => match load(&args.config, &args.set) {
            Ok(c) => validate(&c),
            Err(code) => code,
        },
    }
}

struct Loaded {
    config: ExperimentConfig,
    diagnostics: Vec<String>,
}

fn load(path: &Path, set: &[String]) -> Result<Loaded, ExitCode> {
    let seed_env = std::env::var(config::SEED_VAR).ok();
    match config::load(path, set, seed_env) {
        Ok((c, text)) => {
            let config = c.resolved();
            let name = path.display().to_string();
            let diagnostics = config.diagnostics().iter().map(|d| config::anchor(&name, &text, d)).collect();
            Ok(Loaded { config, diagnostics })
        }
        Err(config::ConfigError(lines)) => {
            for l in lines {
                eprintln!("error: {l}");
            }
            Err(ExitCode::from(EXIT_CONFIG))
        }
    }
}

fn validate(l: &Loaded) -> ExitCode {
    if l.diagnostics.is_empty() {
        println!("ok");
        println!("{}", serde_json::to_string_pretty(&l.config).expect("config serializes"));
        ExitCode::SUCCESS
    } else {
        for d in &l.diagnostics {
            eprintln!("error: {d}");
        }
        ExitCode::from(EXIT_CONFIG)
    }
}

fn run(args: RunArgs) -> ExitCode {
    if args.list {
        for name in EXPERIMENTS {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    let Some(path) = args.config else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(EXIT_CONFIG);
    };
    let loaded = match load(&path, &args.set) {
        Ok(l) => l,
        Err(code) => return code,
    };
    if args.validate || !loaded.diagnostics.is_empty() {
        return validate(&loaded);
    }
    let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let config = loaded.config;
    let started = chrono::Utc::now();
    let report = match experiments::run(&config, jobs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    };
    let finished = chrono::Utc::now();
    let dir = args.out.join(&report.experiment).join(&report.config_hash);
    let meta = Meta {
        experiment: &report.experiment,
        config_hash: &report.config_hash,
        started: started.to_rfc3339(),
        finished: finished.to_rfc3339(),
        jobs,
        output_dir: dir.display().to_string(),
        passed: report.passed(),
    };
    if let Err(e) = write_outputs(&dir, &report, &meta) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(EXIT_FAIL);
    }
    print!("{}", report.summary());
    println!("results in {}", dir.display());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

/// Run metadata; the only output that varies between identical runs.
#[derive(Serialize)]
struct Meta<'a> {
    experiment: &'a str,
    config_hash: &'a str,
    started: String,
    finished: String,
    jobs: usize,
    output_dir: String,
    passed: bool,
}

fn write_outputs(dir: &Path, report: &Report, meta: &Meta) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    report.write_json(BufWriter::new(File::create(dir.join("report.json"))?))?;
    let mut csv = BufWriter::new(File::create(dir.join("data.csv"))?);
    report.write_csv(&mut csv)?;
    csv.flush()?;
    fs::write(dir.join("summary.txt"), report.summary())?;
    let mut m = serde_json::to_string_pretty(meta)?;
    m.push('\n');
    fs::write(dir.join("meta.json"), m)
}
