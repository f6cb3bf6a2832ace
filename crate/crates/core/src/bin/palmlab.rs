use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use palmlab::harness::{self, Overrides, Subcommand};
use palmlab::Error;

#[derive(Parser, Debug)]
#[command(name = "palmlab", version, about = "Monte Carlo checks of Palm calculus identities")]
struct Cli {
    /// One of: sample, verify-poisson, verify-mecke, verify-clmm, verify-mtp,
    /// verify-degrees, verify-thinning, verify-thickening, verify-nonunimodular,
    /// verify-palm-calculus, alloc, extra-head, voronoi-volume, clump, zline, encode-marks.
    subcommand: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Directory for report.csv, manifest.json, timing.json and dumps.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to PALMLAB_THREADS, then to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Use the larger trial counts.
    #[arg(long)]
    paper_scale: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InsufficientData(_) | Error::Unclaimed => 1,
        _ => 2,
    }
}

fn threads(cli: &Cli) -> Result<Option<usize>, Error> {
    if cli.threads.is_some() {
        return Ok(cli.threads);
    }
    match std::env::var("PALMLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("PALMLAB_THREADS={v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn main_inner(cli: &Cli) -> Result<bool, Error> {
    let sub: Subcommand = cli.subcommand.parse()?;
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        out: cli.out.clone(),
        paper_scale: cli.paper_scale,
    };
    let cfg = harness::load(sub, cli.config.as_deref(), &overrides)?;
    let outcome = match threads(cli)? {
        Some(0) => return Err(Error::Config("thread count must be positive".into())),
        Some(n) => harness::run_with_threads(&cfg, n)?,
        None => harness::run(&cfg)?,
    };
    print!("{}", outcome.csv);
    if let Some(dir) = &cfg.output.dir {
        harness::write_outcome(&outcome, std::path::Path::new(dir))?;
    }
    Ok(outcome.manifest.pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("palmlab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
