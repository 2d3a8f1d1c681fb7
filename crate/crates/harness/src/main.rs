use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ymlab_harness::output::write_error;
use ymlab_harness::{load_config, run, ExperimentConfig, HarnessError, Kind, Strictness};

/// Pseudospectral Yang-Mills and Maxwell-Klein-Gordon experiments on the 3-torus.
#[derive(Parser, Debug)]
#[command(name = "ymlab", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// Config file; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides data.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for field transforms.
    #[arg(long, env = "YMLAB_THREADS")]
    threads: Option<usize>,
    /// Reject unknown config keys (default).
    #[arg(long, conflicts_with = "lax")]
    strict: bool,
    /// Warn about and ignore unknown config keys.
    #[arg(long)]
    lax: bool,
}

fn configure(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mode = if cli.lax { Strictness::Lax } else { Strictness::Strict };
    let mut cfg = match &cli.config {
        Some(p) => load_config(p, mode)?,
        None => ExperimentConfig::default().resolved(),
    };
    match cfg.run.kind {
        Some(k) if k != cli.kind => {
            return Err(HarnessError::Config(vec![format!(
                "config declares run.kind = {k} but the command is {}",
                cli.kind
            )]))
        }
        _ => cfg.run.kind = Some(cli.kind),
    }
    if let Some(seed) = cli.seed {
        cfg.data.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let out_dir = cli.out.clone();
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => return fail(out_dir.as_deref(), &e),
    };
    match run(&cfg) {
        Ok(summary) => {
            for m in &summary.measurements {
                let verdict = match m.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "info",
                };
                println!("{verdict:4}  {:<48} {:.6e}", m.name, m.value);
            }
            println!("{}: {}", summary.experiment, summary.status);
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => fail(Some(std::path::Path::new(&cfg.output.dir)), &e),
    }
}

fn fail(dir: Option<&std::path::Path>, e: &HarnessError) -> ExitCode {
    eprintln!("{}", e.record());
    if let Some(d) = dir {
        if let Err(w) = write_error(d, e) {
            eprintln!("could not write the error record: {w}");
        }
    }
    ExitCode::from(2)
}
