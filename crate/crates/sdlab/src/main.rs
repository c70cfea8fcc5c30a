use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sdlab::{acceptance, ExperimentConfig, RunRecord, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NON_CONVERGENCE};

#[derive(Parser)]
#[command(name = "sdlab", version, about = "Singular-drift elliptic experiments on the unit disk")]
struct Cli {
    /// Override the solver tolerance of every config.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Override the output directory of every config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config, or every config in `--suite-dir`.
    Run {
        #[arg(required_unless_present = "suite_dir")]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        suite_dir: Option<PathBuf>,
    },
    /// Run every `.json` config in a directory.
    Suite { dir: PathBuf },
    /// Run the acceptance checks.
    Verify,
}

fn report(records: &[RunRecord]) -> u8 {
    let mut code = 0;
    for r in records {
        let path = r.artifacts.first().map(|p| p.display().to_string()).unwrap_or_default();
        println!(
            "{} ({}): {} ms, {}converged, table {path}",
            r.config.name,
            r.config.suite.name(),
            r.wall_clock_ms,
            if r.converged { "" } else { "NOT " }
        );
        for (k, v) in &r.summary {
            println!("  {k} = {v:e}");
        }
        if !r.converged {
            code = EXIT_NON_CONVERGENCE as u8;
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("sdlab: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let adjust = |c: &mut ExperimentConfig| {
        if let Some(t) = cli.tol {
            c.tol = t;
        }
        if let Some(o) = &cli.out {
            c.output_dir = o.clone();
        }
    };
    let result = match &cli.command {
        Command::Run { suite_dir: Some(dir), .. } => sdlab::run_suite_dir(dir, adjust),
        Command::Run { config, .. } => {
            let config = config.as_deref().expect("clap requires a config");
            ExperimentConfig::load(config).and_then(|mut c| {
                adjust(&mut c);
                sdlab::run(&c).map(|r| vec![r])
            })
        }
        Command::Suite { dir } => sdlab::run_suite_dir(dir, adjust),
        Command::Verify => {
            let start = Instant::now();
            let results = acceptance::run_all();
            let mut ok = true;
            for r in &results {
                println!("{}", r.line());
                ok &= r.passed;
            }
            let secs = start.elapsed().as_secs_f64();
            let in_budget = secs <= acceptance::VERIFY_BUDGET_S;
            println!(
                "[{}] criterion 10: verify end-to-end: {} of {} passed in {secs:.1} s (budget {} s)",
                if ok && in_budget { "PASS" } else { "FAIL" },
                results.iter().filter(|r| r.passed).count(),
                results.len(),
                acceptance::VERIFY_BUDGET_S
            );
            return if ok && in_budget { ExitCode::SUCCESS } else { ExitCode::from(EXIT_ACCEPTANCE as u8) };
        }
    };
    match result {
        Ok(records) => ExitCode::from(report(&records)),
        Err(e) => {
            eprintln!("sdlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
