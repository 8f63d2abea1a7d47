use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semicocycle::{build_default, ModelName};
use semicocycle_cli::verify::check_names;
use semicocycle_cli::{run_experiment, verify_suite, ExperimentConfig, HarnessError, VerifyOptions};

#[derive(Parser)]
#[command(
    name = "semicocycle",
    version,
    about = "Semicocycle experiments and invariant checks"
)]
struct Cli {
    /// Output directory (overrides the config's `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for sampled experiments (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config.
    Run { config: PathBuf },
    /// Run the invariant suite.
    Verify {
        /// Only checks whose `module.invariant` name contains this string.
        #[arg(long)]
        filter: Option<String>,
        /// Add the non-cocycle Γ_t = 1 + t to the chain-rule check.
        #[arg(long)]
        inject_broken: bool,
    },
    /// List registered models and check names.
    ListModels,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let code = match cli.command {
        Command::Run { config } => run(&config, cli.out, cli.seed),
        Command::Verify { filter, inject_broken } => {
            let report = verify_suite(&VerifyOptions {
                filter,
                inject_broken,
                seed: cli.seed,
            });
            for line in &report.lines {
                println!("{}", line.render());
            }
            let failed = report.lines.iter().filter(|l| !l.passed).count();
            println!("{} checks, {} failed", report.lines.len(), failed);
            match cli.out.map(|dir| report.write(&dir)).transpose() {
                Ok(_) => report.exit_code(),
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Command::ListModels => {
            for name in ModelName::ALL {
                let b = build_default(name);
                println!(
                    "{name}: n={} params={:?} T-continuous={} UJC={} differentiable={} generator={}",
                    b.truth.n,
                    name.param_keys(),
                    b.truth.is_t_continuous,
                    b.truth.is_ujc,
                    b.truth.is_differentiable,
                    b.cocycle.has_generator()
                );
            }
            println!("checks: {}", check_names().join(", "));
            0
        }
    };
    ExitCode::from(code as u8)
}

fn run(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> i32 {
    let result = ExperimentConfig::load(path).and_then(|mut config| {
        if seed.is_some() {
            config.seed = seed;
        }
        let dir = out
            .or_else(|| config.output.clone())
            .ok_or_else(|| HarnessError::BadConfig("no output directory (config `output` or --out)".into()))?;
        run_experiment(&config, &dir)
    });
    match result {
        Ok(outcome) => {
            for inv in outcome.summary["invariants"].as_array().into_iter().flatten() {
                println!(
                    "{} {} measured={} threshold={}",
                    if inv["passed"].as_bool() == Some(true) {
                        "PASS"
                    } else {
                        "FAIL"
                    },
                    inv["name"].as_str().unwrap_or_default(),
                    inv["measured"],
                    inv["threshold"]
                );
            }
            if let Some(e) = outcome.summary["error"].as_str() {
                eprintln!("error: {e}");
            }
            println!("wrote {}", outcome.out_dir.display());
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
