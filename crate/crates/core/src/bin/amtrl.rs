use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amtrl::harness::{self, GenConfig, Level, NuSolveConfig, RunConfig, SweepConfig, VerifyConfig};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "amtrl", version, about = "Active multi-task representation learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Io {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and write instance.json.
    Gen(Io),
    /// Run one strategy and write run.json and run.csv.
    Run(Io),
    /// Sweep strategies x budgets x seeds and write CSV summaries.
    Sweep(Io),
    /// Solve for the relevance vector and write nu.json.
    NuSolve(Io),
    /// Run the oracle verification suite and write verify.json.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the level from the config.
        #[arg(long, value_enum)]
        level: Option<LevelArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

fn run(cli: Cli) -> amtrl::Result<i32> {
    match cli.command {
        Command::Gen(io) => {
            let config: GenConfig = harness::read_config(&io.config)?;
            let path = harness::cmd_gen(&config, &io.out)?;
            println!("{}", path.display());
        }
        Command::Run(io) => {
            let config: RunConfig = harness::read_config(&io.config)?;
            let result = harness::cmd_run(&config, &io.out)?;
            println!("{} seed {} ER {:e}", result.strategy, result.seed, result.excess_risk);
        }
        Command::Sweep(io) => {
            let config: SweepConfig = harness::read_config(&io.config)?;
            let outcome = harness::cmd_sweep(&config, &io.out)?;
            for row in &outcome.summary {
                let med = row.median_er.map_or("-".to_string(), |v| format!("{v:e}"));
                println!("{:<11} N_tot {:>8} median ER {med}", row.strategy.as_str(), row.n_tot);
            }
        }
        Command::NuSolve(io) => {
            let config: NuSolveConfig = harness::read_config(&io.config)?;
            let report = harness::cmd_nu_solve(&config, &io.out)?;
            for s in &report.solutions {
                println!("{:?}: |nu|_1 = {:e}, support {}", s.solver, s.l1_norm(), s.support_size);
            }
        }
        Command::Verify { config, out, level } => {
            let mut cfg: VerifyConfig = match config {
                Some(path) => harness::read_config(&path)?,
                None => VerifyConfig::default(),
            };
            if let Some(level) = level {
                cfg.level = match level {
                    LevelArg::Fast => Level::Fast,
                    LevelArg::Full => Level::Full,
                };
            }
            let report = harness::cmd_verify(&cfg, Some(Path::new(&out)))?;
            for p in &report.properties {
                let mark = if p.passed { "pass" } else if p.informational { "info" } else { "FAIL" };
                println!("{mark} {:<36} cases {:>4} worst {:e} tol {:e}", p.name, p.cases, p.worst, p.tolerance);
            }
            if !report.all_passed {
                eprintln!("failing: {}", report.failing().join(", "));
                return Ok(harness::EXIT_PROPERTY_FAILURE);
            }
        }
    }
    Ok(harness::EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            harness::exit_code(&err)
        }
    };
    ExitCode::from(code as u8)
}
