use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use delaylab::harness::{
    fit_scaling, read_points, run_criterion, run_experiment, run_grid, ExperimentConfig, FitModel,
    GridSpec,
};
use delaylab::Error;

#[derive(Parser)]
#[command(name = "delaylab", version, about = "Multi-batched learners under delayed feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of one experiment; writes per-seed CSVs and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a base config over a grid of horizons and/or mean delays.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
    },
    /// Run the acceptance suite.
    Verify {
        /// Only these criteria (1-10); all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// Fit a scaling law to two CSV columns.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_model)]
        model: FitModel,
        #[arg(long, default_value = "episode")]
        x: String,
        #[arg(long, default_value = "cum_regret")]
        y: String,
    },
}

fn parse_model(s: &str) -> Result<FitModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

fn report(path: &Path, e: &Error) -> ExitCode {
    match e {
        Error::Config { line, message } => {
            eprintln!("error: {}:{line}: {message}", path.display());
            ExitCode::from(EXIT_CONFIG)
        }
        Error::Io(io) => {
            eprintln!("error: {}: {io}", path.display());
            ExitCode::from(EXIT_CONFIG)
        }
        other => {
            eprintln!("error: {other}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return report(&config, &e),
            };
            match run_experiment(&cfg) {
                Ok(summary) => {
                    for s in &summary.seeds {
                        match (&s.final_regret, &s.error) {
                            (Some(r), _) => println!("seed {}: regret {r:.4}", s.seed),
                            (None, Some(e)) => println!("seed {}: FAILED {e}", s.seed),
                            (None, None) => println!("seed {}: FAILED", s.seed),
                        }
                    }
                    if let (Some(m), Some(se)) = (summary.mean_final_regret, summary.stderr_final_regret) {
                        println!("mean final regret {m:.4} ± {se:.4}");
                    }
                    println!("output in {}", cfg.output_dir.display());
                    if summary.all_ok() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILURE)
                    }
                }
                Err(e) => report(&config, &e),
            }
        }
        Command::Sweep { config, grid } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return report(&config, &e),
            };
            let spec = match GridSpec::load(&grid) {
                Ok(g) => g,
                Err(e) => return report(&grid, &e),
            };
            match run_grid(&cfg, &spec) {
                Ok(res) => {
                    for c in &res.cells {
                        let delay = c.delay_mean.map_or("base".to_string(), |m| m.to_string());
                        println!(
                            "K={} delay={delay}: regret {:.4} ± {:.4}{}",
                            c.episodes,
                            c.mean_regret,
                            c.stderr_regret,
                            if c.failed_seeds > 0 {
                                format!(" ({} seeds FAILED)", c.failed_seeds)
                            } else {
                                String::new()
                            }
                        );
                    }
                    for (m, f) in &res.regret_fits {
                        println!("delay={m:?}: regret ~ K^{:.3} (R2 {:.3})", f.coefficient, f.r2);
                    }
                    for (k, f) in &res.penalty_fits {
                        println!("K={k}: regret slope {:.4} per unit delay (R2 {:.3})", f.coefficient, f.r2);
                    }
                    if res.cells.iter().any(|c| c.failed_seeds > 0) {
                        ExitCode::from(EXIT_FAILURE)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => report(&config, &e),
            }
        }
        Command::Verify { only } => {
            let ids: Vec<usize> = if only.is_empty() { (1..=10).collect() } else { only };
            if let Some(bad) = ids.iter().find(|&&i| !(1..=10).contains(&i)) {
                eprintln!("error: no criterion {bad}");
                return ExitCode::from(EXIT_CONFIG);
            }
            let mut all = true;
            for id in ids {
                let r = run_criterion(id);
                println!("{r}");
                all &= r.passed;
            }
            if all {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ACCEPTANCE)
            }
        }
        Command::Fit { input, model, x, y } => {
            let fit = read_points(&input, &x, &y).and_then(|p| fit_scaling(&p, model));
            match fit {
                Ok(f) => {
                    let what = match model {
                        FitModel::Power => "exponent",
                        FitModel::Affine => "slope",
                    };
                    println!("{what} {:.6} intercept {:.6} R2 {:.6} n {}", f.coefficient, f.intercept, f.r2, f.n);
                    ExitCode::SUCCESS
                }
                Err(e) => report(&input, &e),
            }
        }
    }
}
