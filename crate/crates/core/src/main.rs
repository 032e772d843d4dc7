use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use perfpred::cli::{self, CliError};
use perfpred::config::RunConfig;
use perfpred::datastore::ScoreScale;
use perfpred::features::ImputationPolicy;

#[derive(Parser)]
#[command(
    name = "perfpred",
    version,
    about = "Predict per-language performance of multilingual models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and check every input without fitting anything
    Validate(Common),
    /// Write the assembled feature vectors to features.csv
    Featurize(Common),
    /// Fit the first configured model on all records and save it
    Train(Common),
    /// Leave-one-language-out evaluation of every configured model
    Lolo(Common),
    /// Predict scores for the configured pivots and targets
    Predict(Common),
    /// Score every (pivot, target) pair and pick the best pivot per target
    Pivot(Common),
    /// Coverage statistics for a benchmark registry
    Audit(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads for folds and grid cells
    #[arg(short, long)]
    jobs: Option<usize>,
    /// Also drop training records that pivot through the held-out language
    #[arg(long)]
    strict_lolo: bool,
    #[arg(long, value_parser = parse_imputation)]
    imputation: Option<ImputationPolicy>,
    #[arg(long, value_parser = parse_scale)]
    score_scale: Option<ScoreScale>,
}

fn parse_imputation(s: &str) -> Result<ImputationPolicy, String> {
    match s {
        "strict" => Ok(ImputationPolicy::Strict),
        "mean" => Ok(ImputationPolicy::Mean),
        "zero" => Ok(ImputationPolicy::Zero),
        _ => Err(format!("expected strict, mean or zero, got `{s}`")),
    }
}

fn parse_scale(s: &str) -> Result<ScoreScale, String> {
    match s {
        "auto" => Ok(ScoreScale::Auto),
        "percent" => Ok(ScoreScale::Percent),
        "fraction" => Ok(ScoreScale::Fraction),
        _ => Err(format!("expected auto, percent or fraction, got `{s}`")),
    }
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => {
                let mut cfg = RunConfig::default();
                cfg.resolve_paths(&std::env::current_dir().unwrap_or_default());
                cfg
            }
        };
        if let Some(out) = &self.out {
            cfg.output_dir = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if self.strict_lolo {
            cfg.strict_lolo = true;
        }
        if let Some(i) = self.imputation {
            cfg.features.imputation = i;
        }
        if let Some(s) = self.score_scale {
            cfg.score_scale = s;
        }
        Ok(cfg)
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate(c) => {
            let s = cli::cmd_validate(&c.resolve()?)?;
            println!(
                "ok: {} records, {} targets, {} profiles, {} warning(s)",
                s.records,
                s.targets,
                s.profiles,
                s.warnings.len()
            );
        }
        Command::Featurize(c) => {
            let p = cli::cmd_featurize(&c.resolve()?)?;
            println!("{}", p.display());
        }
        Command::Train(c) => {
            let p = cli::cmd_train(&c.resolve()?)?;
            println!("{}", p.display());
        }
        Command::Lolo(c) => {
            let table = cli::cmd_lolo(&c.resolve()?)?;
            print!("{}", table.render());
        }
        Command::Predict(c) => {
            for r in cli::cmd_predict(&c.resolve()?)? {
                println!("{} -> {}: {:.4}", r.pivots, r.target, r.predicted);
            }
        }
        Command::Pivot(c) => {
            let grid = cli::cmd_pivot(&c.resolve()?)?;
            for s in &grid.selections {
                println!("{}: {} ({:.4})", s.target, s.best_pivot, s.predicted);
            }
        }
        Command::Audit(c) => {
            let r = cli::cmd_audit(&c.resolve()?)?;
            println!(
                "{} tasks, median {} languages, max {}, {} with >= 50 languages",
                r.n_tasks,
                r.median_languages,
                r.max_languages,
                r.rcdf(50)
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Cli::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
