use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regretforge::harness::{
    self, build_best_table, gradcheck_suite, oracle_sweep, parse_eta_grid, run_eval, solve_one, ExperimentConfig,
    HarnessError, ResultRow, Tables, Tier,
};
use regretforge::npcfr::{train, Checkpoint, GameDistribution};
use regretforge::rng::{self, Stream};
use serde_json::json;

#[derive(Parser)]
#[command(name = "regretforge", version, about = "Regret minimization experiments on extensive-form games")]
struct Cli {
    /// Experiment config (JSON). Defaults to biased_shapley(0, 0.5).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Compute budget preset.
    #[arg(long, global = true)]
    tier: Option<Tier>,
    /// Master seed; replaces the config's seed list and training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Predictor checkpoint to write (train) or read (solve, eval).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solve per configured algorithm and write its trajectory.
    Solve {
        /// Game parameter; sampled from the distribution when omitted.
        #[arg(long)]
        param: Option<f64>,
    },
    /// Meta-train a predictor and write the checkpoint and loss log.
    Train,
    /// Evaluate all algorithms on fresh games and build the tables.
    Eval,
    /// Rebuild tables.json from an existing results.csv.
    Table {
        /// Defaults to `<out>/results.csv`.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Central-difference checks of the autodiff primitives and the unroll.
    Gradcheck,
    /// Verify the biased-Shapley closed forms over a parameter grid.
    Oracle {
        #[arg(long, default_value = "0:0.5:0.01")]
        eta_grid: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(GameDistribution::biased_shapley(0.0, 0.5)),
    };
    if let Some(t) = cli.tier {
        cfg.tier = Some(t);
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
        let mut t = cfg.train_config();
        t.seed = s;
        cfg.train = Some(t);
    }
    if let Some(c) = &cli.checkpoint {
        cfg.checkpoint = Some(c.clone());
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    Ok(dir)
}

/// One JSON record per line; a closed pipe just drops the rest.
fn print(value: serde_json::Value) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{value}");
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match &cli.command {
        Command::Oracle { eta_grid } => {
            let rows = oracle_sweep(&parse_eta_grid(eta_grid)?)?;
            let failed = rows.iter().filter(|r| !r.passed()).count();
            let worst = rows.iter().map(|r| r.nash_gap).fold(0.0, f64::max);
            for r in &rows {
                print(json!(r));
            }
            print(json!({ "points": rows.len(), "failed": failed, "max_nash_gap": worst }));
            Ok(exit_for(failed == 0))
        }
        Command::Gradcheck => {
            let checks = gradcheck_suite(cli.seed.unwrap_or(0))?;
            let failed = checks.iter().filter(|c| !c.passed()).count();
            for c in &checks {
                print(json!({ "check": c, "passed": c.passed() }));
            }
            print(json!({ "checks": checks.len(), "failed": failed }));
            Ok(exit_for(failed == 0))
        }
        Command::Solve { param } => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cfg)?;
            let seed = cfg.seeds[0];
            let param = param
                .or(cfg.game_param)
                .or_else(|| cfg.distribution.sample_param(&mut rng::stream(seed, Stream::Evaluation)));
            let predictor = match &cfg.checkpoint {
                Some(p) if cfg.algorithms.iter().any(|a| a.is_neural()) => Some(harness::load_predictor(p)?),
                _ => None,
            };
            let mut rows: Vec<ResultRow> = Vec::new();
            for &a in &cfg.algorithms {
                let mut traj = solve_one(&cfg.distribution, param, a, cfg.steps(), predictor.clone())?;
                traj.iter_mut().for_each(|r| r.seed = seed);
                if let Some(last) = traj.last() {
                    print(json!({ "algorithm": a, "game_param": param, "steps": last.step, "nash_gap": last.nash_gap,
                        "cce_gap": last.cce_gap, "efm": last.efm, "seconds": last.wall_time }));
                }
                rows.extend(traj);
            }
            harness::write_results(&dir.join("results.csv"), &rows)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Train => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cfg)?;
            let tcfg = cfg.train_config();
            let every = (tcfg.epochs / 16).max(1);
            let outcome = train(&cfg.distribution, &tcfg, |r| {
                if r.epoch == 1 || r.epoch % every == 0 || r.epoch == tcfg.epochs {
                    eprintln!("epoch {:>6}  loss {:.6}", r.epoch, r.loss);
                }
            })?;
            harness::write_train_log(&dir.join("train_log.csv"), &outcome.log)?;
            let path = cfg.checkpoint.clone().unwrap_or_else(|| dir.join("predictor.rfck"));
            let ckpt = Checkpoint {
                params: outcome.params,
                training: Some(json!({ "distribution": cfg.distribution, "train": tcfg })),
            };
            ckpt.save(&path)?;
            let first = outcome.log.first().map(|r| r.loss);
            let last = outcome.log.last().map(|r| r.loss);
            print(json!({ "checkpoint": path, "epochs": tcfg.epochs, "first_loss": first, "final_loss": last }));
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cfg)?;
            let out = run_eval(&cfg, None)?;
            harness::write_results(&dir.join("results.csv"), &out.rows)?;
            harness::write_timings(&dir.join("timings.csv"), &out.timings)?;
            let tables = Tables::build(&out.rows, &cfg.thresholds);
            harness::write_tables(&dir.join("tables.json"), &tables)?;
            print(json!(tables));
            Ok(ExitCode::SUCCESS)
        }
        Command::Table { results } => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cfg)?;
            let path = results.clone().unwrap_or_else(|| dir.join("results.csv"));
            let rows = read_results(&path)?;
            let tables = Tables {
                threshold: harness::build_threshold_table(&rows, &cfg.thresholds),
                best: build_best_table(&rows),
            };
            harness::write_tables(&dir.join("tables.json"), &tables)?;
            print(json!(tables));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_results(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    harness::parse_results(&text).map_err(|e| HarnessError::io(path, e))
}

fn exit_for(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
