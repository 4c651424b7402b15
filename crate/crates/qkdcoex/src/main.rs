//! Command-line front end: dataset generation, model training, model
//! comparison, the staged reallocation scenario, and log replay.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qkdcoex::config::AppConfig;
use qkdcoex::controller::{replayed_actions, run_scenario, ScenarioScript, DEFAULT_SCENARIO};
use qkdcoex::dataset::{generate_campaign, load as load_dataset, save as save_dataset};
use qkdcoex::ml::{compare_models, load_models, save_models, ModelSpec, PredictorSet};
use qkdcoex::wire::{replay, RecordLog};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "qkdcoex", version, about = "QKD/classical coexistence sandbox")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Configuration file; defaults apply for anything omitted
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the labelled training/validation campaign
    GenData {
        #[command(flatten)]
        config: ConfigArg,
        /// Campaign RNG seed
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the per-target predictors on a generated dataset
    Train {
        /// Dataset directory produced by gen-data
        #[arg(long)]
        data: PathBuf,
        /// Model: rf, ls, kn, lasso, or ridge
        #[arg(long, default_value = "rf")]
        model: String,
        /// Neighbour count for kn
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Regularization strength for lasso/ridge
        #[arg(long)]
        lambda: Option<f64>,
        /// Bootstrap seed for rf
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output model file (JSON)
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare all five models against the mean baseline on validation sets
    Eval {
        /// Dataset directory produced by gen-data
        #[arg(long)]
        data: PathBuf,
        /// Bootstrap seed for the forest entry
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Optional CSV output path
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the staged reallocation scenario with trained predictors
    Scenario {
        #[command(flatten)]
        config: ConfigArg,
        /// Model file from train
        #[arg(long)]
        models: PathBuf,
        /// Scenario script; built-in default if omitted
        #[arg(long)]
        script: Option<PathBuf>,
        /// Record log to append to
        #[arg(long)]
        log: Option<PathBuf>,
        /// Optional CSV output path for the per-stage report
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replay a record log and summarize the recorded decisions
    Report {
        /// Record log written by scenario
        #[arg(long)]
        log: PathBuf,
    },
}

fn load_config(arg: &ConfigArg) -> Result<AppConfig, (u8, String)> {
    let cfg = match &arg.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| (EXIT_DATA, format!("{}: {e}", path.display())))?;
            AppConfig::parse(&text).map_err(|e| (EXIT_DATA, format!("{}: {e}", path.display())))?
        }
        None => AppConfig::default(),
    };
    cfg.validate().map_err(|e| (EXIT_DATA, e.to_string()))?;
    Ok(cfg)
}

/// Removes files this invocation created before it failed.
struct OutputTracker {
    created: Vec<PathBuf>,
}

impl OutputTracker {
    fn new() -> Self {
        Self { created: Vec::new() }
    }

    fn track(&mut self, path: &Path) {
        self.created.push(path.to_path_buf());
    }

    fn discard_outputs(&self) {
        for path in &self.created {
            if path.is_dir() {
                let _ = fs::remove_dir_all(path);
            } else {
                let _ = fs::remove_file(path);
            }
        }
    }
}

fn write_file(tracker: &mut OutputTracker, path: &Path, content: &str) -> Result<(), (u8, String)> {
    tracker.track(path);
    fs::write(path, content).map_err(|e| (EXIT_DATA, format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    let mut tracker = OutputTracker::new();
    let result = dispatch(cli, &mut tracker);
    if result.is_err() {
        tracker.discard_outputs();
    }
    result
}

fn dispatch(cli: Cli, tracker: &mut OutputTracker) -> Result<(), (u8, String)> {
    match cli.command {
        Command::GenData { config, seed, out } => {
            let cfg = load_config(&config)?;
            let bundle =
                generate_campaign(&cfg, seed).map_err(|e| (EXIT_DATA, e.to_string()))?;
            if !out.exists() {
                tracker.track(&out);
                fs::create_dir_all(&out)
                    .map_err(|e| (EXIT_DATA, format!("{}: {e}", out.display())))?;
            }
            save_dataset(&bundle, &out).map_err(|e| (EXIT_DATA, e.to_string()))?;
            write_file(tracker, &out.join("config_echo.conf"), &cfg.echo())?;
            println!(
                "wrote {} training + {} validation instances across {} sets to {}",
                bundle.training.iter().map(Vec::len).sum::<usize>(),
                bundle.validation.iter().map(Vec::len).sum::<usize>(),
                bundle.set_count(),
                out.display()
            );
            Ok(())
        }
        Command::Train {
            data,
            model,
            k,
            lambda,
            seed,
            out,
        } => {
            let spec = match model.as_str() {
                "rf" => ModelSpec::random_forest(seed),
                "ls" => ModelSpec::least_squares(),
                "kn" => ModelSpec::k_neighbors(k),
                "lasso" => ModelSpec::lasso(lambda.unwrap_or(0.01)),
                "ridge" => ModelSpec::ridge(lambda.unwrap_or(1.0)),
                other => {
                    return Err((
                        EXIT_USAGE,
                        format!("unknown model `{other}` (expected rf, ls, kn, lasso, ridge)"),
                    ))
                }
            };
            let bundle = load_dataset(&data).map_err(|e| (EXIT_DATA, e.to_string()))?;
            let training: Vec<_> = bundle.training.iter().flatten().cloned().collect();
            let models = PredictorSet::fit(&spec, &training)
                .map_err(|e| (EXIT_INTERNAL, e.to_string()))?;
            tracker.track(&out);
            save_models(&models, &out).map_err(|e| (EXIT_DATA, e.to_string()))?;
            println!(
                "fitted {} on {} instances; models written to {}",
                spec.kind.label(),
                training.len(),
                out.display()
            );
            Ok(())
        }
        Command::Eval { data, seed, csv } => {
            let bundle = load_dataset(&data).map_err(|e| (EXIT_DATA, e.to_string()))?;
            let table = compare_models(&bundle, &ModelSpec::suite(seed))
                .map_err(|e| (EXIT_INTERNAL, e.to_string()))?;
            print!("{}", table.render_text());
            if let Some(path) = csv {
                write_file(tracker, &path, &table.to_csv())?;
            }
            Ok(())
        }
        Command::Scenario {
            config,
            models,
            script,
            log,
            csv,
        } => {
            let cfg = load_config(&config)?;
            let models = load_models(&models).map_err(|e| (EXIT_DATA, e.to_string()))?;
            let script_text = match &script {
                Some(path) => fs::read_to_string(path)
                    .map_err(|e| (EXIT_DATA, format!("{}: {e}", path.display())))?,
                None => DEFAULT_SCENARIO.to_string(),
            };
            let script =
                ScenarioScript::parse(&script_text).map_err(|e| (EXIT_DATA, e.to_string()))?;
            let mut record_log = match &log {
                Some(path) => {
                    Some(RecordLog::open(path).map_err(|e| (EXIT_DATA, e.to_string()))?)
                }
                None => None,
            };
            let report = run_scenario(&script, &models, &cfg, record_log.as_mut())
                .map_err(|e| (EXIT_INTERNAL, e.to_string()))?;
            print!("{}", report.render_text());
            if report.stages.iter().any(|s| s.expect_mismatch) {
                return Err((
                    EXIT_INTERNAL,
                    "scenario produced actions that contradict the script's expectations".into(),
                ));
            }
            if let Some(path) = csv {
                write_file(tracker, &path, &report.to_csv())?;
            }
            Ok(())
        }
        Command::Report { log } => {
            let replayed = replay(&log).map_err(|e| (EXIT_DATA, e.to_string()))?;
            let actions =
                replayed_actions(&replayed.records).map_err(|e| (EXIT_DATA, e.to_string()))?;
            println!("{} records replayed", replayed.records.len());
            for action in &actions {
                println!(
                    "action: {}{}",
                    action.kind.label(),
                    if action.degraded { " (degraded)" } else { "" }
                );
            }
            if let Some(tail) = &replayed.truncated_tail {
                eprintln!("warning: discarded damaged trailing line: {tail:?}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep clap's rendering but normalize the exit code; --help and
            // --version are successes
            let code = if e.exit_code() == 0 { 0 } else { EXIT_USAGE };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
