//! Command-line front end: `train`, `hypervolume` and `front`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::agent::TargetMode;
use crate::config::{parse_config, ConfigError, ExecutionMode, RunConfig};
use crate::csvio;
use crate::envs::{EnvConfig, EncodingMode};
use crate::error::{io_err, Error, Result};
use crate::metrics::{hv_history, hypervolume, nondominated_filter, Front};
use crate::oracle::enumerate_dst_front;
use crate::scalarize::ScalarizationSpec;
use crate::trainer::{
    merge_sequential, run_parallel_with, run_trial_with_progress, MergedFronts, TrainLog,
    TrialFailure,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TRIAL_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "modrl", version, about = "Multi-objective deep Q-learning benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a TOML config and write its artifacts.
    Train {
        config: PathBuf,
        /// Overrides `execution.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the exact hypervolume of a front CSV.
    Hypervolume {
        #[arg(long)]
        front: PathBuf,
        /// Comma-separated reference point, e.g. `0,-25`.
        #[arg(long = "ref", allow_hyphen_values = true, value_delimiter = ',', required = true)]
        reference: Vec<f64>,
    },
    /// Print or write the true Pareto front of a benchmark.
    Front {
        #[arg(long, default_value = "dst")]
        env: String,
        #[arg(long, default_value_t = 3)]
        width: usize,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_CONFIG_ERROR;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match cli.command {
        Command::Train { config, out } => match cmd_train(&config, out.as_deref(), stdout, stderr) {
            Ok(summary) if summary.failures.is_empty() => EXIT_OK,
            Ok(summary) => {
                for f in &summary.failures {
                    let _ = writeln!(stderr, "trial {} failed: {}", f.index, f.message);
                }
                EXIT_TRIAL_FAILURE
            }
            Err(e @ Error::Config(_)) | Err(e @ Error::InvalidArgument(_)) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_CONFIG_ERROR
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_TRIAL_FAILURE
            }
        },
        Command::Hypervolume { front, reference } => match cmd_hypervolume(&front, &reference) {
            Ok(hv) => {
                let _ = writeln!(stdout, "{hv}");
                EXIT_OK
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_CONFIG_ERROR
            }
        },
        Command::Front { env, width, out } => match cmd_front(&env, width, out.as_deref(), stdout) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_CONFIG_ERROR
            }
        },
    }
}

pub fn cmd_hypervolume(front_csv: &Path, reference: &[f64]) -> Result<f64> {
    let front = csvio::read_front(front_csv)?;
    hypervolume(&front, reference)
}

pub fn cmd_front(env: &str, width: usize, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    if env != "dst" {
        return Err(Error::Unsupported(format!("true fronts are only known for dst, not {env:?}")));
    }
    let front = enumerate_dst_front(&EnvConfig::dst(width).grid_spec()?);
    match out {
        Some(path) => csvio::write_front(path, &front, 2),
        None => {
            let mut text = String::from("r_1,r_2\n");
            for p in &front {
                text.push_str(&format!("{},{}\n", p[0], p[1]));
            }
            stdout.write_all(text.as_bytes()).map_err(io_err("<stdout>"))
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub output_dir: PathBuf,
    pub logs: Vec<(usize, TrainLog)>,
    pub failures: Vec<TrialFailure>,
    pub merged: MergedFronts,
    pub hypervolume: Vec<(usize, f64)>,
}

pub fn cmd_train(
    config_path: &Path,
    out_override: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<TrainSummary> {
    let cfg = parse_config(config_path)?;
    let config_text = std::fs::read_to_string(config_path).map_err(io_err(config_path))?;
    let out_dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let started = Instant::now();
    let trials = cfg.trials();
    for t in &trials {
        t.validate().map_err(|e| Error::Config(ConfigError::Invalid { key: "agent".into(), message: e.to_string() }))?;
    }

    let mut logs: Vec<(usize, TrainLog)> = Vec::new();
    let mut failures = Vec::new();
    let mut artifacts: Vec<PathBuf> = Vec::new();
    let write_log = |i: usize, log: &TrainLog, artifacts: &mut Vec<PathBuf>| -> Result<()> {
        let trainlog = out_dir.join(format!("trainlog_{i}.csv"));
        let trace = out_dir.join(format!("trace_{i}.csv"));
        csvio::write_trainlog(&trainlog, log)?;
        csvio::write_trace(&trace, log)?;
        artifacts.extend([trainlog, trace]);
        Ok(())
    };

    let merged = match cfg.mode {
        ExecutionMode::Single | ExecutionMode::Sequential => {
            for (i, spec) in trials.iter().enumerate() {
                let mut report = |rec: &crate::trainer::EvalRecord| {
                    let _ = writeln!(stderr, "trial {i} step {} return {:?}", rec.step, rec.ret);
                };
                match run_trial_with_progress(spec, &mut report) {
                    Ok(log) => {
                        write_log(i, &log, &mut artifacts)?;
                        logs.push((i, log));
                    }
                    Err(e) => {
                        failures.push(TrialFailure { index: i, message: e.to_string() });
                        break;
                    }
                }
            }
            let done: Vec<TrainLog> = logs.iter().map(|(_, l)| l.clone()).collect();
            merge_sequential(&done)?
        }
        ExecutionMode::Parallel => {
            let reference = cfg.reference_point.clone();
            let mut on_snapshot = |s: &crate::trainer::Snapshot| {
                if let Ok(hv) = hypervolume(&s.front, &reference) {
                    let _ = writeln!(stderr, "step {} merged hypervolume {hv}", s.step);
                }
            };
            let run = run_parallel_with(&trials, cfg.workers, &run_trial_with_progress, &mut on_snapshot)?;
            for (i, outcome) in run.outcomes.into_iter().enumerate() {
                match outcome {
                    Ok(log) => {
                        write_log(i, &log, &mut artifacts)?;
                        logs.push((i, log));
                    }
                    Err(f) => failures.push(f),
                }
            }
            run.merged
        }
    };

    let n_obj = cfg.env.n_objectives();
    let history = hv_history(&merged, &cfg.reference_point)?;
    let final_front: Front = merged.last().map(|(_, f)| f.clone()).unwrap_or_default();
    let paths = [
        out_dir.join("merged_front.csv"),
        out_dir.join("front.csv"),
        out_dir.join("hypervolume.csv"),
    ];
    csvio::write_merged_fronts(&paths[0], &merged, n_obj)?;
    csvio::write_front(&paths[1], &final_front, n_obj)?;
    csvio::write_hypervolume(&paths[2], &history)?;
    artifacts.extend(paths);

    let manifest = manifest_json(&cfg, &config_text, &logs, &failures, &final_front, &history, &artifacts, started)?;
    let manifest_path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;

    let final_hv = history.last().map_or(0.0, |(_, hv)| *hv);
    let _ = writeln!(stdout, "final front: {final_front:?}");
    let _ = writeln!(stdout, "final hypervolume: {final_hv}");
    let _ = writeln!(stdout, "artifacts: {}", out_dir.display());
    Ok(TrainSummary { output_dir: out_dir, logs, failures, merged, hypervolume: history })
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn scalarization_json(s: &ScalarizationSpec) -> Value {
    match s {
        ScalarizationSpec::Linear { weights } => json!({ "kind": "linear", "weights": weights }),
        ScalarizationSpec::Tlo { thresholds, weights } => {
            json!({ "kind": "tlo", "thresholds": thresholds, "weights": weights })
        }
    }
}

fn env_json(env: &EnvConfig) -> Value {
    let enc = |e: &crate::envs::StateEncoding| match e.mode {
        EncodingMode::OneHot => json!("one_hot"),
        EncodingMode::Vector => json!("vector"),
        EncodingMode::Image => {
            let d = e.image.unwrap_or_default();
            json!({ "image": [d.height, d.width] })
        }
    };
    match env {
        EnvConfig::Dst { width, max_frames, encoding } => {
            json!({ "env": "dst", "width": width, "max_frames": max_frames, "encoding": enc(encoding) })
        }
        EnvConfig::MountainCar { max_decisions, encoding } => {
            json!({ "env": "mountain_car", "max_decisions": max_decisions, "encoding": enc(encoding) })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn manifest_json(
    cfg: &RunConfig,
    config_text: &str,
    logs: &[(usize, TrainLog)],
    failures: &[TrialFailure],
    final_front: &Front,
    history: &[(usize, f64)],
    artifacts: &[PathBuf],
    started: Instant,
) -> Result<Value> {
    let a = &cfg.agent;
    let agent = json!({
        "gamma": a.gamma,
        "learning_rate": a.learning_rate,
        "rms_decay": a.rms_decay,
        "rms_epsilon": a.rms_epsilon,
        "epsilon_initial": a.epsilon_initial,
        "epsilon_final": a.epsilon_final,
        "epsilon_anneal_steps": a.epsilon_anneal_steps,
        "target_sync_period": a.target_sync_period,
        "warmup_steps": a.warmup_steps,
        "batch_size": a.batch_size,
        "replay_capacity": a.replay_capacity,
        "training_steps": a.training_steps,
        "action_repeat": a.action_repeat,
        "target_mode": match a.target_mode {
            TargetMode::ScalarizedGreedy => "scalarized_greedy",
            TargetMode::PerObjectiveMax => "per_objective_max",
        },
        "hidden": a.hidden,
    });
    let trials: Vec<Value> = cfg
        .trials()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let log = logs.iter().find(|(j, _)| *j == i).map(|(_, l)| l);
            let archive = log.map(|l| l.archive_at(usize::MAX)).transpose()?;
            Ok(json!({
                "index": i,
                "seed": t.seed,
                "scalarization": scalarization_json(&t.agent.scalarization),
                "status": if log.is_some() { "ok" } else { "failed" },
                "final_front": archive,
                "frames": log.map(|l| json!({ "training": l.frames.training, "evaluation": l.frames.evaluation })),
            }))
        })
        .collect::<Result<_>>()?;
    let mut checksums = serde_json::Map::new();
    for p in artifacts {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        checksums.insert(name, json!(sha256_file(p)?));
    }
    Ok(json!({
        "tool": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "config_text": config_text,
        "config": {
            "environment": env_json(&cfg.env),
            "agent": agent,
            "scalarizations": cfg.scalarizations.iter().map(scalarization_json).collect::<Vec<_>>(),
            "execution": {
                "mode": cfg.mode.as_str(),
                "seed": cfg.seed,
                "eval_period": cfg.eval_period,
                "workers": cfg.workers,
            },
            "metrics": { "reference_point": cfg.reference_point },
        },
        "seeds": cfg.trials().iter().map(|t| t.seed).collect::<Vec<_>>(),
        "trials": trials,
        "failures": failures.iter().map(|f| json!({ "index": f.index, "message": f.message })).collect::<Vec<_>>(),
        "final_front": nondominated_filter(final_front)?,
        "final_hypervolume": history.last().map(|(_, hv)| *hv),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "checksums": checksums,
    }))
}
