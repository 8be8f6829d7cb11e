//! Sectioned TOML run configuration. Unknown keys are rejected and every
//! omitted agent setting falls back to the environment's reference
//! defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::agent::{AgentConfig, TargetMode};
use crate::envs::{EnvConfig, StateEncoding};
use crate::scalarize::ScalarizationSpec;
use crate::trainer::{TrialSpec, DEFAULT_EVAL_PERIOD};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn bad(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.into() }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    environment: RawEnvironment,
    #[serde(default)]
    agent: RawAgent,
    #[serde(default)]
    scalarization: Vec<RawScalarization>,
    #[serde(default)]
    execution: RawExecution,
    #[serde(default)]
    metrics: RawMetrics,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    env: String,
    width: Option<usize>,
    encoding: Option<String>,
    max_frames: Option<usize>,
    max_decisions: Option<usize>,
    image_height: Option<usize>,
    image_width: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    gamma: Option<f64>,
    learning_rate: Option<f64>,
    rms_decay: Option<f64>,
    rms_epsilon: Option<f64>,
    epsilon_initial: Option<f64>,
    epsilon_final: Option<f64>,
    epsilon_anneal_steps: Option<usize>,
    target_sync_period: Option<usize>,
    warmup_steps: Option<usize>,
    batch_size: Option<usize>,
    replay_capacity: Option<usize>,
    training_steps: Option<usize>,
    action_repeat: Option<usize>,
    target_mode: Option<String>,
    hidden: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScalarization {
    kind: String,
    weights: Option<Vec<f64>>,
    thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExecution {
    mode: Option<String>,
    seed: Option<u64>,
    eval_period: Option<usize>,
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetrics {
    reference_point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    Single,
    Sequential,
    Parallel,
}

impl ExecutionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::Sequential => "sequential",
            Self::Parallel => "parallel",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    /// Shared agent settings; each trial substitutes its own scalarization.
    pub agent: AgentConfig,
    pub scalarizations: Vec<ScalarizationSpec>,
    pub mode: ExecutionMode,
    pub seed: u64,
    pub eval_period: usize,
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
    pub reference_point: Vec<f64>,
}

pub const DEFAULT_OUTPUT_DIR: &str = "runs";

pub fn default_reference_point(env: &EnvConfig) -> Vec<f64> {
    match env {
        EnvConfig::Dst { .. } => vec![0.0, -25.0],
        EnvConfig::MountainCar { .. } => vec![-110.0, -110.0, -110.0],
    }
}

impl RunConfig {
    /// One trial per scalarization block, seeded `seed + index`.
    pub fn trials(&self) -> Vec<TrialSpec> {
        self.scalarizations
            .iter()
            .enumerate()
            .map(|(i, s)| TrialSpec {
                env: self.env.clone(),
                agent: AgentConfig { scalarization: s.clone(), ..self.agent.clone() },
                eval_period: self.eval_period,
                seed: self.seed.wrapping_add(i as u64),
            })
            .collect()
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let env = resolve_env(&raw.environment)?;
    let n_obj = env.n_objectives();

    let scalarizations = if raw.scalarization.is_empty() {
        vec![ScalarizationSpec::linear(vec![1.0 / n_obj as f64; n_obj]).expect("uniform weights are valid")]
    } else {
        raw.scalarization
            .iter()
            .enumerate()
            .map(|(i, s)| resolve_scalarization(i, s, n_obj))
            .collect::<Result<Vec<_>, _>>()?
    };

    let mut agent = AgentConfig::defaults_for(&env, scalarizations[0].clone())
        .map_err(|e| bad("environment.width", e.to_string()))?;
    apply_agent(&mut agent, &raw.agent)?;

    let mode = match raw.execution.mode.as_deref().unwrap_or("single") {
        "single" => ExecutionMode::Single,
        "sequential" => ExecutionMode::Sequential,
        "parallel" => ExecutionMode::Parallel,
        other => return Err(bad("execution.mode", format!("expected single, sequential or parallel, got {other:?}"))),
    };
    if mode == ExecutionMode::Single && scalarizations.len() != 1 {
        return Err(bad("execution.mode", format!("single mode takes one scalarization, got {}", scalarizations.len())));
    }
    let eval_period = raw.execution.eval_period.unwrap_or(DEFAULT_EVAL_PERIOD);
    if eval_period == 0 {
        return Err(bad("execution.eval_period", "must be positive"));
    }
    if raw.execution.workers == Some(0) {
        return Err(bad("execution.workers", "must be positive"));
    }

    let reference_point = raw.metrics.reference_point.clone().unwrap_or_else(|| default_reference_point(&env));
    if reference_point.len() != n_obj {
        return Err(bad("metrics.reference_point", format!("needs {n_obj} values, got {}", reference_point.len())));
    }
    if reference_point.iter().any(|v| !v.is_finite()) {
        return Err(bad("metrics.reference_point", "values must be finite"));
    }

    Ok(RunConfig {
        env,
        agent,
        scalarizations,
        mode,
        seed: raw.execution.seed.unwrap_or(0),
        eval_period,
        output_dir: raw.execution.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        workers: raw.execution.workers,
        reference_point,
    })
}

fn resolve_env(raw: &RawEnvironment) -> Result<EnvConfig, ConfigError> {
    let encoding = |default: StateEncoding| -> Result<StateEncoding, ConfigError> {
        let Some(name) = raw.encoding.as_deref() else {
            if raw.image_height.is_some() || raw.image_width.is_some() {
                return Err(bad("environment.image_height", "image dimensions need encoding = \"image\""));
            }
            return Ok(default);
        };
        match name {
            "one_hot" => Ok(StateEncoding::one_hot()),
            "vector" => Ok(StateEncoding::vector()),
            "image" => {
                let h = raw.image_height.unwrap_or(crate::envs::encoding::DEFAULT_IMAGE_SIZE);
                let w = raw.image_width.unwrap_or(crate::envs::encoding::DEFAULT_IMAGE_SIZE);
                if h == 0 || w == 0 {
                    return Err(bad("environment.image_height", "image dimensions must be positive"));
                }
                Ok(StateEncoding::image(h, w))
            }
            other => Err(bad("environment.encoding", format!("expected one_hot, vector or image, got {other:?}"))),
        }
    };
    match raw.env.as_str() {
        "dst" => {
            if raw.max_decisions.is_some() {
                return Err(bad("environment.max_decisions", "only applies to mountain_car"));
            }
            let width = raw.width.ok_or_else(|| bad("environment.width", "required for dst"))?;
            if width != 3 && width != 5 {
                return Err(bad("environment.width", format!("expected 3 or 5, got {width}")));
            }
            let max_frames = raw.max_frames.unwrap_or(crate::envs::dst::DST_MAX_EPISODE_FRAMES);
            if max_frames == 0 {
                return Err(bad("environment.max_frames", "must be positive"));
            }
            Ok(EnvConfig::Dst { width, max_frames, encoding: encoding(StateEncoding::one_hot())? })
        }
        "mountain_car" => {
            if raw.width.is_some() {
                return Err(bad("environment.width", "only applies to dst"));
            }
            if raw.max_frames.is_some() {
                return Err(bad("environment.max_frames", "mountain_car caps decisions; use max_decisions"));
            }
            let enc = encoding(StateEncoding::vector())?;
            if enc == StateEncoding::one_hot() {
                return Err(bad("environment.encoding", "mountain_car has a continuous state; one_hot is unavailable"));
            }
            let max_decisions = raw.max_decisions.unwrap_or(crate::envs::mountain_car::MC_MAX_DECISIONS);
            if max_decisions == 0 {
                return Err(bad("environment.max_decisions", "must be positive"));
            }
            Ok(EnvConfig::MountainCar { max_decisions, encoding: enc })
        }
        other => Err(bad("environment.env", format!("expected dst or mountain_car, got {other:?}"))),
    }
}

fn resolve_scalarization(i: usize, raw: &RawScalarization, n_obj: usize) -> Result<ScalarizationSpec, ConfigError> {
    let key = |field: &str| format!("scalarization[{i}].{field}");
    let spec = match raw.kind.as_str() {
        "linear" => {
            if raw.thresholds.is_some() {
                return Err(bad(key("thresholds"), "linear scalarization takes no thresholds"));
            }
            let weights = raw.weights.clone().ok_or_else(|| bad(key("weights"), "required for linear"))?;
            ScalarizationSpec::linear(weights).map_err(|e| bad(key("weights"), e.to_string()))?
        }
        "tlo" => {
            let thresholds = raw.thresholds.clone().ok_or_else(|| bad(key("thresholds"), "required for tlo"))?;
            match raw.weights.clone() {
                Some(w) => ScalarizationSpec::tlo(thresholds, w),
                None => ScalarizationSpec::tlo_uniform(thresholds),
            }
            .map_err(|e| bad(key("thresholds"), e.to_string()))?
        }
        other => return Err(bad(key("kind"), format!("expected linear or tlo, got {other:?}"))),
    };
    if spec.n_objectives() != n_obj {
        return Err(bad(key("weights"), format!("environment has {n_obj} objectives, scalarization covers {}", spec.n_objectives())));
    }
    Ok(spec)
}

fn apply_agent(agent: &mut AgentConfig, raw: &RawAgent) -> Result<(), ConfigError> {
    fn unit(key: &str, v: Option<f64>, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = v {
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(format!("agent.{key}"), format!("{v} is outside the range [0, 1]")));
            }
            *slot = v;
        }
        Ok(())
    }
    fn positive(key: &str, v: Option<f64>, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("agent.{key}"), format!("{v} must be positive and finite")));
            }
            *slot = v;
        }
        Ok(())
    }
    fn count(key: &str, v: Option<usize>, slot: &mut usize) -> Result<(), ConfigError> {
        if let Some(v) = v {
            if v == 0 {
                return Err(bad(format!("agent.{key}"), "must be positive"));
            }
            *slot = v;
        }
        Ok(())
    }
    unit("gamma", raw.gamma, &mut agent.gamma)?;
    positive("learning_rate", raw.learning_rate, &mut agent.learning_rate)?;
    unit("rms_decay", raw.rms_decay, &mut agent.rms_decay)?;
    positive("rms_epsilon", raw.rms_epsilon, &mut agent.rms_epsilon)?;
    unit("epsilon_initial", raw.epsilon_initial, &mut agent.epsilon_initial)?;
    unit("epsilon_final", raw.epsilon_final, &mut agent.epsilon_final)?;
    count("epsilon_anneal_steps", raw.epsilon_anneal_steps, &mut agent.epsilon_anneal_steps)?;
    count("target_sync_period", raw.target_sync_period, &mut agent.target_sync_period)?;
    count("warmup_steps", raw.warmup_steps, &mut agent.warmup_steps)?;
    count("batch_size", raw.batch_size, &mut agent.batch_size)?;
    count("replay_capacity", raw.replay_capacity, &mut agent.replay_capacity)?;
    count("training_steps", raw.training_steps, &mut agent.training_steps)?;
    count("action_repeat", raw.action_repeat, &mut agent.action_repeat)?;
    if let Some(mode) = raw.target_mode.as_deref() {
        agent.target_mode = match mode {
            "scalarized_greedy" => TargetMode::ScalarizedGreedy,
            "per_objective_max" => TargetMode::PerObjectiveMax,
            other => {
                return Err(bad("agent.target_mode", format!("expected scalarized_greedy or per_objective_max, got {other:?}")))
            }
        };
    }
    if let Some(hidden) = &raw.hidden {
        if hidden.contains(&0) {
            return Err(bad("agent.hidden", "layer widths must be positive"));
        }
        agent.hidden = hidden.clone();
    }
    if agent.batch_size > agent.replay_capacity {
        return Err(bad("agent.batch_size", "exceeds agent.replay_capacity"));
    }
    if agent.warmup_steps > agent.training_steps {
        return Err(bad("agent.warmup_steps", "exceeds agent.training_steps"));
    }
    agent.validate().map_err(|e| bad("agent", e.to_string()))
}
