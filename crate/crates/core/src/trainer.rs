//! Training orchestration: single trials, sequential sweeps, parallel
//! multi-policy runs, and the periodic greedy evaluation that feeds the
//! online hypervolume.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use crate::agent::{Agent, AgentConfig};
use crate::envs::{EnvConfig, Environment, RewardVector};
use crate::error::{invalid, Result};
use crate::metrics::{nondominated_filter, Front};
use crate::replay::Transition;

pub const DEFAULT_EVAL_PERIOD: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub env: EnvConfig,
    /// Includes the trial's scalarization and step budget.
    pub agent: AgentConfig,
    pub eval_period: usize,
    pub seed: u64,
}

impl TrialSpec {
    pub fn new(env: EnvConfig, agent: AgentConfig, seed: u64) -> Self {
        Self { env, agent, eval_period: DEFAULT_EVAL_PERIOD, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        if self.eval_period == 0 {
            return Err(invalid("eval_period must be positive"));
        }
        if self.agent.scalarization.n_objectives() != self.env.n_objectives() {
            return Err(invalid(format!(
                "scalarization covers {} objectives but the environment has {}",
                self.agent.scalarization.n_objectives(),
                self.env.n_objectives()
            )));
        }
        Ok(())
    }
}

/// One greedy evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    /// Training decisions taken when the evaluation ran.
    pub step: usize,
    pub ret: RewardVector,
    /// Decisions in the evaluation episode.
    pub length: usize,
}

/// Return of a completed training (exploring) episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub ret: RewardVector,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameCount {
    pub training: usize,
    pub evaluation: usize,
}

impl FrameCount {
    pub fn total(&self) -> usize {
        self.training + self.evaluation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub spec: TrialSpec,
    pub records: Vec<EvalRecord>,
    pub trace: Vec<TraceRecord>,
    pub frames: FrameCount,
}

impl TrainLog {
    /// Non-dominated set of every evaluation return up to `step`.
    pub fn archive_at(&self, step: usize) -> Result<Front> {
        let pts: Vec<RewardVector> =
            self.records.iter().take_while(|r| r.step <= step).map(|r| r.ret.clone()).collect();
        nondominated_filter(&pts)
    }

    pub fn last_returns(&self, n: usize) -> &[EvalRecord] {
        &self.records[self.records.len().saturating_sub(n)..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub ret: RewardVector,
    pub length: usize,
    pub frames: usize,
}

/// Runs one exploration-free episode from reset. Takes the agent by shared
/// reference, so replay, parameters, optimizer state, counters and RNG are
/// untouched.
pub fn greedy_eval(env: &mut dyn Environment, agent: &Agent) -> Result<Episode> {
    env.reset();
    let mut ret = vec![0.0; env.n_objectives()];
    let mut length = 0;
    loop {
        let action = agent.greedy_action(&env.observe())?;
        let step = env.step(action)?;
        for (acc, r) in ret.iter_mut().zip(&step.reward) {
            *acc += r;
        }
        length += 1;
        if step.done() {
            break;
        }
    }
    Ok(Episode { ret, length, frames: env.frames_elapsed() })
}

pub fn run_trial(spec: &TrialSpec) -> Result<TrainLog> {
    run_trial_with_progress(spec, &mut |_| {})
}

/// As [`run_trial`], reporting each evaluation as it happens.
pub fn run_trial_with_progress(spec: &TrialSpec, on_eval: &mut dyn FnMut(&EvalRecord)) -> Result<TrainLog> {
    spec.validate()?;
    let cfg = &spec.agent;
    let mut env = spec.env.build(cfg.action_repeat)?;
    let mut eval_env = spec.env.build(cfg.action_repeat)?;
    let net = cfg.network_spec(env.input_shape(), env.n_objectives(), env.n_actions())?;
    let mut agent = Agent::new(cfg.clone(), net, spec.seed)?;

    let mut records = Vec::with_capacity(cfg.training_steps / spec.eval_period);
    let mut trace = Vec::new();
    let mut frames = FrameCount::default();

    env.reset();
    let mut obs = env.observe();
    let mut episode_return = vec![0.0; env.n_objectives()];
    for t in 1..=cfg.training_steps {
        let action = agent.select_action(&obs)?;
        let step = env.step(action)?;
        let next = env.observe();
        let done = step.done();
        for (acc, r) in episode_return.iter_mut().zip(&step.reward) {
            *acc += r;
        }
        agent.observe(Transition { state: obs, action, reward: step.reward, next_state: next.clone(), terminal: done });
        if agent.ready_to_train() {
            agent.train_step()?;
        }
        if done {
            trace.push(TraceRecord { step: t, ret: std::mem::replace(&mut episode_return, vec![0.0; env.n_objectives()]) });
            frames.training += env.frames_elapsed();
            env.reset();
            obs = env.observe();
        } else {
            obs = next;
        }
        if t % spec.eval_period == 0 {
            let ep = greedy_eval(eval_env.as_mut(), &agent)?;
            frames.evaluation += ep.frames;
            let rec = EvalRecord { step: t, ret: ep.ret, length: ep.length };
            on_eval(&rec);
            records.push(rec);
        }
    }
    frames.training += env.frames_elapsed();
    Ok(TrainLog { spec: spec.clone(), records, trace, frames })
}

/// Merged point set per evaluation step.
pub type MergedFronts = Vec<(usize, Front)>;

fn check_compatible(specs: &[TrialSpec]) -> Result<()> {
    let Some(first) = specs.first() else {
        return Err(invalid("at least one trial is required"));
    };
    for s in specs {
        if s.env != first.env {
            return Err(invalid("all trials must share one environment"));
        }
        if s.eval_period != first.eval_period {
            return Err(invalid("all trials must share one eval_period"));
        }
    }
    Ok(())
}

/// Trials laid end to end: trial `j`'s evaluation at step `k` lands at
/// `Σ_{i<j} training_steps_i + k`, merged with the full archives of the
/// trials before it.
pub fn merge_sequential(logs: &[TrainLog]) -> Result<MergedFronts> {
    let mut merged = Vec::new();
    let mut finished: Front = Vec::new();
    let mut offset = 0;
    for log in logs {
        for rec in &log.records {
            let mut pts = finished.clone();
            pts.extend(log.archive_at(rec.step)?);
            merged.push((offset + rec.step, nondominated_filter(&pts)?));
        }
        finished.extend(log.archive_at(usize::MAX)?);
        finished = nondominated_filter(&finished)?;
        offset += log.spec.agent.training_steps;
    }
    Ok(merged)
}

/// Trials side by side: the merged set at step `k` unites every trial's
/// archive at `k`.
pub fn merge_parallel(logs: &[&TrainLog]) -> Result<MergedFronts> {
    let steps: BTreeSet<usize> = logs.iter().flat_map(|l| l.records.iter().map(|r| r.step)).collect();
    steps
        .into_iter()
        .map(|k| {
            let mut pts = Vec::new();
            for log in logs {
                pts.extend(log.archive_at(k)?);
            }
            Ok((k, nondominated_filter(&pts)?))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SequentialRun {
    pub logs: Vec<TrainLog>,
    pub merged: MergedFronts,
}

impl SequentialRun {
    pub fn total_training_steps(&self) -> usize {
        self.logs.iter().map(|l| l.spec.agent.training_steps).sum()
    }
}

pub fn run_sequential(specs: &[TrialSpec]) -> Result<SequentialRun> {
    check_compatible(specs)?;
    for s in specs {
        s.validate()?;
    }
    let logs = specs.iter().map(run_trial).collect::<Result<Vec<_>>>()?;
    let merged = merge_sequential(&logs)?;
    Ok(SequentialRun { logs, merged })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ParallelRun {
    /// Indexed like the input specs.
    pub outcomes: Vec<Result<TrainLog, TrialFailure>>,
    /// Built from the successful trials only.
    pub merged: MergedFronts,
}

impl ParallelRun {
    pub fn logs(&self) -> impl Iterator<Item = &TrainLog> {
        self.outcomes.iter().filter_map(|o| o.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &TrialFailure> {
        self.outcomes.iter().filter_map(|o| o.as_ref().err())
    }
}

/// Online merged front, published once every live trial has reported
/// the evaluation at `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub front: Front,
}

enum Message {
    Eval(usize, EvalRecord),
    Done(usize, Box<Result<TrainLog, TrialFailure>>),
}

pub type TrialRunner<'a> = dyn Fn(&TrialSpec, &mut dyn FnMut(&EvalRecord)) -> Result<TrainLog> + Sync + 'a;

pub fn run_parallel(specs: &[TrialSpec], workers: Option<usize>) -> Result<ParallelRun> {
    run_parallel_with(specs, workers, &run_trial_with_progress, &mut |_| {})
}

/// One isolated worker per trial (or a pool of `workers`). Each worker
/// streams evaluations to this thread, which acts as the sole aggregator
/// and hands out snapshots through `on_snapshot`.
pub fn run_parallel_with(
    specs: &[TrialSpec],
    workers: Option<usize>,
    runner: &TrialRunner<'_>,
    on_snapshot: &mut dyn FnMut(&Snapshot),
) -> Result<ParallelRun> {
    check_compatible(specs)?;
    for s in specs {
        s.validate()?;
    }
    let n = specs.len();
    let workers = workers.unwrap_or(n).clamp(1, n);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<Message>();

    let outcomes = std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let progress_tx = tx.clone();
                let mut report = |rec: &EvalRecord| {
                    let _ = progress_tx.send(Message::Eval(i, rec.clone()));
                };
                let outcome = match catch_unwind(AssertUnwindSafe(|| runner(&specs[i], &mut report))) {
                    Ok(Ok(log)) => Ok(log),
                    Ok(Err(e)) => Err(TrialFailure { index: i, message: e.to_string() }),
                    Err(panic) => Err(TrialFailure { index: i, message: panic_message(&panic) }),
                };
                let _ = tx.send(Message::Done(i, Box::new(outcome)));
            });
        }
        drop(tx);
        aggregate(rx, n, on_snapshot)
    });

    let ok: Vec<&TrainLog> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let merged = merge_parallel(&ok)?;
    Ok(ParallelRun { outcomes, merged })
}

fn panic_message(payload: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".to_string()
    }
}

fn aggregate(
    rx: mpsc::Receiver<Message>,
    n: usize,
    on_snapshot: &mut dyn FnMut(&Snapshot),
) -> Vec<Result<TrainLog, TrialFailure>> {
    let mut outcomes: Vec<Option<Result<TrainLog, TrialFailure>>> = (0..n).map(|_| None).collect();
    let mut seen: Vec<Vec<EvalRecord>> = vec![Vec::new(); n];
    let mut published = 0usize;
    for msg in rx {
        match msg {
            Message::Eval(i, rec) => seen[i].push(rec),
            Message::Done(i, outcome) => outcomes[i] = Some(*outcome),
        }
        // Publish every step that all unfinished trials have passed.
        let horizon = (0..n)
            .filter(|&i| outcomes[i].is_none())
            .map(|i| seen[i].last().map_or(0, |r| r.step))
            .min()
            .unwrap_or(usize::MAX);
        let pending: BTreeSet<usize> = seen
            .iter()
            .flatten()
            .map(|r| r.step)
            .filter(|&s| s > published && s <= horizon)
            .collect();
        for step in pending {
            let pts: Vec<RewardVector> =
                seen.iter().flatten().filter(|r| r.step <= step).map(|r| r.ret.clone()).collect();
            if let Ok(front) = nondominated_filter(&pts) {
                on_snapshot(&Snapshot { step, front });
            }
            published = step;
        }
    }
    outcomes
        .into_iter()
        .enumerate()
        .map(|(i, o)| o.unwrap_or_else(|| Err(TrialFailure { index: i, message: "worker vanished".into() })))
        .collect()
}
