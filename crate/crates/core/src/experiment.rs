//! Batch experiments: one evaluated episode per run, parameter sweeps over a
//! worker pool, and hyperparameter grids of training curves.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{MecEnv, TrajectoryRecord};
use crate::error::{MecError, Result};
use crate::hasac::{train, write_train_log, Algorithm, EpisodeLog, LearnedPolicy, TrainerConfig};
use crate::lyapunov::DriftReport;
use crate::nn::Activation;
use crate::queueing::{metrics, validate_action, write_event_log, JointAction, TaskRecord};
use crate::scenario::{derive_seed, SimConfig};
use crate::schedulers::{brute_force_oracle, clb_decide, gct_decide, ph_decide, ro_decide, GctOptions, OracleObjective, Snapshot, DEFAULT_LEVELS};

/// Episodes at the end of training averaged for "final reward".
pub const FINAL_WINDOW: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    Ph,
    Gct,
    /// Greedy completion time ignoring queued work.
    GctNoWait,
    Clb,
    Ro,
    Oracle,
    Hasac,
    Haa2c,
}

impl PolicyName {
    pub const ALL: [PolicyName; 8] = [
        PolicyName::Ph,
        PolicyName::Gct,
        PolicyName::GctNoWait,
        PolicyName::Clb,
        PolicyName::Ro,
        PolicyName::Oracle,
        PolicyName::Hasac,
        PolicyName::Haa2c,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyName::Ph => "ph",
            PolicyName::Gct => "gct",
            PolicyName::GctNoWait => "gct-nowait",
            PolicyName::Clb => "clb",
            PolicyName::Ro => "ro",
            PolicyName::Oracle => "oracle",
            PolicyName::Hasac => "hasac",
            PolicyName::Haa2c => "haa2c",
        }
    }

    pub fn algorithm(self) -> Option<Algorithm> {
        match self {
            PolicyName::Hasac => Some(Algorithm::Hasac),
            PolicyName::Haa2c => Some(Algorithm::Haa2c),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyName {
    type Err = MecError;

    fn from_str(s: &str) -> Result<Self> {
        PolicyName::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| MecError::InvalidArgument(format!("unknown policy `{s}`")))
    }
}

/// Seed of the evaluated episode of a run.
pub fn eval_seed(seed: u64) -> u64 {
    derive_seed(seed, 0x6576_616c)
}

/// Something that picks a joint action each slot.
pub enum Controller {
    Ph,
    Gct(GctOptions),
    Clb,
    Ro(ChaCha8Rng),
    Oracle,
    /// Acts on each policy's mode.
    Learned(LearnedPolicy),
    /// Samples each policy.
    Sampled(LearnedPolicy, ChaCha8Rng),
}

impl Controller {
    /// Non-learning controller for `policy`; learned policies come from training.
    pub fn scheduler(policy: PolicyName, seed: u64) -> Result<Self> {
        Ok(match policy {
            PolicyName::Ph => Controller::Ph,
            PolicyName::Gct => Controller::Gct(GctOptions { queue_wait: true }),
            PolicyName::GctNoWait => Controller::Gct(GctOptions { queue_wait: false }),
            PolicyName::Clb => Controller::Clb,
            PolicyName::Ro => Controller::Ro(ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x726f))),
            PolicyName::Oracle => Controller::Oracle,
            PolicyName::Hasac | PolicyName::Haa2c => {
                return Err(MecError::InvalidArgument(format!("{policy} needs training or a checkpoint")))
            }
        })
    }

    /// Trained actors as a controller. Soft actor-critic acts on the mode.
    /// The advantage actor-critic policy is trained on-policy without an
    /// entropy bonus, so it is evaluated as the stochastic policy it learned:
    /// the mode of its independent offer bits can collapse to offering nothing
    /// even when the sampled policy offloads well.
    pub fn learned(policy: LearnedPolicy, seed: u64) -> Self {
        match policy.algorithm {
            Algorithm::Hasac => Controller::Learned(policy),
            Algorithm::Haa2c => Controller::Sampled(policy, ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7361_6d70))),
        }
    }

    pub fn decide(&mut self, env: &MecEnv) -> Result<JointAction> {
        match self {
            Controller::Learned(p) => return p.act(env),
            Controller::Sampled(p, rng) => return env.project(&p.sample_raw_action(env, rng)?),
            _ => {}
        }
        let snap = Snapshot::of(env);
        let view = snap.view();
        match self {
            Controller::Ph => ph_decide(view),
            Controller::Gct(o) => gct_decide(view, *o),
            Controller::Clb => clb_decide(view),
            Controller::Ro(rng) => ro_decide(view, rng),
            Controller::Oracle => Ok(brute_force_oracle(view, OracleObjective::SlotCost, &DEFAULT_LEVELS)?.action),
            Controller::Learned(_) | Controller::Sampled(..) => unreachable!(),
        }
    }
}

/// Headline numbers of one evaluated episode. Completion figures are absent
/// when no task finished.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub policy: PolicyName,
    pub seed: u64,
    pub num_miot: usize,
    pub num_uav: usize,
    pub num_vessel: usize,
    pub horizon: usize,
    pub avg_completion: Option<f64>,
    pub avg_response: Option<f64>,
    pub avg_completion_censored: Option<f64>,
    pub edge_pct: Option<f64>,
    pub completed_tasks: usize,
    pub incomplete_tasks: usize,
    pub total_reward: f64,
    pub mean_reward: f64,
    pub mean_objective: f64,
    pub mean_phi: f64,
    pub mean_drift: f64,
    pub min_bound_slack: f64,
    pub bound_violations: usize,
    pub actions_checked: usize,
    pub action_violations: usize,
    pub final_backlog_bits: u64,
    /// Training episodes, zero for schedulers.
    pub train_episodes: usize,
    /// Mean reward over the last training episodes.
    pub train_final_reward: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    pub trajectory: Vec<TrajectoryRecord>,
    pub drift: Vec<DriftReport>,
    pub records: Vec<TaskRecord>,
    pub actions_checked: usize,
    pub action_violations: usize,
    pub env: MecEnv,
}

/// Runs one episode, checking every action against the feasibility rules
/// before it is executed. An infeasible action aborts the episode.
pub fn run_episode(cfg: &SimConfig, controller: &mut Controller, seed: u64) -> Result<EpisodeTrace> {
    let (mut env, _) = MecEnv::reset(cfg, seed)?;
    let mut trajectory = Vec::with_capacity(cfg.horizon);
    let mut drift = Vec::with_capacity(cfg.horizon);
    let mut checked = 0;
    while !env.is_done() {
        let a = controller.decide(&env)?;
        checked += 1;
        let bad = validate_action(&a, cfg, Some(env.residency()))?;
        if !bad.is_empty() {
            return Err(MecError::Infeasible(format!("slot {}: {}", env.slot(), bad[0])));
        }
        let out = env.step_joint(a)?;
        trajectory.push(TrajectoryRecord::from_step(&out, env.queues().total_bits()));
        drift.push(out.info.drift);
    }
    let records = env.network().records().to_vec();
    Ok(EpisodeTrace { trajectory, drift, records, actions_checked: checked, action_violations: 0, env })
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn summarize(policy: PolicyName, seed: u64, cfg: &SimConfig, trace: &EpisodeTrace) -> RunMetrics {
    let end = cfg.horizon as f64 * cfg.slot_len;
    let m = metrics(&trace.records, &trace.env.network().processed(), end).ok();
    let t = &trace.trajectory;
    let total_reward: f64 = t.iter().map(|r| r.reward).sum();
    RunMetrics {
        policy,
        seed,
        num_miot: cfg.num_miot,
        num_uav: cfg.num_uav,
        num_vessel: cfg.num_vessel,
        horizon: cfg.horizon,
        avg_completion: m.as_ref().map(|m| m.avg_completion),
        avg_response: m.as_ref().map(|m| m.avg_response),
        avg_completion_censored: m.as_ref().map(|m| m.avg_completion_censored),
        edge_pct: m.as_ref().map(|m| m.edge_pct),
        completed_tasks: m.as_ref().map_or(0, |m| m.completed_tasks),
        incomplete_tasks: m.as_ref().map_or_else(|| trace.records.iter().filter(|r| r.data_bits > 0).count(), |m| m.incomplete_tasks),
        total_reward,
        mean_reward: total_reward / t.len().max(1) as f64,
        mean_objective: mean(t.iter().map(|r| r.objective)),
        mean_phi: mean(t.iter().map(|r| r.phi)),
        mean_drift: mean(trace.drift.iter().map(|d| d.drift)),
        min_bound_slack: trace.drift.iter().map(|d| d.bound_slack).fold(f64::INFINITY, f64::min),
        bound_violations: trace.drift.iter().filter(|d| !d.holds).count(),
        actions_checked: trace.actions_checked,
        action_violations: trace.action_violations,
        final_backlog_bits: t.last().map_or(0, |r| r.backlog_bits),
        train_episodes: 0,
        train_final_reward: None,
    }
}

/// Mean per-step reward over the last `FINAL_WINDOW` episodes of a log.
pub fn final_reward(log: &[EpisodeLog]) -> Option<f64> {
    if log.is_empty() {
        return None;
    }
    let tail = &log[log.len().saturating_sub(FINAL_WINDOW)..];
    Some(mean(tail.iter().map(|l| l.mean_reward)))
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: EpisodeTrace,
    pub train_log: Vec<EpisodeLog>,
    pub policy: Option<LearnedPolicy>,
}

/// Trains (for learning policies) and evaluates one policy. A learned policy
/// supplied in `pretrained` is evaluated without training.
pub fn run(
    cfg: &SimConfig,
    policy: PolicyName,
    seed: u64,
    tcfg: &TrainerConfig,
    pretrained: Option<LearnedPolicy>,
) -> Result<RunOutput> {
    cfg.validate()?;
    let (mut controller, train_log, learned) = match (policy.algorithm(), pretrained) {
        (Some(_), Some(p)) => {
            p.check_scenario(cfg)?;
            (Controller::learned(p.clone(), seed), Vec::new(), Some(p))
        }
        (Some(alg), None) => {
            tcfg.validate()?;
            let out = train(alg, cfg, tcfg, seed, |_| {})?;
            (Controller::learned(out.policy.clone(), seed), out.log, Some(out.policy))
        }
        (None, _) => (Controller::scheduler(policy, seed)?, Vec::new(), None),
    };
    let trace = run_episode(cfg, &mut controller, eval_seed(seed))?;
    let mut metrics = summarize(policy, seed, cfg, &trace);
    metrics.train_episodes = train_log.len();
    metrics.train_final_reward = final_reward(&train_log);
    Ok(RunOutput { metrics, trace, train_log, policy: learned })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes metrics.json, timeseries.csv, drift.csv, events.csv and
/// trajectory.jsonl, plus train_log.csv and checkpoint.json after training.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut m = create(dir, "metrics.json")?;
    serde_json::to_writer_pretty(&mut m, &out.metrics)?;
    writeln!(m)?;
    m.flush()?;
    write_csv(&out.trace.trajectory, create(dir, "timeseries.csv")?)?;
    write_csv(&out.trace.drift, create(dir, "drift.csv")?)?;
    write_event_log(&out.trace.records, create(dir, "events.csv")?)?;
    let mut traj = create(dir, "trajectory.jsonl")?;
    for r in &out.trace.trajectory {
        writeln!(traj, "{}", r.to_json_line())?;
    }
    traj.flush()?;
    if let Some(p) = &out.policy {
        if !out.train_log.is_empty() {
            write_train_log(&out.train_log, p.specs.len(), create(dir, "train_log.csv")?)?;
        }
        fs::write(dir.join("checkpoint.json"), p.to_json())?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    NumMiot,
    NumUav,
    Bandwidth,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::NumMiot => "num_miot",
            Axis::NumUav => "num_uav",
            Axis::Bandwidth => "bandwidth",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(MecError::InvalidArgument(format!("{} must be a positive integer, got {value}", self.name())))
            }
        };
        let cfg = match self {
            Axis::NumMiot => SimConfig { num_miot: count()?, ..base.clone() },
            Axis::NumUav => SimConfig { num_uav: count()?, ..base.clone() },
            Axis::Bandwidth => SimConfig { bandwidth: value, ..base.clone() },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for Axis {
    type Err = MecError;

    fn from_str(s: &str) -> Result<Self> {
        [Axis::NumMiot, Axis::NumUav, Axis::Bandwidth]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| MecError::InvalidArgument(format!("unknown sweep axis `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: SimConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyName>,
    pub seeds: Vec<u64>,
    pub trainer: TrainerConfig,
}

/// One cell of a sweep. Metric columns are empty when the cell failed or no
/// task finished.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub policy: PolicyName,
    pub seed: u64,
    pub avg_completion: Option<f64>,
    pub avg_response: Option<f64>,
    pub edge_pct: Option<f64>,
    pub mean_reward: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: String,
    pub value: f64,
    pub policy: PolicyName,
    pub runs: usize,
    pub failures: usize,
    pub avg_completion_mean: Option<f64>,
    pub avg_completion_std: Option<f64>,
    pub avg_response_mean: Option<f64>,
    pub avg_response_std: Option<f64>,
    pub edge_pct_mean: Option<f64>,
    pub edge_pct_std: Option<f64>,
}

/// Runs every (value, policy, seed) cell on the rayon pool. A failing cell
/// is recorded in its row and the sweep carries on. Rows come back in cell
/// order regardless of scheduling.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.values.is_empty() {
        return Err(MecError::InvalidArgument("sweep needs at least one value".into()));
    }
    if spec.policies.is_empty() || spec.seeds.is_empty() {
        return Err(MecError::InvalidArgument("sweep needs at least one policy and one seed".into()));
    }
    let cells: Vec<(f64, PolicyName, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.policies.iter().flat_map(move |&p| spec.seeds.iter().map(move |&s| (v, p, s))))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(value, policy, seed)| {
            let result = spec.axis.apply(&spec.base, value).and_then(|cfg| run(&cfg, policy, seed, &spec.trainer, None));
            let mut row = SweepRow {
                axis: spec.axis.name().to_string(),
                value,
                policy,
                seed,
                avg_completion: None,
                avg_response: None,
                edge_pct: None,
                mean_reward: None,
                error: None,
            };
            match result {
                Ok(out) => {
                    row.avg_completion = out.metrics.avg_completion;
                    row.avg_response = out.metrics.avg_response;
                    row.edge_pct = out.metrics.edge_pct;
                    row.mean_reward = Some(out.metrics.mean_reward);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect())
}

/// Mean and sample standard deviation; the deviation needs two values.
pub fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let m = mean(xs.iter().copied());
    let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt());
    (Some(m), sd)
}

/// Per (value, policy) mean and sample std over seeds, in first-seen order.
pub fn summarize_sweep(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64, PolicyName)> = Vec::new();
    for r in rows {
        let k = (r.axis.clone(), r.value, r.policy);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(axis, value, policy)| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.axis == axis && r.value == value && r.policy == policy).collect();
            let col = |f: fn(&SweepRow) -> Option<f64>| mean_std(&cell.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            let (cm, cs) = col(|r| r.avg_completion);
            let (rm, rs) = col(|r| r.avg_response);
            let (em, es) = col(|r| r.edge_pct);
            SummaryRow {
                axis,
                value,
                policy,
                runs: cell.len(),
                failures: cell.iter().filter(|r| r.error.is_some()).count(),
                avg_completion_mean: cm,
                avg_completion_std: cs,
                avg_response_mean: rm,
                avg_response_std: rs,
                edge_pct_mean: em,
                edge_pct_std: es,
            }
        })
        .collect()
}

pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(rows, create(dir, "sweep.csv")?)?;
    write_csv(&summarize_sweep(rows), create(dir, "summary.csv")?)
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub base: SimConfig,
    pub trainer: TrainerConfig,
    pub learning_rates: Vec<f64>,
    pub hidden: Vec<Vec<usize>>,
    pub activations: Vec<Activation>,
    pub seeds: Vec<u64>,
}

/// One training episode of one grid configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub lr: f64,
    pub hidden: String,
    pub activation: Activation,
    pub seed: u64,
    pub episode: usize,
    pub mean_reward: f64,
    pub total_reward: f64,
}

pub fn hidden_label(h: &[usize]) -> String {
    h.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

/// Trains HASAC for every grid point and seed; rows are grouped by
/// configuration in grid order.
pub fn hyperparam_grid(spec: &GridSpec) -> Result<Vec<CurveRow>> {
    if spec.learning_rates.is_empty() || spec.hidden.is_empty() || spec.activations.is_empty() || spec.seeds.is_empty() {
        return Err(MecError::InvalidArgument("every grid dimension needs at least one value".into()));
    }
    spec.base.validate()?;
    let mut points = Vec::new();
    for &lr in &spec.learning_rates {
        for h in &spec.hidden {
            for &act in &spec.activations {
                for &seed in &spec.seeds {
                    let tcfg = TrainerConfig { actor_lr: lr, critic_lr: lr, hidden: h.clone(), activation: act, ..spec.trainer.clone() };
                    tcfg.validate()?;
                    points.push((lr, h.clone(), act, seed, tcfg));
                }
            }
        }
    }
    let curves: Vec<Result<Vec<CurveRow>>> = points
        .into_par_iter()
        .map(|(lr, h, activation, seed, tcfg)| {
            let out = train(Algorithm::Hasac, &spec.base, &tcfg, seed, |_| {})?;
            let hidden = hidden_label(&h);
            Ok(out
                .log
                .iter()
                .map(|l| CurveRow { lr, hidden: hidden.clone(), activation, seed, episode: l.episode, mean_reward: l.mean_reward, total_reward: l.total_reward })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for c in curves {
        rows.extend(c?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig { horizon: 20, ..SimConfig::default() }
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyName::ALL {
            assert_eq!(p.name().parse::<PolicyName>().unwrap(), p);
        }
        assert!("nope".parse::<PolicyName>().is_err());
    }

    #[test]
    fn mean_std_uses_sample_deviation() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((s.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (Some(7.0), None));
    }

    #[test]
    fn seeded_runs_repeat() {
        let t = TrainerConfig::desk();
        for p in [PolicyName::Ro, PolicyName::Gct, PolicyName::Ph, PolicyName::Clb] {
            let a = run(&small(), p, 7, &t, None).unwrap();
            let b = run(&small(), p, 7, &t, None).unwrap();
            assert_eq!(a.metrics, b.metrics);
            assert_eq!(a.trace.trajectory, b.trace.trajectory);
        }
    }

    #[test]
    fn a2c_policies_are_sampled_and_reproducible() {
        let t = TrainerConfig { episodes: 2, hidden: vec![8], batch_size: 8, ..TrainerConfig::desk() };
        let a = run(&small(), PolicyName::Haa2c, 3, &t, None).unwrap();
        let p = a.policy.clone().unwrap();
        assert!(matches!(Controller::learned(p.clone(), 3), Controller::Sampled(..)));
        let b = run(&small(), PolicyName::Haa2c, 3, &t, Some(p)).unwrap();
        assert_eq!(a.trace.trajectory, b.trace.trajectory);
        let h = run(&small(), PolicyName::Hasac, 3, &t, None).unwrap().policy.unwrap();
        assert!(matches!(Controller::learned(h, 3), Controller::Learned(_)));
    }

    #[test]
    fn oracle_refuses_large_scenarios() {
        let cfg = SimConfig { num_miot: 10, ..small() };
        assert!(matches!(run(&cfg, PolicyName::Oracle, 1, &TrainerConfig::desk(), None), Err(MecError::InstanceTooLarge(_))));
    }

    #[test]
    fn axis_apply_rejects_fractional_counts() {
        assert!(Axis::NumUav.apply(&small(), 2.5).is_err());
        assert_eq!(Axis::NumUav.apply(&small(), 4.0).unwrap().num_uav, 4);
        assert_eq!(Axis::Bandwidth.apply(&small(), 2e7).unwrap().bandwidth, 2e7);
    }

    #[test]
    fn sweep_records_failures_per_cell() {
        let spec = SweepSpec {
            base: small(),
            axis: Axis::NumMiot,
            values: vec![3.0, 10.0],
            policies: vec![PolicyName::Oracle],
            seeds: vec![1],
            trainer: TrainerConfig::desk(),
        };
        let rows = sweep(&spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.as_deref().unwrap().contains("too large"));
        let summary = summarize_sweep(&rows);
        assert_eq!((summary[1].runs, summary[1].failures), (1, 1));
        assert!(sweep(&SweepSpec { values: vec![], ..spec }).is_err());
    }
}
