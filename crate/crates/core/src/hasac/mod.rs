//! Learned controllers: a heterogeneous-agent soft actor-critic trainer and a
//! sequential advantage actor-critic baseline, both acting through the
//! environment's raw per-agent action interface.

pub mod a2c;
pub mod buffer;
pub mod policy;
pub mod sac;

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{action_space, observation_dim, state_dim, MecEnv, RawJointAction};
use crate::error::{MecError, Result};
use crate::nn::{Activation, DenseNet, NetCheckpoint};
use crate::queueing::{metrics, JointAction};
use crate::scenario::{derive_seed, SimConfig};

pub use a2c::A2c;
pub use buffer::{ReplayBuffer, Transition};
pub use policy::{AgentAction, AgentSpec, HeadLayout};
pub use sac::{Batch, Sac, UpdateLosses};

/// Continuous outputs live in (−1, 1); they are stretched before the softmax
/// that splits CPU capacity so that allocations can become lopsided.
pub const ALLOC_LOGIT_SCALE: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub episodes: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub polyak: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps between updates once the buffer holds a batch.
    pub update_every: usize,
    /// Environment steps per on-policy segment (advantage actor-critic only).
    pub rollout_len: usize,
    /// Return horizon for advantages (advantage actor-critic only).
    pub n_step: usize,
    /// Bound on each factor of the compounded ratio in sequential A2C updates.
    pub ratio_clip: f64,
    /// Multiplies rewards before the learner sees them. Logged rewards are
    /// unscaled.
    pub reward_scale: f64,
}

impl Default for TrainerConfig {
    /// Full-scale settings.
    fn default() -> Self {
        TrainerConfig {
            episodes: 200,
            hidden: vec![512, 512],
            activation: Activation::LeakyRelu,
            actor_lr: 5e-4,
            critic_lr: 5e-4,
            gamma: 0.99,
            alpha: 0.001,
            polyak: 0.995,
            batch_size: 1024,
            buffer_capacity: 1_000_000,
            update_every: 1,
            rollout_len: 20,
            n_step: 5,
            ratio_clip: 0.2,
            reward_scale: 0.01,
        }
    }
}

impl TrainerConfig {
    /// Reduced networks and update cadence that train the small scenarios on
    /// a single core in minutes.
    pub fn desk() -> Self {
        TrainerConfig { hidden: vec![64, 64], batch_size: 128, update_every: 4, ..TrainerConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Err(MecError::validation(key, reason));
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(self.polyak > 0.0 && self.polyak <= 1.0) {
            return bad("polyak", "must lie in (0, 1]");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha", "must be non-negative");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("actor_lr", "learning rates must be positive");
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return bad("batch_size", "must be positive and at most buffer_capacity");
        }
        if self.hidden.contains(&0) {
            return bad("hidden", "layer widths must be positive");
        }
        if self.update_every == 0 || self.rollout_len == 0 || self.n_step == 0 {
            return bad("update_every", "cadences must be positive");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale", "must be positive");
        }
        if !(self.ratio_clip >= 0.0 && self.ratio_clip < 1.0) {
            return bad("ratio_clip", "must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Hasac,
    Haa2c,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hasac => "hasac",
            Algorithm::Haa2c => "haa2c",
        }
    }
}

/// Per-agent policy shapes for a scenario, UAV agents first.
pub fn agent_specs(cfg: &SimConfig) -> Result<Vec<AgentSpec>> {
    (0..cfg.num_uav + cfg.num_vessel)
        .map(|id| {
            let space = action_space(cfg, id)?;
            Ok(AgentSpec {
                obs_dim: observation_dim(cfg, id)?,
                layout: HeadLayout { categorical: space.categorical_sizes(), continuous: space.continuous },
            })
        })
        .collect()
}

pub fn to_raw_action(cfg: &SimConfig, actions: &[AgentAction]) -> Result<RawJointAction> {
    let parts: Vec<(Vec<usize>, Vec<f64>)> = actions
        .iter()
        .map(|a| (a.discrete.clone(), a.continuous.iter().map(|x| ALLOC_LOGIT_SCALE * x).collect()))
        .collect();
    RawJointAction::from_components(cfg, &parts)
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub total_reward: f64,
    pub mean_reward: f64,
    pub updates: usize,
    /// Mean over the episode's updates; NaN when none ran.
    pub critic_loss: [f64; 2],
    pub policy_loss: Vec<f64>,
    /// Completion time of the episode's finished tasks, if any finished.
    pub avg_completion: Option<f64>,
}

pub fn write_train_log<W: Write>(logs: &[EpisodeLog], num_agents: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["episode".to_string(), "mean_reward".into(), "total_reward".into(), "updates".into()];
    header.extend(["critic1_loss".to_string(), "critic2_loss".into()]);
    header.extend((0..num_agents).map(|a| format!("policy_loss_{a}")));
    header.push("avg_completion".into());
    w.write_record(&header)?;
    for l in logs {
        let mut row = vec![l.episode.to_string(), l.mean_reward.to_string(), l.total_reward.to_string(), l.updates.to_string()];
        row.extend(l.critic_loss.iter().map(|x| x.to_string()));
        row.extend(l.policy_loss.iter().map(|x| x.to_string()));
        row.push(l.avg_completion.map(|x| x.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Running means of update losses over an episode.
#[derive(Default)]
pub(crate) struct LossAccumulator {
    n: usize,
    critic: [f64; 2],
    policy: Vec<f64>,
}

impl LossAccumulator {
    pub(crate) fn add(&mut self, critic: [f64; 2], policy: &[f64]) {
        if self.policy.is_empty() {
            self.policy = vec![0.0; policy.len()];
        }
        self.n += 1;
        self.critic[0] += critic[0];
        self.critic[1] += critic[1];
        for (acc, p) in self.policy.iter_mut().zip(policy) {
            *acc += p;
        }
    }

    pub(crate) fn finish(self, num_agents: usize) -> (usize, [f64; 2], Vec<f64>) {
        if self.n == 0 {
            return (0, [f64::NAN; 2], vec![f64::NAN; num_agents]);
        }
        let n = self.n as f64;
        (self.n, [self.critic[0] / n, self.critic[1] / n], self.policy.iter().map(|p| p / n).collect())
    }
}

pub(crate) fn episode_completion(env: &MecEnv) -> Option<f64> {
    let cfg = env.config();
    let end = cfg.horizon as f64 * cfg.slot_len;
    metrics(env.network().records(), &env.network().processed(), end).ok().map(|m| m.avg_completion)
}

/// Seed of the environment used for training episode `episode`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(seed, 0x7472_6169_6e00_0000 ^ episode as u64)
}

/// Trained actors, usable as a deterministic controller.
#[derive(Clone, Debug)]
pub struct LearnedPolicy {
    pub algorithm: Algorithm,
    pub specs: Vec<AgentSpec>,
    pub actors: Vec<DenseNet>,
}

impl LearnedPolicy {
    /// Each agent takes its policy's mode given its own observation.
    pub fn raw_action(&self, env: &MecEnv) -> Result<RawJointAction> {
        // The mode never consumes randomness.
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        self.draw(env, &mut rng, true)
    }

    /// Each agent samples from its policy given its own observation.
    pub fn sample_raw_action<R: Rng + ?Sized>(&self, env: &MecEnv, rng: &mut R) -> Result<RawJointAction> {
        self.draw(env, rng, false)
    }

    fn draw<R: Rng + ?Sized>(&self, env: &MecEnv, rng: &mut R, mode: bool) -> Result<RawJointAction> {
        let obs = env.observations();
        let actions: Vec<AgentAction> = obs
            .iter()
            .zip(&self.actors)
            .zip(&self.specs)
            .map(|((o, actor), spec)| {
                let out = actor.forward_vec(o)?;
                Ok(policy::sample_from_output(&spec.layout, &out, rng, mode).action)
            })
            .collect::<Result<_>>()?;
        to_raw_action(env.config(), &actions)
    }

    pub fn act(&self, env: &MecEnv) -> Result<JointAction> {
        env.project(&self.raw_action(env)?)
    }

    pub fn to_checkpoint(&self) -> PolicyCheckpoint {
        PolicyCheckpoint {
            algorithm: self.algorithm,
            specs: self.specs.clone(),
            actors: self.actors.iter().map(NetCheckpoint::from_net).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("policy checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: PolicyCheckpoint = serde_json::from_str(text).map_err(|e| MecError::Checkpoint(e.to_string()))?;
        ck.into_policy()
    }

    /// Errors unless the actors fit the scenario's agents.
    pub fn check_scenario(&self, cfg: &SimConfig) -> Result<()> {
        if agent_specs(cfg)? != self.specs {
            return Err(MecError::Checkpoint("policy was trained for a different scenario shape".into()));
        }
        Ok(())
    }
}

/// On-disk form of a set of trained actors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub algorithm: Algorithm,
    pub specs: Vec<AgentSpec>,
    pub actors: Vec<NetCheckpoint>,
}

impl PolicyCheckpoint {
    pub fn into_policy(self) -> Result<LearnedPolicy> {
        if self.specs.len() != self.actors.len() {
            return Err(MecError::Checkpoint(format!("{} specs but {} actors", self.specs.len(), self.actors.len())));
        }
        let mut actors = Vec::with_capacity(self.actors.len());
        for (a, (spec, ck)) in self.specs.iter().zip(self.actors).enumerate() {
            let net = ck.into_net()?;
            if net.input_dim() != spec.obs_dim || net.output_dim() != spec.layout.output_len() {
                return Err(MecError::Checkpoint(format!("actor {a} does not match its declared spec")));
            }
            actors.push(net);
        }
        Ok(LearnedPolicy { algorithm: self.algorithm, specs: self.specs, actors })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub policy: LearnedPolicy,
    pub log: Vec<EpisodeLog>,
}

/// Trains the soft actor-critic agents for `tcfg.episodes` episodes, one
/// fresh environment draw per episode. `on_episode` sees each log row as
/// soon as the episode ends.
pub fn train_hasac(
    cfg: &SimConfig,
    tcfg: &TrainerConfig,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<TrainOutcome> {
    let specs = agent_specs(cfg)?;
    let n_agents = specs.len();
    let mut sac = Sac::new(specs.clone(), state_dim(cfg), tcfg.clone(), derive_seed(seed, 0x7361_6300))?;
    let mut buffer = ReplayBuffer::new(tcfg.buffer_capacity);
    let mut log = Vec::with_capacity(tcfg.episodes);
    let mut steps = 0usize;
    for episode in 0..tcfg.episodes {
        let (mut env, mut obs) = MecEnv::reset(cfg, episode_seed(seed, episode))?;
        let mut state = crate::env::state_vector(&env.state(), cfg);
        let mut total = 0.0;
        let mut acc = LossAccumulator::default();
        let mut len = 0usize;
        while !env.is_done() {
            let actions: Vec<AgentAction> = sac.act(&obs, false)?.into_iter().map(|s| s.action).collect();
            let out = env.step(&to_raw_action(cfg, &actions)?)?;
            let next_state = crate::env::state_vector(&env.state(), cfg);
            total += out.reward;
            len += 1;
            buffer.store(Transition {
                state,
                obs,
                actions,
                reward: out.reward * tcfg.reward_scale,
                next_state: next_state.clone(),
                next_obs: out.observations.clone(),
                terminal: false,
            });
            state = next_state;
            obs = out.observations;
            steps += 1;
            if buffer.len() >= tcfg.batch_size && steps % tcfg.update_every == 0 {
                let l = sac.update(&buffer)?;
                acc.add(l.critic, &l.policy);
            }
        }
        let (updates, critic_loss, policy_loss) = acc.finish(n_agents);
        let row = EpisodeLog {
            episode,
            total_reward: total,
            mean_reward: total / len.max(1) as f64,
            updates,
            critic_loss,
            policy_loss,
            avg_completion: episode_completion(&env),
        };
        on_episode(&row);
        log.push(row);
    }
    let policy = LearnedPolicy { algorithm: Algorithm::Hasac, specs, actors: sac.actors().to_vec() };
    Ok(TrainOutcome { policy, log })
}

pub fn train(
    algorithm: Algorithm,
    cfg: &SimConfig,
    tcfg: &TrainerConfig,
    seed: u64,
    on_episode: impl FnMut(&EpisodeLog),
) -> Result<TrainOutcome> {
    match algorithm {
        Algorithm::Hasac => train_hasac(cfg, tcfg, seed, on_episode),
        Algorithm::Haa2c => a2c::train_haa2c(cfg, tcfg, seed, on_episode),
    }
}
