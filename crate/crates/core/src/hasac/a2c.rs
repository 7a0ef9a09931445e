//! On-policy advantage actor-critic baseline: a centralized value network,
//! n-step advantages and the same randomly permuted sequential agent update,
//! where each agent's advantage is reweighted by the compounded probability
//! ratio of the agents updated before it.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::policy::{build_actor, log_prob_of, sample_from_output, AgentAction, AgentSpec, SampledAction};
use super::{agent_specs, episode_completion, episode_seed, to_raw_action, Algorithm, EpisodeLog, LearnedPolicy, TrainOutcome, TrainerConfig};
use crate::env::{state_vector, state_dim, MecEnv};
use crate::error::{MecError, Result};
use crate::nn::{Activation, Adam, DenseNet, Grads};
use crate::scenario::{derive_seed, SimConfig};

/// One on-policy step.
#[derive(Clone, Debug)]
pub struct RolloutStep {
    pub state: Vec<f64>,
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<AgentAction>,
    pub reward: f64,
}

/// Contiguous on-policy steps plus the state reached after the last one.
#[derive(Clone, Debug)]
pub struct Segment {
    pub steps: Vec<RolloutStep>,
    pub last_state: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct A2cLosses {
    pub value: f64,
    /// Indexed by agent id.
    pub policy: Vec<f64>,
}

/// `G_t = Σ_{l<h} γ^l r_{t+l} + γ^h V_{t+h}` with `h = min(n, T − t)`;
/// `values` has one more entry than `rewards` (the bootstrap value).
pub fn n_step_returns(rewards: &[f64], values: &[f64], gamma: f64, n: usize) -> Vec<f64> {
    assert_eq!(values.len(), rewards.len() + 1);
    let t_len = rewards.len();
    (0..t_len)
        .map(|t| {
            let h = n.min(t_len - t);
            let mut g = 0.0;
            let mut disc = 1.0;
            for r in &rewards[t..t + h] {
                g += disc * r;
                disc *= gamma;
            }
            g + disc * values[t + h]
        })
        .collect()
}

fn rows(vs: impl Iterator<Item = Vec<f64>>, width: usize) -> Array2<f64> {
    let flat: Vec<f64> = vs.flatten().collect();
    Array2::from_shape_vec((flat.len() / width, width), flat).expect("consistent row widths")
}

#[derive(Clone, Debug)]
pub struct A2c {
    specs: Vec<AgentSpec>,
    state_dim: usize,
    cfg: TrainerConfig,
    actors: Vec<DenseNet>,
    actor_opts: Vec<Adam>,
    value: DenseNet,
    value_opt: Adam,
    rng: ChaCha8Rng,
}

impl A2c {
    pub fn new(specs: Vec<AgentSpec>, state_dim: usize, cfg: TrainerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actors: Vec<DenseNet> = specs.iter().map(|s| build_actor(s, &cfg.hidden, cfg.activation, &mut rng)).collect();
        let mut sizes = vec![state_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let value = DenseNet::new(&sizes, cfg.activation, Activation::Identity, &mut rng);
        let actor_opts = actors.iter().map(|a| Adam::new(a, cfg.actor_lr)).collect();
        let value_opt = Adam::new(&value, cfg.critic_lr);
        Ok(A2c { specs, state_dim, cfg, actors, actor_opts, value, value_opt, rng })
    }

    pub fn actors(&self) -> &[DenseNet] {
        &self.actors
    }

    pub fn value_net(&self) -> &DenseNet {
        &self.value
    }

    pub fn act(&mut self, obs: &[Vec<f64>]) -> Result<Vec<SampledAction>> {
        let mut out = Vec::with_capacity(obs.len());
        for ((o, actor), spec) in obs.iter().zip(&self.actors).zip(&self.specs) {
            let row = actor.forward_vec(o)?;
            out.push(sample_from_output(&spec.layout, &row, &mut self.rng, false));
        }
        Ok(out)
    }

    pub fn values(&self, states: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.value.predict(states)?.into_iter().collect())
    }

    /// One Adam step of mean-squared regression of the value net onto `targets`.
    pub fn fit_value(&mut self, states: &Array2<f64>, targets: &[f64]) -> Result<f64> {
        let n = targets.len() as f64;
        let (v, cache) = self.value.forward(states)?;
        let resid = Array2::from_shape_fn((targets.len(), 1), |(b, _)| v[[b, 0]] - targets[b]);
        let loss = resid.iter().map(|r| r * r).sum::<f64>() / n;
        if !loss.is_finite() {
            return Err(MecError::NonFinite { what: "value loss", detail: format!("{loss}") });
        }
        let (g, _) = self.value.backward(&cache, &(resid * (2.0 / n)))?;
        self.value_opt.step(&mut self.value, &g)?;
        Ok(loss)
    }

    /// Gradient of `−mean_t w_t·log π(a_t | o_t)` for one agent, plus the
    /// log-probabilities it was evaluated at and the loss.
    pub fn policy_gradient(&self, agent: usize, obs: &Array2<f64>, actions: &[AgentAction], weights: &[f64]) -> Result<(Grads, Vec<f64>, f64)> {
        let layout = &self.specs[agent].layout;
        let n = actions.len() as f64;
        let (out, cache) = self.actors[agent].forward(obs)?;
        let mut grad = Array2::<f64>::zeros(out.dim());
        let mut logp = Vec::with_capacity(actions.len());
        let mut loss = 0.0;
        for (b, (a, &w)) in actions.iter().zip(weights).enumerate() {
            let (lp, g) = log_prob_of(layout, out.row(b).as_slice().expect("row-major"), a);
            loss -= w * lp / n;
            for (dst, gv) in grad.row_mut(b).iter_mut().zip(&g) {
                *dst = -w * gv / n;
            }
            logp.push(lp);
        }
        let (grads, _) = self.actors[agent].backward(&cache, &grad)?;
        Ok((grads, logp, loss))
    }

    fn log_probs(&self, agent: usize, obs: &Array2<f64>, actions: &[AgentAction]) -> Result<Vec<f64>> {
        let layout = &self.specs[agent].layout;
        let out = self.actors[agent].predict(obs)?;
        Ok(actions.iter().enumerate().map(|(b, a)| log_prob_of(layout, out.row(b).as_slice().expect("row-major"), a).0).collect())
    }

    /// Value regression onto n-step returns, then one policy step per agent
    /// in a random order with compounded, clipped ratios.
    pub fn a2c_variant_update(&mut self, seg: &Segment) -> Result<A2cLosses> {
        if seg.steps.is_empty() {
            return Err(MecError::InvalidArgument("empty rollout segment".into()));
        }
        let t_len = seg.steps.len();
        let states = rows(seg.steps.iter().map(|s| s.state.clone()).chain(std::iter::once(seg.last_state.clone())), self.state_dim);
        let values = self.values(&states)?;
        let rewards: Vec<f64> = seg.steps.iter().map(|s| s.reward).collect();
        let returns = n_step_returns(&rewards, &values, self.cfg.gamma, self.cfg.n_step);
        let mut adv: Vec<f64> = returns.iter().zip(&values).map(|(g, v)| g - v).collect();
        let mean = adv.iter().sum::<f64>() / t_len as f64;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / t_len as f64).sqrt();
        if std > 1e-8 {
            adv.iter_mut().for_each(|a| *a = (*a - mean) / std);
        }

        let value_loss = self.fit_value(&states.slice(ndarray::s![..t_len, ..]).to_owned(), &returns)?;

        let mut order: Vec<usize> = (0..self.specs.len()).collect();
        order.shuffle(&mut self.rng);
        let mut factor = vec![1.0; t_len];
        let mut policy = vec![0.0; self.specs.len()];
        let (lo, hi) = (1.0 - self.cfg.ratio_clip, 1.0 + self.cfg.ratio_clip);
        for &agent in &order {
            let obs = rows(seg.steps.iter().map(|s| s.obs[agent].clone()), self.specs[agent].obs_dim);
            let actions: Vec<AgentAction> = seg.steps.iter().map(|s| s.actions[agent].clone()).collect();
            let weights: Vec<f64> = factor.iter().zip(&adv).map(|(m, a)| m * a).collect();
            let (grads, old, loss) = self.policy_gradient(agent, &obs, &actions, &weights)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(MecError::NonFinite { what: "policy loss", detail: format!("agent {agent}") });
            }
            self.actor_opts[agent].step(&mut self.actors[agent], &grads)?;
            let new = self.log_probs(agent, &obs, &actions)?;
            for ((m, o), n) in factor.iter_mut().zip(&old).zip(&new) {
                *m *= (n - o).exp().clamp(lo, hi);
            }
            policy[agent] = loss;
        }
        Ok(A2cLosses { value: value_loss, policy })
    }
}

pub fn train_haa2c(
    cfg: &SimConfig,
    tcfg: &TrainerConfig,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<TrainOutcome> {
    let specs = agent_specs(cfg)?;
    let n_agents = specs.len();
    let mut learner = A2c::new(specs.clone(), state_dim(cfg), tcfg.clone(), derive_seed(seed, 0x6132_6300))?;
    let mut log = Vec::with_capacity(tcfg.episodes);
    for episode in 0..tcfg.episodes {
        let (mut env, mut obs) = MecEnv::reset(cfg, episode_seed(seed, episode))?;
        let mut state = state_vector(&env.state(), cfg);
        let mut seg = Vec::with_capacity(tcfg.rollout_len);
        let mut total = 0.0;
        let mut len = 0usize;
        let mut acc = super::LossAccumulator::default();
        while !env.is_done() {
            let actions: Vec<AgentAction> = learner.act(&obs)?.into_iter().map(|s| s.action).collect();
            let out = env.step(&to_raw_action(cfg, &actions)?)?;
            total += out.reward;
            len += 1;
            seg.push(RolloutStep { state, obs, actions, reward: out.reward * tcfg.reward_scale });
            state = state_vector(&env.state(), cfg);
            obs = out.observations;
            if seg.len() == tcfg.rollout_len || env.is_done() {
                let segment = Segment { steps: std::mem::take(&mut seg), last_state: state.clone() };
                let l = learner.a2c_variant_update(&segment)?;
                acc.add([l.value, l.value], &l.policy);
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
    let policy = LearnedPolicy { algorithm: Algorithm::Haa2c, specs, actors: learner.actors.clone() };
    Ok(TrainOutcome { policy, log })
}

#[cfg(test)]
mod tests {
    use super::super::policy::HeadLayout;
    use super::*;

    fn learner() -> A2c {
        let specs = vec![AgentSpec { obs_dim: 2, layout: HeadLayout { categorical: vec![3], continuous: 2 } }; 2];
        A2c::new(specs, 3, TrainerConfig { hidden: vec![16], ..TrainerConfig::desk() }, 3).unwrap()
    }

    #[test]
    fn returns_by_hand() {
        // n = 2, γ = 0.5: G0 = 1 + 0.5·2 + 0.25·V2, G1 = 2 + 0.5·3 + 0.25·V3, G2 = 3 + 0.5·V3.
        let g = n_step_returns(&[1.0, 2.0, 3.0], &[0.0, 0.0, 8.0, 4.0], 0.5, 2);
        assert_eq!(g, vec![4.0, 4.5, 5.0]);
    }

    #[test]
    fn zero_advantage_gives_zero_gradient() {
        let l = learner();
        let obs = Array2::from_shape_fn((4, 2), |(r, c)| (r + c) as f64 * 0.3);
        let actions = vec![AgentAction { discrete: vec![1], continuous: vec![0.2, -0.1], pre_tanh: vec![0.2f64.atanh(), (-0.1f64).atanh()] }; 4];
        let (g, _, loss) = l.policy_gradient(0, &obs, &actions, &[0.0; 4]).unwrap();
        assert!(g.flat().iter().all(|&x| x == 0.0));
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn value_fits_a_constant() {
        let mut l = learner();
        let states = Array2::from_shape_fn((16, 3), |(r, c)| ((r * 3 + c) as f64 * 0.37).sin());
        let targets = vec![0.7; 16];
        for _ in 0..30_000 {
            l.fit_value(&states, &targets).unwrap();
        }
        for v in l.values(&states).unwrap() {
            assert!((v - 0.7).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn segment_update_runs_and_is_finite() {
        let mut l = learner();
        let steps: Vec<RolloutStep> = (0..6)
            .map(|t| {
                let obs = vec![vec![t as f64 * 0.1, 1.0]; 2];
                let acts: Vec<AgentAction> = l.act(&obs).unwrap().into_iter().map(|s| s.action).collect();
                RolloutStep { state: vec![t as f64, 0.0, 1.0], obs, actions: acts, reward: -(t as f64) }
            })
            .collect();
        let out = l.a2c_variant_update(&Segment { steps, last_state: vec![6.0, 0.0, 1.0] }).unwrap();
        assert!(out.value.is_finite() && out.policy.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn seeded_training_repeats() {
        let cfg = SimConfig { num_miot: 2, num_uav: 2, num_vessel: 1, horizon: 10, ..SimConfig::default() };
        let t = TrainerConfig { episodes: 2, hidden: vec![8], rollout_len: 4, ..TrainerConfig::desk() };
        let a = train_haa2c(&cfg, &t, 3, |_| {}).unwrap().log;
        let b = train_haa2c(&cfg, &t, 3, |_| {}).unwrap().log;
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
