//! Multi-agent soft actor-critic with twin centralized critics and a
//! sequential, randomly permuted policy update.
//!
//! Nothing here knows about the maritime environment: agents are described
//! by [`AgentSpec`]s and transitions carry flat state vectors.

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::buffer::{ReplayBuffer, Transition};
use super::policy::{build_actor, encode_into, sample_from_output, AgentAction, AgentSpec, SampledAction};
use super::TrainerConfig;
use crate::error::{MecError, Result};
use crate::nn::{Activation, Adam, DenseNet};

/// Where an agent's action in the critic input came from during one
/// sequential policy step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionSource {
    /// Resampled from an actor already updated in this pass.
    Resampled,
    /// The agent being updated; gradients flow through it.
    Differentiable,
    /// Taken from the replay batch.
    Buffer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicyStepTrace {
    pub agent: usize,
    pub sources: Vec<ActionSource>,
}

/// A replay batch laid out as matrices.
#[derive(Clone, Debug)]
pub struct Batch {
    pub state: Array2<f64>,
    pub obs: Vec<Array2<f64>>,
    pub actions: Vec<Vec<AgentAction>>,
    pub reward: Vec<f64>,
    pub next_state: Array2<f64>,
    pub next_obs: Vec<Array2<f64>>,
    pub terminal: Vec<bool>,
}

fn stack(rows: impl ExactSizeIterator<Item = Vec<f64>>, width: usize) -> Result<Array2<f64>> {
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * width);
    for r in rows {
        if r.len() != width {
            return Err(MecError::Dimension { what: "batch row", expected: width, got: r.len() });
        }
        flat.extend(r);
    }
    Ok(Array2::from_shape_vec((n, width), flat).expect("sizes checked"))
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition], specs: &[AgentSpec], state_dim: usize) -> Result<Self> {
        if ts.is_empty() {
            return Err(MecError::InvalidArgument("empty batch".into()));
        }
        let mut obs = Vec::with_capacity(specs.len());
        let mut next_obs = Vec::with_capacity(specs.len());
        let mut actions = Vec::with_capacity(specs.len());
        for (a, spec) in specs.iter().enumerate() {
            obs.push(stack(ts.iter().map(|t| t.obs[a].clone()), spec.obs_dim)?);
            next_obs.push(stack(ts.iter().map(|t| t.next_obs[a].clone()), spec.obs_dim)?);
            actions.push(ts.iter().map(|t| t.actions[a].clone()).collect());
        }
        Ok(Batch {
            state: stack(ts.iter().map(|t| t.state.clone()), state_dim)?,
            obs,
            actions,
            reward: ts.iter().map(|t| t.reward).collect(),
            next_state: stack(ts.iter().map(|t| t.next_state.clone()), state_dim)?,
            next_obs,
            terminal: ts.iter().map(|t| t.terminal).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateLosses {
    pub critic: [f64; 2],
    /// Indexed by agent id.
    pub policy: Vec<f64>,
}

fn ensure_finite(what: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(MecError::NonFinite { what, detail: format!("{x}") })
    }
}

/// Soft value of an action: critic estimate minus the entropy penalty.
pub fn soft_value(q: f64, log_prob: f64, alpha: f64) -> f64 {
    q - alpha * log_prob
}

#[derive(Clone, Debug)]
pub struct Sac {
    specs: Vec<AgentSpec>,
    state_dim: usize,
    cfg: TrainerConfig,
    actors: Vec<DenseNet>,
    actor_opts: Vec<Adam>,
    critics: [DenseNet; 2],
    critic_opts: [Adam; 2],
    targets: [DenseNet; 2],
    rng: ChaCha8Rng,
    trace: Option<Vec<PolicyStepTrace>>,
}

impl Sac {
    pub fn new(specs: Vec<AgentSpec>, state_dim: usize, cfg: TrainerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actors: Vec<DenseNet> = specs.iter().map(|s| build_actor(s, &cfg.hidden, cfg.activation, &mut rng)).collect();
        let critic_in = state_dim + specs.iter().map(|s| s.layout.encoding_len()).sum::<usize>();
        let mut sizes = vec![critic_in];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let c1 = DenseNet::new(&sizes, cfg.activation, Activation::Identity, &mut rng);
        let c2 = DenseNet::new(&sizes, cfg.activation, Activation::Identity, &mut rng);
        let actor_opts = actors.iter().map(|a| Adam::new(a, cfg.actor_lr)).collect();
        let critic_opts = [Adam::new(&c1, cfg.critic_lr), Adam::new(&c2, cfg.critic_lr)];
        let targets = [c1.clone(), c2.clone()];
        Ok(Sac { specs, state_dim, cfg, actors, actor_opts, critics: [c1, c2], critic_opts, targets, rng, trace: None })
    }

    pub fn specs(&self) -> &[AgentSpec] {
        &self.specs
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn actors(&self) -> &[DenseNet] {
        &self.actors
    }

    pub fn critics(&self) -> &[DenseNet; 2] {
        &self.critics
    }

    pub fn critics_mut(&mut self) -> &mut [DenseNet; 2] {
        &mut self.critics
    }

    pub fn targets(&self) -> &[DenseNet; 2] {
        &self.targets
    }

    pub fn targets_mut(&mut self) -> &mut [DenseNet; 2] {
        &mut self.targets
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.cfg.alpha = alpha;
    }

    /// Starts recording which action source each agent used in policy steps.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<PolicyStepTrace> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn critic_width(&self) -> usize {
        self.critics[0].input_dim()
    }

    fn action_offset(&self, agent: usize) -> usize {
        self.state_dim + self.specs[..agent].iter().map(|s| s.layout.encoding_len()).sum::<usize>()
    }

    /// Samples one action per agent from its own observation.
    pub fn act(&mut self, obs: &[Vec<f64>], deterministic: bool) -> Result<Vec<SampledAction>> {
        if obs.len() != self.specs.len() {
            return Err(MecError::Dimension { what: "agent observations", expected: self.specs.len(), got: obs.len() });
        }
        let mut out = Vec::with_capacity(obs.len());
        for ((o, actor), spec) in obs.iter().zip(&self.actors).zip(&self.specs) {
            let row = actor.forward_vec(o)?;
            out.push(sample_from_output(&spec.layout, &row, &mut self.rng, deterministic));
        }
        Ok(out)
    }

    /// Writes agent `agent`'s actions into its block of the critic input.
    fn write_actions(&self, x: &mut Array2<f64>, agent: usize, actions: &[AgentAction]) {
        let off = self.action_offset(agent);
        let layout = &self.specs[agent].layout;
        let w = layout.encoding_len();
        let mut buf = vec![0.0; w];
        for (b, a) in actions.iter().enumerate() {
            encode_into(layout, a, &mut buf);
            x.slice_mut(s![b, off..off + w]).assign(&ndarray::ArrayView1::from(&buf));
        }
    }

    fn critic_input(&self, state: &Array2<f64>) -> Array2<f64> {
        let mut x = Array2::zeros((state.nrows(), self.critic_width()));
        x.slice_mut(s![.., ..self.state_dim]).assign(state);
        x
    }

    /// Samples actions for a batch of observations from one actor, without gradients.
    fn resample(&mut self, agent: usize, obs: &Array2<f64>) -> Result<Vec<SampledAction>> {
        let out = self.actors[agent].predict(obs)?;
        let layout = &self.specs[agent].layout;
        Ok(out.rows().into_iter().map(|r| sample_from_output(layout, r.as_slice().expect("row-major"), &mut self.rng, false)).collect())
    }

    /// Soft Bellman targets from the target critics. The result is a plain
    /// vector; later changes to the main critics cannot reach it.
    pub fn critic_target(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let mut x = self.critic_input(&batch.next_state);
        let mut logp = vec![0.0; batch.len()];
        for agent in 0..self.specs.len() {
            let samples = self.resample(agent, &batch.next_obs[agent])?;
            for (l, s) in logp.iter_mut().zip(&samples) {
                *l += s.log_prob;
            }
            let actions: Vec<AgentAction> = samples.into_iter().map(|s| s.action).collect();
            self.write_actions(&mut x, agent, &actions);
        }
        let q1 = self.targets[0].predict(&x)?;
        let q2 = self.targets[1].predict(&x)?;
        let (gamma, alpha) = (self.cfg.gamma, self.cfg.alpha);
        let y = (0..batch.len())
            .map(|b| {
                let next = if batch.terminal[b] { 0.0 } else { soft_value(q1[[b, 0]].min(q2[[b, 0]]), logp[b], alpha) };
                batch.reward[b] + gamma * next
            })
            .collect::<Vec<_>>();
        for &v in &y {
            ensure_finite("critic target", v)?;
        }
        Ok(y)
    }

    /// One Adam step per critic on the mean squared Bellman residual.
    pub fn critic_update(&mut self, batch: &Batch, y: &[f64]) -> Result<[f64; 2]> {
        let mut x = self.critic_input(&batch.state);
        for agent in 0..self.specs.len() {
            self.write_actions(&mut x, agent, &batch.actions[agent]);
        }
        let n = batch.len() as f64;
        let mut losses = [0.0; 2];
        for i in 0..2 {
            let (q, cache) = self.critics[i].forward(&x)?;
            let resid = Array2::from_shape_fn((batch.len(), 1), |(b, _)| q[[b, 0]] - y[b]);
            let loss = resid.iter().map(|r| r * r).sum::<f64>() / n;
            losses[i] = ensure_finite("critic loss", loss)?;
            let (grads, _) = self.critics[i].backward(&cache, &(resid * (2.0 / n)))?;
            self.critic_opts[i].step(&mut self.critics[i], &grads)?;
        }
        Ok(losses)
    }

    fn twin_min(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        let q1 = self.critics[0].predict(x)?;
        let q2 = self.critics[1].predict(x)?;
        Ok(q1.iter().zip(q2.iter()).map(|(a, b)| a.min(*b)).collect())
    }

    /// Updates one agent against the current critic input `x`, whose other
    /// blocks hold the actions the agent should condition on.
    fn policy_step(&mut self, agent: usize, obs: &Array2<f64>, x: &mut Array2<f64>) -> Result<f64> {
        let spec = self.specs[agent].clone();
        let layout = &spec.layout;
        let n = obs.nrows();
        let alpha = self.cfg.alpha;
        let (out, cache) = self.actors[agent].forward(obs)?;
        let samples: Vec<SampledAction> = out
            .rows()
            .into_iter()
            .map(|r| sample_from_output(layout, r.as_slice().expect("row-major"), &mut self.rng, false))
            .collect();
        let actions: Vec<AgentAction> = samples.iter().map(|s| s.action.clone()).collect();
        self.write_actions(x, agent, &actions);

        let (q1, c1) = self.critics[0].forward(x)?;
        let (q2, c2) = self.critics[1].forward(x)?;
        let first: Vec<bool> = (0..n).map(|b| q1[[b, 0]] <= q2[[b, 0]]).collect();
        let loss = (0..n)
            .map(|b| -soft_value(q1[[b, 0]].min(q2[[b, 0]]), samples[b].log_prob, alpha))
            .sum::<f64>()
            / n as f64;
        ensure_finite("policy loss", loss)?;

        let mut grad = Array2::<f64>::zeros((n, layout.output_len()));
        let off = self.action_offset(agent);
        let l = layout.logits_len();
        let nc = layout.continuous;
        if nc > 0 {
            // dQmin/da through whichever critic is smaller on each row.
            let g1 = Array2::from_shape_fn((n, 1), |(b, _)| if first[b] { 1.0 } else { 0.0 });
            let g2 = Array2::from_shape_fn((n, 1), |(b, _)| if first[b] { 0.0 } else { 1.0 });
            let (_, gx1) = self.critics[0].backward(&c1, &g1)?;
            let (_, gx2) = self.critics[1].backward(&c2, &g2)?;
            let dq = gx1 + gx2;
            for (b, s) in samples.iter().enumerate() {
                let g = s.gaussian.as_ref().expect("continuous head present");
                for d in 0..nc {
                    let dq_da = dq[[b, off + l + d]];
                    grad[[b, l + d]] = alpha * g.dlogp_dout[d] - dq_da * g.da_dmean[d];
                    grad[[b, l + nc + d]] = alpha * g.dlogp_dout[nc + d] - dq_da * g.da_dlogstd[d];
                }
            }
        }
        // Discrete components: exact expectation over each component's
        // categories with the rest of the joint action held fixed.
        for (c, (&start, &size)) in layout.offsets().iter().zip(&layout.categorical).enumerate() {
            let col = off + start;
            let mut qk = Vec::with_capacity(size);
            let mut xk = x.clone();
            for k in 0..size {
                xk.slice_mut(s![.., col..col + size]).fill(0.0);
                xk.column_mut(col + k).fill(1.0);
                qk.push(self.twin_min(&xk)?);
            }
            for (b, s) in samples.iter().enumerate() {
                let p = &s.probs[c];
                let f: Vec<f64> = (0..size).map(|k| alpha * p[k].max(f64::MIN_POSITIVE).ln() - qk[k][b]).collect();
                let mean: f64 = p.iter().zip(&f).map(|(p, f)| p * f).sum();
                for k in 0..size {
                    grad[[b, start + k]] = p[k] * (f[k] - mean);
                }
            }
        }
        grad /= n as f64;
        let (grads, _) = self.actors[agent].backward(&cache, &grad)?;
        if !grads.is_finite() {
            return Err(MecError::NonFinite { what: "policy gradient", detail: format!("agent {agent}") });
        }
        self.actor_opts[agent].step(&mut self.actors[agent], &grads)?;
        Ok(loss)
    }

    /// Draws a random permutation and updates agents in that order; each one
    /// sees resampled actions of its already-updated predecessors and buffer
    /// actions of its successors. Returns losses indexed by agent id.
    pub fn sequential_policy_update(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let n_agents = self.specs.len();
        let mut order: Vec<usize> = (0..n_agents).collect();
        order.shuffle(&mut self.rng);
        let mut x = self.critic_input(&batch.state);
        for agent in 0..n_agents {
            self.write_actions(&mut x, agent, &batch.actions[agent]);
        }
        let mut sources = vec![ActionSource::Buffer; n_agents];
        let mut losses = vec![0.0; n_agents];
        for &agent in &order {
            sources[agent] = ActionSource::Differentiable;
            if let Some(t) = self.trace.as_mut() {
                t.push(PolicyStepTrace { agent, sources: sources.clone() });
            }
            losses[agent] = self.policy_step(agent, &batch.obs[agent], &mut x)?;
            let fresh: Vec<AgentAction> = self.resample(agent, &batch.obs[agent])?.into_iter().map(|s| s.action).collect();
            self.write_actions(&mut x, agent, &fresh);
            sources[agent] = ActionSource::Resampled;
        }
        Ok(losses)
    }

    /// `target ← ρ·target + (1 − ρ)·main` for both critics.
    pub fn polyak_update(&mut self) -> Result<()> {
        let rho = self.cfg.polyak;
        for i in 0..2 {
            self.targets[i].blend_from(&self.critics[i], rho)?;
        }
        Ok(())
    }

    /// One full update on a batch: targets, critics, sequential policies, Polyak.
    pub fn update_on(&mut self, batch: &Batch) -> Result<UpdateLosses> {
        let y = self.critic_target(batch)?;
        let critic = self.critic_update(batch, &y)?;
        let policy = self.sequential_policy_update(batch)?;
        self.polyak_update()?;
        Ok(UpdateLosses { critic, policy })
    }

    pub fn update(&mut self, buffer: &ReplayBuffer) -> Result<UpdateLosses> {
        let batch = {
            let ts = buffer.sample(self.cfg.batch_size, &mut self.rng);
            Batch::from_transitions(&ts, &self.specs, self.state_dim)?
        };
        self.update_on(&batch)
    }

    /// Twin-min Q at the batch's stored actions (diagnostics and tests).
    pub fn q_values(&self, batch: &Batch) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut x = self.critic_input(&batch.state);
        for agent in 0..self.specs.len() {
            self.write_actions(&mut x, agent, &batch.actions[agent]);
        }
        let q1 = self.critics[0].predict(&x)?.into_iter().collect();
        let q2 = self.critics[1].predict(&x)?.into_iter().collect();
        Ok((q1, q2))
    }
}

#[cfg(test)]
mod tests {
    use super::super::policy::HeadLayout;
    use super::*;
    use crate::nn::heads::softmax;

    fn tiny_cfg() -> TrainerConfig {
        TrainerConfig { hidden: vec![16], batch_size: 8, ..TrainerConfig::default() }
    }

    fn specs(n: usize) -> Vec<AgentSpec> {
        (0..n).map(|_| AgentSpec { obs_dim: 2, layout: HeadLayout { categorical: vec![2], continuous: 1 } }).collect()
    }

    fn fixture(n_agents: usize, rows: usize) -> Vec<Transition> {
        (0..rows)
            .map(|r| {
                let v = r as f64 * 0.1;
                Transition {
                    state: vec![v, -v, 0.5],
                    obs: vec![vec![v, 1.0]; n_agents],
                    actions: vec![AgentAction { discrete: vec![r % 2], continuous: vec![0.3], pre_tanh: vec![0.3f64.atanh()] }; n_agents],
                    reward: 1.0 - v,
                    next_state: vec![v + 0.1, -v, 0.5],
                    next_obs: vec![vec![v + 0.1, 1.0]; n_agents],
                    terminal: false,
                }
            })
            .collect()
    }

    fn batch(sac: &Sac, ts: &[Transition]) -> Batch {
        let refs: Vec<&Transition> = ts.iter().collect();
        Batch::from_transitions(&refs, &sac.specs, sac.state_dim).unwrap()
    }

    #[test]
    fn gamma_zero_target_is_reward() {
        let mut sac = Sac::new(specs(2), 3, TrainerConfig { gamma: 0.0, ..tiny_cfg() }, 1).unwrap();
        let b = batch(&sac, &fixture(2, 4));
        assert_eq!(sac.critic_target(&b).unwrap(), b.reward);
    }

    #[test]
    fn alpha_zero_identical_targets_give_r_plus_gamma_q() {
        let mut sac = Sac::new(specs(1), 3, TrainerConfig { alpha: 0.0, ..tiny_cfg() }, 2).unwrap();
        let t0 = sac.targets[0].clone();
        sac.targets[1] = t0.clone();
        // Zero final-layer weights make the critic return its bias for any input.
        for t in sac.targets.iter_mut() {
            let last = t.layers_mut().last_mut().unwrap();
            last.w.fill(0.0);
            last.b.fill(2.5);
        }
        let b = batch(&sac, &fixture(1, 3));
        let y = sac.critic_target(&b).unwrap();
        for (yv, r) in y.iter().zip(&b.reward) {
            assert!((yv - (r + 0.99 * 2.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn targets_start_as_copies() {
        let sac = Sac::new(specs(2), 3, tiny_cfg(), 3).unwrap();
        for i in 0..2 {
            assert_eq!(sac.targets[i].params_flat(), sac.critics[i].params_flat());
        }
    }

    #[test]
    fn target_y_is_independent_of_later_critic_changes() {
        let mut sac = Sac::new(specs(2), 3, tiny_cfg(), 4).unwrap();
        let b = batch(&sac, &fixture(2, 6));
        let y = sac.critic_target(&b).unwrap();
        let snapshot = y.clone();
        for c in sac.critics.iter_mut() {
            for l in c.layers_mut() {
                l.w.mapv_inplace(|w| w + 1.0);
            }
        }
        sac.critic_update(&b, &y).unwrap();
        assert_eq!(y, snapshot);
    }

    #[test]
    fn single_sample_loss_is_squared_residual() {
        let mut sac = Sac::new(specs(1), 3, tiny_cfg(), 5).unwrap();
        let b = batch(&sac, &fixture(1, 1));
        let (q1, q2) = sac.q_values(&b).unwrap();
        let losses = sac.critic_update(&b, &[0.7]).unwrap();
        assert!((losses[0] - (0.7 - q1[0]).powi(2)).abs() < 1e-12);
        assert!((losses[1] - (0.7 - q2[0]).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn exact_targets_leave_critics_unchanged() {
        let mut sac = Sac::new(specs(1), 3, tiny_cfg(), 6).unwrap();
        let b = batch(&sac, &fixture(1, 4));
        // Both critics must already predict y, so make them identical first.
        sac.critics[1] = sac.critics[0].clone();
        sac.critic_opts[1] = Adam::new(&sac.critics[1], sac.cfg.critic_lr);
        let (q1, _) = sac.q_values(&b).unwrap();
        let before = sac.critics[0].params_flat();
        sac.critic_update(&b, &q1).unwrap();
        assert_eq!(sac.critics[0].params_flat(), before);
    }

    #[test]
    fn critic_loss_decreases_on_frozen_batch() {
        let mut sac = Sac::new(specs(2), 3, tiny_cfg(), 7).unwrap();
        let b = batch(&sac, &fixture(2, 8));
        let y: Vec<f64> = (0..8).map(|r| (r as f64).sin()).collect();
        let first = sac.critic_update(&b, &y).unwrap();
        let mut last = first;
        for _ in 0..100 {
            last = sac.critic_update(&b, &y).unwrap();
        }
        assert!(last[0] < first[0] && last[1] < first[1]);
    }

    #[test]
    fn polyak_fixtures() {
        let mut sac = Sac::new(specs(1), 3, TrainerConfig { polyak: 0.9, ..tiny_cfg() }, 8).unwrap();
        for l in sac.targets[0].layers_mut() {
            l.w.fill(1.0);
            l.b.fill(1.0);
        }
        for l in sac.critics[0].layers_mut() {
            l.w.fill(0.0);
            l.b.fill(0.0);
        }
        sac.polyak_update().unwrap();
        assert!(sac.targets[0].params_flat().iter().all(|&p| (p - 0.9).abs() < 1e-15));

        let mut frozen = Sac::new(specs(1), 3, TrainerConfig { polyak: 1.0 - 1e-12, ..tiny_cfg() }, 9).unwrap();
        frozen.cfg.polyak = 1.0;
        for l in frozen.critics[0].layers_mut() {
            l.w.fill(5.0);
        }
        let before = frozen.targets[0].params_flat();
        frozen.polyak_update().unwrap();
        assert_eq!(frozen.targets[0].params_flat(), before);
    }

    #[test]
    fn polyak_error_decays_geometrically() {
        let rho: f64 = 0.95;
        let mut sac = Sac::new(specs(1), 3, TrainerConfig { polyak: rho, ..tiny_cfg() }, 10).unwrap();
        let main = sac.critics[0].params_flat();
        let err = |s: &Sac| -> f64 {
            s.targets[0].params_flat().iter().zip(&main).map(|(t, m)| (t - m).abs()).fold(0.0, f64::max)
        };
        for l in sac.targets[0].layers_mut() {
            l.w.mapv_inplace(|w| w + 1.0);
            l.b.mapv_inplace(|b| b + 1.0);
        }
        let e0 = err(&sac);
        let half_life = (0.5f64).ln() / rho.ln();
        let steps = 200;
        for _ in 0..steps {
            sac.polyak_update().unwrap();
        }
        let expected = e0 * 0.5f64.powf(steps as f64 / half_life);
        assert!((err(&sac) - expected).abs() < 1e-9 * e0.max(1.0));
    }

    #[test]
    fn twin_min_never_exceeds_either_critic() {
        let sac = Sac::new(specs(2), 3, tiny_cfg(), 11).unwrap();
        let b = batch(&sac, &fixture(2, 8));
        let mut x = sac.critic_input(&b.state);
        for a in 0..2 {
            sac.write_actions(&mut x, a, &b.actions[a]);
        }
        let (q1, q2) = sac.q_values(&b).unwrap();
        for (m, (a, c)) in sac.twin_min(&x).unwrap().iter().zip(q1.iter().zip(&q2)) {
            assert!(m <= a && m <= c);
        }
    }

    #[test]
    fn predecessors_are_resampled_and_successors_come_from_buffer() {
        let mut sac = Sac::new(specs(3), 3, tiny_cfg(), 12).unwrap();
        sac.enable_trace();
        let b = batch(&sac, &fixture(3, 4));
        sac.sequential_policy_update(&b).unwrap();
        let trace = sac.take_trace();
        assert_eq!(trace.len(), 3);
        let mut seen = Vec::new();
        for step in &trace {
            for (a, src) in step.sources.iter().enumerate() {
                let expected = if a == step.agent {
                    ActionSource::Differentiable
                } else if seen.contains(&a) {
                    ActionSource::Resampled
                } else {
                    ActionSource::Buffer
                };
                assert_eq!(*src, expected);
            }
            seen.push(step.agent);
        }
        let mut order: Vec<usize> = trace.iter().map(|t| t.agent).collect();
        order.sort_unstable();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn seeded_permutations_repeat() {
        let orders = |seed| {
            let mut sac = Sac::new(specs(4), 3, tiny_cfg(), seed).unwrap();
            sac.enable_trace();
            let b = batch(&sac, &fixture(4, 4));
            for _ in 0..5 {
                sac.sequential_policy_update(&b).unwrap();
            }
            sac.take_trace().into_iter().map(|t| t.agent).collect::<Vec<_>>()
        };
        assert_eq!(orders(13), orders(13));
    }

    #[test]
    fn larger_alpha_weighs_entropy_more() {
        // ∂/∂α of the soft value is −log π: increasing α raises the reward
        // for low-probability actions and lowers it for likely ones.
        for lp in [-3.0, -0.5, 0.7] {
            let d = soft_value(1.0, lp, 0.2) - soft_value(1.0, lp, 0.1);
            assert!((d - (-lp) * 0.1).abs() < 1e-15);
        }
    }

    /// Cooperative one-shot matrix game. The soft-optimal product policy
    /// maximizes E[r] + α(H₁ + H₂); find it by grid search and check that
    /// training reaches it.
    #[test]
    fn matrix_game_converges_to_soft_optimum() {
        let payoff = [[1.0, -0.5], [-0.5, 0.4]];
        let alpha = 0.3;
        let objective = |p: f64, q: f64| {
            let h = |x: f64| -(x * x.max(1e-300).ln() + (1.0 - x) * (1.0 - x).max(1e-300).ln());
            let er = p * q * payoff[0][0] + p * (1.0 - q) * payoff[0][1] + (1.0 - p) * q * payoff[1][0] + (1.0 - p) * (1.0 - q) * payoff[1][1];
            er + alpha * (h(p) + h(q))
        };
        let grid = 1000;
        let (mut best, mut bp, mut bq) = (f64::NEG_INFINITY, 0.0, 0.0);
        for a in 0..=grid {
            for b in 0..=grid {
                let (p, q) = (a as f64 / grid as f64, b as f64 / grid as f64);
                let v = objective(p, q);
                if v > best {
                    (best, bp, bq) = (v, p, q);
                }
            }
        }

        let specs = vec![AgentSpec { obs_dim: 1, layout: HeadLayout { categorical: vec![2], continuous: 0 } }; 2];
        let cfg = TrainerConfig {
            hidden: vec![16],
            batch_size: 64,
            alpha,
            gamma: 0.0,
            actor_lr: 3e-3,
            critic_lr: 3e-3,
            ..TrainerConfig::default()
        };
        let mut sac = Sac::new(specs, 1, cfg, 14).unwrap();
        let mut buffer = ReplayBuffer::new(2000);
        for _ in 0..5000 {
            let acts = sac.act(&[vec![1.0], vec![1.0]], false).unwrap();
            let (i, j) = (acts[0].action.discrete[0], acts[1].action.discrete[0]);
            buffer.store(Transition {
                state: vec![1.0],
                obs: vec![vec![1.0]; 2],
                actions: acts.into_iter().map(|s| s.action).collect(),
                reward: payoff[i][j],
                next_state: vec![1.0],
                next_obs: vec![vec![1.0]; 2],
                terminal: true,
            });
            if buffer.len() >= 64 {
                sac.update(&buffer).unwrap();
            }
        }
        let p0 = softmax(&sac.actors[0].forward_vec(&[1.0]).unwrap())[0];
        let p1 = softmax(&sac.actors[1].forward_vec(&[1.0]).unwrap())[0];
        assert!((p0 - bp).abs() < 0.05 && (p1 - bq).abs() < 0.05, "learned ({p0}, {p1}) vs optimum ({bp}, {bq})");
    }
}
