//! Partially observable Markov game over the simulator: one agent per UAV
//! (ids `0..J`) and one per vessel (ids `J..J+K`), with a shared reward.

use serde::{Deserialize, Serialize};

use crate::channel::{in_range, potential_m2u_rates, LinkRateTable};
use crate::error::{MecError, Result};
use crate::lyapunov::{constant_d, per_slot_objective, DriftReport, RateCaps};
use crate::queueing::{validate_action, JointAction, Network, QueueState, Residency, SlotLedger};
use crate::scenario::{advance_positions, generate_topology, sample_arrivals, Mobility, NodeSet, SeedStreams, SimConfig, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKind {
    Uav(usize),
    Vessel(usize),
}

pub fn agent_kind(cfg: &SimConfig, id: usize) -> Result<AgentKind> {
    if id < cfg.num_uav {
        Ok(AgentKind::Uav(id))
    } else if id < cfg.num_uav + cfg.num_vessel {
        Ok(AgentKind::Vessel(id - cfg.num_uav))
    } else {
        Err(MecError::UnknownAgent(id))
    }
}

/// Shape of one agent's raw action: `mask_bits` independent yes/no choices,
/// one categorical per entry of `choice_sizes`, and `continuous` real logits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub mask_bits: usize,
    pub choice_sizes: Vec<usize>,
    pub continuous: usize,
}

impl ActionSpace {
    /// All discrete components as categorical sizes, mask bits first.
    pub fn categorical_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![2; self.mask_bits];
        sizes.extend(&self.choice_sizes);
        sizes
    }
}

/// UAV agents choose which MIoTs to offer service to, a vessel (0 = none,
/// k+1 = vessel k) and allocation logits per MIoT. Vessel agents choose which
/// UAVs to admit and allocation logits per UAV.
pub fn action_space(cfg: &SimConfig, id: usize) -> Result<ActionSpace> {
    Ok(match agent_kind(cfg, id)? {
        AgentKind::Uav(_) => ActionSpace {
            mask_bits: cfg.num_miot,
            choice_sizes: vec![cfg.num_vessel + 1],
            continuous: cfg.num_miot,
        },
        AgentKind::Vessel(_) => ActionSpace { mask_bits: cfg.num_uav, choice_sizes: vec![], continuous: cfg.num_uav },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavAction {
    pub offer: Vec<bool>,
    pub vessel: usize,
    pub alloc_logits: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VesselAction {
    pub admit: Vec<bool>,
    pub alloc_logits: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawJointAction {
    pub uav: Vec<UavAction>,
    pub vessel: Vec<VesselAction>,
}

impl RawJointAction {
    /// Every agent declines everything.
    pub fn none(cfg: &SimConfig) -> Self {
        RawJointAction {
            uav: vec![
                UavAction { offer: vec![false; cfg.num_miot], vessel: 0, alloc_logits: vec![0.0; cfg.num_miot] };
                cfg.num_uav
            ],
            vessel: vec![
                VesselAction { admit: vec![false; cfg.num_uav], alloc_logits: vec![0.0; cfg.num_uav] };
                cfg.num_vessel
            ],
        }
    }

    /// Builds agent actions from generic (discrete, continuous) components laid
    /// out as in [`action_space`].
    pub fn from_components(cfg: &SimConfig, parts: &[(Vec<usize>, Vec<f64>)]) -> Result<Self> {
        let n = cfg.num_uav + cfg.num_vessel;
        if parts.len() != n {
            return Err(MecError::Dimension { what: "agent actions", expected: n, got: parts.len() });
        }
        let mut raw = RawJointAction::none(cfg);
        for (id, (disc, cont)) in parts.iter().enumerate() {
            let space = action_space(cfg, id)?;
            let nd = space.mask_bits + space.choice_sizes.len();
            if disc.len() != nd {
                return Err(MecError::Dimension { what: "discrete action", expected: nd, got: disc.len() });
            }
            if cont.len() != space.continuous {
                return Err(MecError::Dimension { what: "continuous action", expected: space.continuous, got: cont.len() });
            }
            match agent_kind(cfg, id)? {
                AgentKind::Uav(j) => {
                    raw.uav[j] = UavAction {
                        offer: disc[..cfg.num_miot].iter().map(|&b| b == 1).collect(),
                        vessel: disc[cfg.num_miot],
                        alloc_logits: cont.clone(),
                    }
                }
                AgentKind::Vessel(k) => {
                    raw.vessel[k] = VesselAction { admit: disc.iter().map(|&b| b == 1).collect(), alloc_logits: cont.clone() }
                }
            }
        }
        Ok(raw)
    }

    fn check(&self, cfg: &SimConfig) -> Result<()> {
        if self.uav.len() != cfg.num_uav {
            return Err(MecError::Dimension { what: "UAV actions", expected: cfg.num_uav, got: self.uav.len() });
        }
        if self.vessel.len() != cfg.num_vessel {
            return Err(MecError::Dimension { what: "vessel actions", expected: cfg.num_vessel, got: self.vessel.len() });
        }
        for u in &self.uav {
            if u.offer.len() != cfg.num_miot || u.alloc_logits.len() != cfg.num_miot {
                return Err(MecError::Dimension { what: "UAV action", expected: cfg.num_miot, got: u.offer.len() });
            }
            if u.vessel > cfg.num_vessel {
                return Err(MecError::InvalidArgument(format!("vessel choice {} out of range", u.vessel)));
            }
        }
        for v in &self.vessel {
            if v.admit.len() != cfg.num_uav || v.alloc_logits.len() != cfg.num_uav {
                return Err(MecError::Dimension { what: "vessel action", expected: cfg.num_uav, got: v.admit.len() });
            }
        }
        Ok(())
    }
}

/// Full environment state: positions, backlogs and the tasks of the current slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub nodes: NodeSet,
    pub queues: QueueState,
    pub tasks: Vec<Task>,
}

/// Feature scaling shared by observations and the critic's state vector.
fn pos_features(out: &mut Vec<f64>, nodes: &[crate::scenario::Position], side: f64) {
    for p in nodes {
        out.push(p.x / side);
        out.push(p.y / side);
    }
}

fn backlog_features(out: &mut Vec<f64>, q: &[u64], unit: f64) {
    out.extend(q.iter().map(|&b| (b as f64 / unit).ln_1p()));
}

/// UAV observation: MIoT and UAV planar positions, then MIoT and UAV backlogs.
/// Length `2(I+J) + (I+J)`.
pub fn uav_observation(state: &EnvState, cfg: &SimConfig) -> Vec<f64> {
    let mut o = Vec::with_capacity(3 * (cfg.num_miot + cfg.num_uav));
    pos_features(&mut o, &state.nodes.miot, cfg.area_side);
    pos_features(&mut o, &state.nodes.uav, cfg.area_side);
    backlog_features(&mut o, &state.queues.miot, cfg.data_unit_bits);
    backlog_features(&mut o, &state.queues.uav, cfg.data_unit_bits);
    o
}

/// Vessel observation: UAV and vessel planar positions, then their backlogs.
pub fn vessel_observation(state: &EnvState, cfg: &SimConfig) -> Vec<f64> {
    let mut o = Vec::with_capacity(3 * (cfg.num_uav + cfg.num_vessel));
    pos_features(&mut o, &state.nodes.uav, cfg.area_side);
    pos_features(&mut o, &state.nodes.vessel, cfg.area_side);
    backlog_features(&mut o, &state.queues.uav, cfg.data_unit_bits);
    backlog_features(&mut o, &state.queues.vessel, cfg.data_unit_bits);
    o
}

/// Per-agent observations, indexed by agent id.
pub fn observe(state: &EnvState, cfg: &SimConfig) -> Vec<Vec<f64>> {
    let u = uav_observation(state, cfg);
    let v = vessel_observation(state, cfg);
    let mut out = vec![u; cfg.num_uav];
    out.extend(std::iter::repeat_n(v, cfg.num_vessel));
    out
}

/// Flattened global state for centralized critics: every position, every
/// backlog and the current task sizes.
pub fn state_vector(state: &EnvState, cfg: &SimConfig) -> Vec<f64> {
    let mut s = Vec::new();
    pos_features(&mut s, &state.nodes.miot, cfg.area_side);
    pos_features(&mut s, &state.nodes.uav, cfg.area_side);
    pos_features(&mut s, &state.nodes.vessel, cfg.area_side);
    backlog_features(&mut s, &state.queues.miot, cfg.data_unit_bits);
    backlog_features(&mut s, &state.queues.uav, cfg.data_unit_bits);
    backlog_features(&mut s, &state.queues.vessel, cfg.data_unit_bits);
    let sizes: Vec<u64> = state.tasks.iter().map(|t| t.data_bits).collect();
    backlog_features(&mut s, &sizes, cfg.data_unit_bits);
    s
}

pub fn state_dim(cfg: &SimConfig) -> usize {
    3 * (cfg.num_miot + cfg.num_uav + cfg.num_vessel) + cfg.num_miot
}

pub fn observation_dim(cfg: &SimConfig, id: usize) -> Result<usize> {
    Ok(match agent_kind(cfg, id)? {
        AgentKind::Uav(_) => 3 * (cfg.num_miot + cfg.num_uav),
        AgentKind::Vessel(_) => 3 * (cfg.num_uav + cfg.num_vessel),
    })
}

fn softmax_split(logits: &[f64], eligible: &[usize], capacity: f64) -> Vec<(usize, f64)> {
    if eligible.is_empty() {
        return Vec::new();
    }
    let m = eligible.iter().map(|&i| logits[i]).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eligible.iter().map(|&i| (logits[i] - m).exp()).collect();
    let z: f64 = w.iter().sum();
    eligible.iter().zip(w).map(|(&i, wi)| (i, capacity * wi / z)).collect()
}

/// Maps raw agent actions to a feasible joint action.
///
/// A MIoT accepts the offering in-range UAV with the best uplink rate. A vessel
/// admits UAVs that both chose and were admitted by it, keeping at most its
/// antenna count by descending UAV backlog. CPU is split by softmax over the
/// eligible origins, using the full capacity.
pub fn project_action(
    raw: &RawJointAction,
    cfg: &SimConfig,
    nodes: &NodeSet,
    queues: &QueueState,
    residency: &Residency,
) -> Result<JointAction> {
    raw.check(cfg)?;
    let rates = potential_m2u_rates(nodes, cfg)?;
    let mut a = JointAction::idle_for(cfg);
    for i in 0..cfg.num_miot {
        let mut best: Option<usize> = None;
        for j in 0..cfg.num_uav {
            if raw.uav[j].offer[i] && in_range(&nodes.miot[i], &nodes.uav[j], cfg) && best.is_none_or(|b| rates[i][j] > rates[i][b]) {
                best = Some(j);
            }
        }
        if let Some(j) = best {
            a.offload_o[i][j] = true;
        }
    }
    for k in 0..cfg.num_vessel {
        let mut cands: Vec<usize> =
            (0..cfg.num_uav).filter(|&j| raw.uav[j].vessel == k + 1 && raw.vessel[k].admit[j]).collect();
        cands.sort_by(|&x, &y| queues.uav[y].cmp(&queues.uav[x]).then(x.cmp(&y)));
        for &j in cands.iter().take(cfg.antennas()) {
            a.offload_s[j][k] = true;
        }
    }
    for j in 0..cfg.num_uav {
        let elig: Vec<usize> = (0..cfg.num_miot).filter(|&i| residency.uav_eligible(&a, j, i)).collect();
        for (i, f) in softmax_split(&raw.uav[j].alloc_logits, &elig, cfg.uav_cpu) {
            a.alloc_u[i][j] = f;
        }
    }
    for k in 0..cfg.num_vessel {
        let elig: Vec<usize> = (0..cfg.num_uav).filter(|&j| residency.vessel_eligible(&a, k, j)).collect();
        for (j, f) in softmax_split(&raw.vessel[k].alloc_logits, &elig, cfg.vessel_cpu) {
            a.alloc_v[j][k] = f;
        }
    }
    Ok(a)
}

#[derive(Clone, Debug)]
pub struct StepInfo {
    pub action: JointAction,
    pub rates: LinkRateTable,
    pub ledger: SlotLedger,
    pub drift: DriftReport,
    /// Drift-plus-penalty objective C of the slot.
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub observations: Vec<Vec<f64>>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One JSON line of the trajectory dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub slot: usize,
    pub reward: f64,
    pub phi: f64,
    pub objective: f64,
    pub arrived_bits: u64,
    pub miot_bits: u64,
    pub uav_bits: u64,
    pub vessel_bits: u64,
    pub backlog_bits: u64,
}

impl TrajectoryRecord {
    pub fn from_step(out: &StepOutcome, backlog_bits: u64) -> Self {
        let l = &out.info.ledger;
        TrajectoryRecord {
            slot: l.slot,
            reward: out.reward,
            phi: l.phi,
            objective: out.info.objective,
            arrived_bits: l.arrived_bits,
            miot_bits: l.processed.miot,
            uav_bits: l.processed.uav,
            vessel_bits: l.processed.vessel,
            backlog_bits,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trajectory record serialises")
    }
}

pub fn parse_trajectory_line(line: &str) -> Result<TrajectoryRecord> {
    Ok(serde_json::from_str(line.trim_end())?)
}

/// The environment. Owns topology, mobility, task arrivals and the network.
#[derive(Clone, Debug)]
pub struct MecEnv {
    cfg: SimConfig,
    streams: SeedStreams,
    nodes: NodeSet,
    mobility: Mobility,
    network: Network,
    tasks: Vec<Task>,
    slot: usize,
    done: bool,
    d_const: f64,
    reward_norm: f64,
}

impl MecEnv {
    /// Fresh episode: zero backlogs, new topology from `seed`, slot 0.
    pub fn reset(cfg: &SimConfig, seed: u64) -> Result<(Self, Vec<Vec<f64>>)> {
        cfg.validate()?;
        let streams = SeedStreams::new(seed);
        let nodes = generate_topology(cfg, &streams);
        let mobility = Mobility::new(cfg, &streams);
        let caps = RateCaps::from_config(cfg)?;
        let env = MecEnv {
            cfg: cfg.clone(),
            streams,
            nodes,
            mobility,
            network: Network::new(cfg),
            tasks: sample_arrivals(cfg, 0, &streams),
            slot: 0,
            done: false,
            d_const: constant_d(cfg, &caps),
            reward_norm: cfg.reward_norm(),
        };
        let obs = observe(&env.state(), cfg);
        Ok((env, obs))
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn residency(&self) -> &Residency {
        self.network.residency()
    }

    pub fn queues(&self) -> QueueState {
        self.network.queues()
    }

    pub fn constant_d(&self) -> f64 {
        self.d_const
    }

    pub fn reward_norm(&self) -> f64 {
        self.reward_norm
    }

    pub fn num_agents(&self) -> usize {
        self.cfg.num_uav + self.cfg.num_vessel
    }

    pub fn state(&self) -> EnvState {
        EnvState { nodes: self.nodes.clone(), queues: self.network.queues(), tasks: self.tasks.clone() }
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        observe(&self.state(), &self.cfg)
    }

    pub fn action_space(&self, id: usize) -> Result<ActionSpace> {
        action_space(&self.cfg, id)
    }

    pub fn project(&self, raw: &RawJointAction) -> Result<JointAction> {
        project_action(raw, &self.cfg, &self.nodes, &self.network.queues(), self.network.residency())
    }

    /// Projects raw agent actions and advances one slot.
    pub fn step(&mut self, raw: &RawJointAction) -> Result<StepOutcome> {
        if self.done {
            return Err(MecError::StepAfterDone);
        }
        let a = self.project(raw)?;
        self.step_joint(a)
    }

    /// Advances one slot under an explicit joint action, which must be feasible.
    pub fn step_joint(&mut self, a: JointAction) -> Result<StepOutcome> {
        if self.done {
            return Err(MecError::StepAfterDone);
        }
        let violations = validate_action(&a, &self.cfg, Some(self.network.residency()))?;
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(MecError::Infeasible(list.join("; ")));
        }
        let rates = LinkRateTable::compute(&self.nodes, &a.offload_o, &a.offload_s, &self.cfg)?;
        let q_t = self.network.queues();
        let ledger = self.network.step(&self.tasks, &a, &rates)?;
        let objective = per_slot_objective(&q_t, &a, &rates, ledger.phi, self.cfg.lyapunov_v, &self.cfg)?;
        let q_next = self.network.queues();
        let drift = DriftReport::new(&q_t, &q_next, &ledger, objective, self.cfg.lyapunov_v, self.d_const);
        let reward = -objective / self.reward_norm;
        if !reward.is_finite() {
            return Err(MecError::NonFinite { what: "reward", detail: format!("objective {objective}") });
        }

        self.nodes = advance_positions(&self.nodes, &self.cfg, &mut self.mobility);
        self.slot += 1;
        self.done = self.slot >= self.cfg.horizon;
        self.tasks = if self.done {
            (0..self.cfg.num_miot)
                .map(|i| Task { origin_miot: i, arrival_slot: self.slot, data_bits: 0, cycles_per_bit: self.cfg.cycles_per_bit })
                .collect()
        } else {
            sample_arrivals(&self.cfg, self.slot, &self.streams)
        };
        Ok(StepOutcome {
            observations: self.observations(),
            reward,
            done: self.done,
            info: StepInfo { action: a, rates, ledger, drift, objective },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig { horizon: 5, ..SimConfig::default() }
    }

    #[test]
    fn reset_zeroes_queues_and_is_seeded() {
        let (env, obs) = MecEnv::reset(&small(), 3).unwrap();
        assert_eq!(env.queues().total_bits(), 0);
        let (_, again) = MecEnv::reset(&small(), 3).unwrap();
        assert_eq!(obs, again);
    }

    #[test]
    fn observation_lengths() {
        let cfg = small();
        let (env, obs) = MecEnv::reset(&cfg, 0).unwrap();
        assert_eq!(obs.len(), 3);
        assert_eq!(obs[0].len(), 2 * (3 + 2) + (3 + 2));
        assert_eq!(obs[2].len(), 2 * (2 + 1) + (2 + 1));
        for id in 0..3 {
            assert_eq!(obs[id].len(), observation_dim(&cfg, id).unwrap());
        }
        assert_eq!(state_vector(&env.state(), &cfg).len(), state_dim(&cfg));
    }

    #[test]
    fn action_space_fixtures() {
        let cfg = SimConfig { num_vessel: 2, ..SimConfig::default() };
        let uav = action_space(&cfg, 0).unwrap();
        assert_eq!(uav, ActionSpace { mask_bits: 3, choice_sizes: vec![3], continuous: 3 });
        let vessel = action_space(&cfg, 2).unwrap();
        assert_eq!(vessel, ActionSpace { mask_bits: 2, choice_sizes: vec![], continuous: 2 });
        assert!(matches!(action_space(&cfg, 4), Err(MecError::UnknownAgent(4))));
    }

    #[test]
    fn all_none_projects_to_idle() {
        let cfg = small();
        let (env, _) = MecEnv::reset(&cfg, 0).unwrap();
        let a = env.project(&RawJointAction::none(&cfg)).unwrap();
        assert_eq!(a, JointAction::idle_for(&cfg));
    }

    #[test]
    fn competing_offers_pick_one_uav() {
        let cfg = small();
        let (env, _) = MecEnv::reset(&cfg, 0).unwrap();
        let mut raw = RawJointAction::none(&cfg);
        raw.uav[0].offer[1] = true;
        raw.uav[1].offer[1] = true;
        let a = env.project(&raw).unwrap();
        assert_eq!(a.offload_o[1].iter().filter(|&&o| o).count(), 1);
        let rates = potential_m2u_rates(env.nodes(), &cfg).unwrap();
        let j = a.target_uav(1).unwrap();
        assert!(rates[1][j] >= rates[1][1 - j]);
        // CPU of the accepted UAV goes to MIoT 1 in full.
        assert!((a.alloc_u[1][j] - cfg.uav_cpu).abs() < 1e-3);
    }

    #[test]
    fn antenna_limit_keeps_largest_backlogs() {
        let cfg = SimConfig { num_uav: 3, antenna_limit: Some(2), ..small() };
        let (env, _) = MecEnv::reset(&cfg, 0).unwrap();
        let mut raw = RawJointAction::none(&cfg);
        for j in 0..3 {
            raw.uav[j].vessel = 1;
            raw.vessel[0].admit[j] = true;
        }
        let q = QueueState { miot: vec![0; 3], uav: vec![5, 9, 5], vessel: vec![0], slot: 0 };
        let a = project_action(&raw, &cfg, env.nodes(), &q, env.residency()).unwrap();
        assert_eq!(a.offload_s, vec![vec![true], vec![true], vec![false]]);
        let q = QueueState { uav: vec![0, 0, 0], ..q };
        let a = project_action(&raw, &cfg, env.nodes(), &q, env.residency()).unwrap();
        assert_eq!(a.offload_s, vec![vec![true], vec![true], vec![false]]);
        let q = QueueState { uav: vec![1, 0, 2], ..q };
        let a = project_action(&raw, &cfg, env.nodes(), &q, env.residency()).unwrap();
        assert_eq!(a.offload_s, vec![vec![true], vec![false], vec![true]]);
    }

    #[test]
    fn idle_step_with_no_arrivals_is_neutral() {
        let cfg = SimConfig { arrival_mean: 0.0, ..small() };
        let (mut env, _) = MecEnv::reset(&cfg, 1).unwrap();
        let out = env.step(&RawJointAction::none(&cfg)).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(env.queues().total_bits(), 0);
    }

    #[test]
    fn done_on_last_step_then_error() {
        let cfg = small();
        let (mut env, _) = MecEnv::reset(&cfg, 1).unwrap();
        for t in 0..5 {
            let out = env.step(&RawJointAction::none(&cfg)).unwrap();
            assert_eq!(out.done, t == 4);
        }
        assert!(matches!(env.step(&RawJointAction::none(&cfg)), Err(MecError::StepAfterDone)));
    }

    #[test]
    fn observations_ignore_unobserved_fields() {
        let cfg = small();
        let (env, _) = MecEnv::reset(&cfg, 2).unwrap();
        let mut s = env.state();
        let base = observe(&s, &cfg);
        s.nodes.vessel[0].x += 17.0;
        s.queues.vessel[0] = 99;
        assert_eq!(uav_observation(&s, &cfg), base[0]);
        let mut s = env.state();
        s.nodes.miot[0].y += 3.0;
        s.queues.miot[2] = 1234;
        assert_eq!(vessel_observation(&s, &cfg), base[2]);
    }

    #[test]
    fn trajectory_line_round_trip() {
        let r = TrajectoryRecord {
            slot: 3,
            reward: -0.25,
            phi: 1.5,
            objective: 1e12,
            arrived_bits: 10,
            miot_bits: 1,
            uav_bits: 2,
            vessel_bits: 3,
            backlog_bits: 4,
        };
        assert_eq!(parse_trajectory_line(&r.to_json_line()).unwrap(), r);
        assert!(parse_trajectory_line("{").is_err());
    }
}
