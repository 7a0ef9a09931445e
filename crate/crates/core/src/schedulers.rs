//! Non-learning baselines and an exhaustive oracle for tiny instances.
//!
//! Every scheduler builds a [`Decision`]: where each MIoT sends its queue this
//! slot, which vessel (if any) each UAV relays to, and what fraction of each
//! node's CPU is switched on. [`Decision::materialize`] turns it into a
//! feasible [`JointAction`] by splitting the switched-on CPU equally among the
//! origins the node may serve.
//!
//! A UAV that relays forwards what it does not compute itself, so placing a
//! task "on a vessel" means routing it through a UAV in relay mode. Each UAV
//! has one mode per slot, fixed by the first task routed through it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{in_range, m2u_rate, path_loss_db, u2v_gain, u2v_rate, LinkRateTable};
use crate::env::MecEnv;
use crate::error::{MecError, Result};
use crate::lyapunov::per_slot_objective;
use crate::queueing::{task_delays, slot_cost_phi, JointAction, QueueState, Residency};
use crate::scenario::{NodeSet, SimConfig, Task};

/// CPU levels the oracle enumerates per node.
pub const DEFAULT_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Largest instance the oracle accepts.
pub const ORACLE_MAX: (usize, usize, usize) = (3, 2, 1);

/// Everything a scheduler may look at in one slot.
#[derive(Clone, Copy, Debug)]
pub struct View<'a> {
    pub cfg: &'a SimConfig,
    pub nodes: &'a NodeSet,
    pub queues: &'a QueueState,
    pub residency: &'a Residency,
    pub tasks: &'a [Task],
}

/// Owned snapshot of an environment, borrowed as a [`View`].
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub cfg: SimConfig,
    pub nodes: NodeSet,
    pub queues: QueueState,
    pub residency: Residency,
    pub tasks: Vec<Task>,
}

impl Snapshot {
    pub fn of(env: &MecEnv) -> Self {
        Snapshot {
            cfg: env.config().clone(),
            nodes: env.nodes().clone(),
            queues: env.queues(),
            residency: env.residency().clone(),
            tasks: env.tasks().to_vec(),
        }
    }

    pub fn view(&self) -> View<'_> {
        View { cfg: &self.cfg, nodes: &self.nodes, queues: &self.queues, residency: &self.residency, tasks: &self.tasks }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// UAV each MIoT uploads to; `None` processes locally.
    pub target: Vec<Option<usize>>,
    /// Vessel each UAV relays to.
    pub relay: Vec<Option<usize>>,
    /// Fraction of each UAV's CPU in use.
    pub uav_level: Vec<f64>,
    pub vessel_level: Vec<f64>,
}

impl Decision {
    /// Everything local, no relays, full CPU.
    pub fn new(cfg: &SimConfig) -> Self {
        Decision {
            target: vec![None; cfg.num_miot],
            relay: vec![None; cfg.num_uav],
            uav_level: vec![1.0; cfg.num_uav],
            vessel_level: vec![1.0; cfg.num_vessel],
        }
    }

    pub fn materialize(&self, cfg: &SimConfig, residency: &Residency) -> JointAction {
        let mut a = JointAction::idle_for(cfg);
        for (i, t) in self.target.iter().enumerate() {
            if let Some(j) = *t {
                a.offload_o[i][j] = true;
            }
        }
        for (j, r) in self.relay.iter().enumerate() {
            if let Some(k) = *r {
                a.offload_s[j][k] = true;
            }
        }
        for j in 0..cfg.num_uav {
            let elig: Vec<usize> = (0..cfg.num_miot).filter(|&i| residency.uav_eligible(&a, j, i)).collect();
            let share = self.uav_level[j] * cfg.uav_cpu / elig.len().max(1) as f64;
            for i in elig {
                a.alloc_u[i][j] = share;
            }
        }
        for k in 0..cfg.num_vessel {
            let elig: Vec<usize> = (0..cfg.num_uav).filter(|&j| residency.vessel_eligible(&a, k, j)).collect();
            let share = self.vessel_level[k] * cfg.vessel_cpu / elig.len().max(1) as f64;
            for j in elig {
                a.alloc_v[j][k] = share;
            }
        }
        a
    }
}

/// Where one task goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    Local,
    Uav(usize),
    Vessel { uav: usize, vessel: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Free,
    Compute,
    Relay(usize),
}

/// Running state of a slot plan: UAV modes, relays in use and the bits
/// already routed to each node this slot.
#[derive(Clone, Debug)]
struct Plan<'a> {
    view: View<'a>,
    m2u: Vec<Vec<f64>>,
    gain: Vec<Vec<f64>>,
    mode: Vec<Mode>,
    relays: Vec<usize>,
    uav_bits: Vec<f64>,
    vessel_bits: Vec<f64>,
    /// Queued cycles per UAV and vessel, updated as tasks are placed.
    uav_cycles: Vec<f64>,
    vessel_cycles: Vec<f64>,
    decision: Decision,
}

impl<'a> Plan<'a> {
    fn new(view: View<'a>) -> Result<Self> {
        let cfg = view.cfg;
        let c = cfg.cycles_per_bit;
        let mut m2u = vec![vec![0.0; cfg.num_uav]; cfg.num_miot];
        for (i, m) in view.nodes.miot.iter().enumerate() {
            for (j, u) in view.nodes.uav.iter().enumerate() {
                m2u[i][j] = m2u_rate(true, path_loss_db(m, u, cfg)?, cfg);
            }
        }
        let gain = view
            .nodes
            .uav
            .iter()
            .map(|u| view.nodes.vessel.iter().map(|v| u2v_gain(u, v, cfg.ref_gain_db)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Plan {
            view,
            m2u,
            gain,
            mode: vec![Mode::Free; cfg.num_uav],
            relays: vec![0; cfg.num_vessel],
            uav_bits: vec![0.0; cfg.num_uav],
            vessel_bits: vec![0.0; cfg.num_vessel],
            uav_cycles: view.queues.uav.iter().map(|&q| q as f64 * c).collect(),
            vessel_cycles: view.queues.vessel.iter().map(|&q| q as f64 * c).collect(),
            decision: Decision::new(cfg),
        })
    }

    fn task_bits(&self, i: usize) -> u64 {
        self.view.tasks.get(i).map_or(0, |t| t.data_bits)
    }

    /// Bits MIoT `i` would push this slot: its backlog plus the new task.
    fn outgoing_bits(&self, i: usize) -> f64 {
        (self.view.queues.miot[i] + self.task_bits(i)) as f64
    }

    fn reachable(&self, i: usize, j: usize) -> bool {
        in_range(&self.view.nodes.miot[i], &self.view.nodes.uav[j], self.view.cfg)
    }

    fn can_compute(&self, j: usize) -> bool {
        matches!(self.mode[j], Mode::Free | Mode::Compute)
    }

    fn can_relay(&self, j: usize, k: usize) -> bool {
        match self.mode[j] {
            Mode::Relay(r) => r == k,
            Mode::Free => self.relays[k] < self.view.cfg.antennas(),
            Mode::Compute => false,
        }
    }

    /// Placements consistent with the plan so far, local first, then UAV
    /// compute by index, then relays by UAV and vessel index.
    fn options(&self, i: usize) -> Vec<Placement> {
        let cfg = self.view.cfg;
        let mut out = vec![Placement::Local];
        for j in 0..cfg.num_uav {
            if self.reachable(i, j) && self.can_compute(j) {
                out.push(Placement::Uav(j));
            }
        }
        for j in 0..cfg.num_uav {
            for k in 0..cfg.num_vessel {
                if self.reachable(i, j) && self.can_relay(j, k) {
                    out.push(Placement::Vessel { uav: j, vessel: k });
                }
            }
        }
        out
    }

    /// The nearest reachable UAV that can relay to `k`, if any.
    fn nearest_relay(&self, i: usize, k: usize) -> Option<usize> {
        let m = &self.view.nodes.miot[i];
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.view.cfg.num_uav {
            if self.reachable(i, j) && self.can_relay(j, k) {
                let d = m.distance(&self.view.nodes.uav[j]);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn u2v(&self, j: usize, k: usize) -> f64 {
        let count = self.relays[k] + usize::from(self.mode[j] == Mode::Free);
        u2v_rate(true, count, self.gain[j][k], self.view.cfg).expect("count is positive")
    }

    /// Completion estimate of MIoT `i`'s task under `p`, given the placements
    /// made so far. With `queue_wait` the backlog ahead of the task counts.
    fn estimate(&self, i: usize, p: Placement, queue_wait: bool) -> f64 {
        let cfg = self.view.cfg;
        let b = self.task_bits(i) as f64;
        if b == 0.0 {
            return 0.0;
        }
        let c = cfg.cycles_per_bit;
        let q = &self.view.queues;
        let own = if queue_wait { self.outgoing_bits(i) } else { b };
        let ahead_u = |j: usize| if queue_wait { q.uav[j] as f64 + self.uav_bits[j] } else { 0.0 };
        let ahead_v = |k: usize| if queue_wait { q.vessel[k] as f64 + self.vessel_bits[k] } else { 0.0 };
        match p {
            Placement::Local => own * c / cfg.miot_local_cpu,
            Placement::Uav(j) => {
                let f = self.decision.uav_level[j] * cfg.uav_cpu;
                own / self.m2u[i][j] + (ahead_u(j) + own) * c / f
            }
            Placement::Vessel { uav: j, vessel: k } => {
                let f = self.decision.vessel_level[k] * cfg.vessel_cpu;
                own / self.m2u[i][j] + (ahead_u(j) + own) / self.u2v(j, k) + (ahead_v(k) + own) * c / f
            }
        }
    }

    fn place(&mut self, i: usize, p: Placement) {
        let c = self.view.cfg.cycles_per_bit;
        let bits = self.outgoing_bits(i);
        match p {
            Placement::Local => self.decision.target[i] = None,
            Placement::Uav(j) => {
                self.decision.target[i] = Some(j);
                self.mode[j] = Mode::Compute;
                self.uav_bits[j] += bits;
                self.uav_cycles[j] += bits * c;
            }
            Placement::Vessel { uav: j, vessel: k } => {
                self.decision.target[i] = Some(j);
                if self.mode[j] == Mode::Free {
                    self.relays[k] += 1;
                }
                self.mode[j] = Mode::Relay(k);
                self.decision.relay[j] = Some(k);
                self.uav_bits[j] += bits;
                self.vessel_bits[k] += bits;
                self.vessel_cycles[k] += bits * c;
            }
        }
    }

    fn finish(self) -> Decision {
        self.decision
    }
}

fn first_min<T: Copy>(items: impl IntoIterator<Item = (T, f64)>) -> Option<(T, f64)> {
    let mut best: Option<(T, f64)> = None;
    for (x, s) in items {
        if best.is_none_or(|(_, bs)| s < bs) {
            best = Some((x, s));
        }
    }
    best
}

/// Proximity heuristic: distance to the compute node (through the relay for
/// vessels) divided by the node's free CPU, `f / (1 + queued_cycles / (f·τ))`.
pub fn ph_decision(view: View<'_>) -> Result<Decision> {
    let mut plan = Plan::new(view)?;
    let cfg = view.cfg;
    let free = |f: f64, cycles: f64| f / (1.0 + cycles / (f * cfg.slot_len));
    for i in 0..cfg.num_miot {
        let m = &view.nodes.miot[i];
        let mut scored = Vec::new();
        for j in 0..cfg.num_uav {
            if plan.reachable(i, j) && plan.can_compute(j) {
                scored.push((Placement::Uav(j), m.distance(&view.nodes.uav[j]) / free(cfg.uav_cpu, plan.uav_cycles[j])));
            }
        }
        for k in 0..cfg.num_vessel {
            if let Some(j) = plan.nearest_relay(i, k) {
                let u = &view.nodes.uav[j];
                let d = m.distance(u) + u.distance(&view.nodes.vessel[k]);
                scored.push((Placement::Vessel { uav: j, vessel: k }, d / free(cfg.vessel_cpu, plan.vessel_cycles[k])));
            }
        }
        let choice = first_min(scored).map_or(Placement::Local, |(p, _)| p);
        plan.place(i, choice);
    }
    Ok(plan.finish())
}

/// Least-loaded placement by queued cycles over CPU rate.
pub fn clb_decision(view: View<'_>) -> Result<Decision> {
    let mut plan = Plan::new(view)?;
    let cfg = view.cfg;
    for i in 0..cfg.num_miot {
        let mut scored = Vec::new();
        for j in 0..cfg.num_uav {
            if plan.reachable(i, j) && plan.can_compute(j) {
                scored.push((Placement::Uav(j), plan.uav_cycles[j] / cfg.uav_cpu));
            }
        }
        for k in 0..cfg.num_vessel {
            if let Some(j) = plan.nearest_relay(i, k) {
                scored.push((Placement::Vessel { uav: j, vessel: k }, plan.vessel_cycles[k] / cfg.vessel_cpu));
            }
        }
        let choice = first_min(scored).map_or(Placement::Local, |(p, _)| p);
        plan.place(i, choice);
    }
    Ok(plan.finish())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GctOptions {
    /// Count the backlog ahead of a task in its completion estimate.
    pub queue_wait: bool,
}

impl Default for GctOptions {
    fn default() -> Self {
        GctOptions { queue_wait: true }
    }
}

/// Greedy completion time: tasks in MIoT order, each to the placement with
/// the smallest completion estimate (ties to the earliest option). Returns
/// the decision and each task's estimate.
pub fn gct_plan(view: View<'_>, opts: GctOptions) -> Result<(Decision, Vec<f64>)> {
    let mut plan = Plan::new(view)?;
    let mut est = Vec::with_capacity(view.cfg.num_miot);
    for i in 0..view.cfg.num_miot {
        let (choice, e) = if plan.task_bits(i) == 0 {
            (Placement::Local, 0.0)
        } else {
            let scored: Vec<(Placement, f64)> = plan.options(i).into_iter().map(|p| (p, plan.estimate(i, p, opts.queue_wait))).collect();
            first_min(scored).expect("local is always an option")
        };
        plan.place(i, choice);
        est.push(e);
    }
    Ok((plan.finish(), est))
}

/// Uniform over {local, each reachable UAV, each vessel with a usable relay};
/// a UAV already relaying forwards the task to its vessel.
pub fn ro_decision<R: Rng + ?Sized>(view: View<'_>, rng: &mut R) -> Result<Decision> {
    let mut plan = Plan::new(view)?;
    let cfg = view.cfg;
    for i in 0..cfg.num_miot {
        let mut opts = vec![Placement::Local];
        opts.extend((0..cfg.num_uav).filter(|&j| plan.reachable(i, j)).map(Placement::Uav));
        for k in 0..cfg.num_vessel {
            if let Some(j) = plan.nearest_relay(i, k) {
                opts.push(Placement::Vessel { uav: j, vessel: k });
            }
        }
        let mut choice = opts[rng.random_range(0..opts.len())];
        if let Placement::Uav(j) = choice {
            if let Mode::Relay(k) = plan.mode[j] {
                choice = Placement::Vessel { uav: j, vessel: k };
            }
        }
        plan.place(i, choice);
    }
    Ok(plan.finish())
}

pub fn ph_decide(view: View<'_>) -> Result<JointAction> {
    Ok(ph_decision(view)?.materialize(view.cfg, view.residency))
}

pub fn gct_decide(view: View<'_>, opts: GctOptions) -> Result<JointAction> {
    Ok(gct_plan(view, opts)?.0.materialize(view.cfg, view.residency))
}

pub fn clb_decide(view: View<'_>) -> Result<JointAction> {
    Ok(clb_decision(view)?.materialize(view.cfg, view.residency))
}

pub fn ro_decide<R: Rng + ?Sized>(view: View<'_>, rng: &mut R) -> Result<JointAction> {
    Ok(ro_decision(view, rng)?.materialize(view.cfg, view.residency))
}

/// Drift-plus-penalty objective of `a` in the viewed slot.
pub fn slot_cost(view: View<'_>, a: &JointAction) -> Result<f64> {
    let rates = LinkRateTable::compute(view.nodes, &a.offload_o, &a.offload_s, view.cfg)?;
    let bits: Vec<u64> = view.tasks.iter().map(|t| t.data_bits).collect();
    let phi = slot_cost_phi(&task_delays(&bits, a, &rates, view.cfg));
    per_slot_objective(view.queues, a, &rates, phi, view.cfg.lyapunov_v, view.cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleObjective {
    /// The slot's drift-plus-penalty objective.
    SlotCost,
    /// Completion estimates in MIoT order, compared lexicographically;
    /// the reported cost is their sum.
    Completion(GctOptions),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub decision: Decision,
    pub action: JointAction,
    pub cost: f64,
}

/// Completion estimates of a full decision, evaluated task by task exactly
/// as the greedy scheduler does.
pub fn completion_estimates(view: View<'_>, d: &Decision, opts: GctOptions) -> Result<Vec<f64>> {
    let mut plan = Plan::new(view)?;
    plan.decision.uav_level.clone_from(&d.uav_level);
    plan.decision.vessel_level.clone_from(&d.vessel_level);
    let mut est = Vec::with_capacity(view.cfg.num_miot);
    for i in 0..view.cfg.num_miot {
        let p = match d.target[i] {
            None => Placement::Local,
            Some(j) => match d.relay[j] {
                Some(k) => Placement::Vessel { uav: j, vessel: k },
                None => Placement::Uav(j),
            },
        };
        est.push(plan.estimate(i, p, opts.queue_wait));
        plan.place(i, p);
    }
    Ok(est)
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Odometer over mixed radices; returns false after the last combination.
fn advance(digits: &mut [usize], radix: &[usize]) -> bool {
    for (d, &r) in digits.iter_mut().zip(radix) {
        *d += 1;
        if *d < r {
            return true;
        }
        *d = 0;
    }
    false
}

/// Exhaustive search over MIoT targets, UAV relays and CPU levels.
pub fn brute_force_oracle(view: View<'_>, objective: OracleObjective, levels: &[f64]) -> Result<OracleResult> {
    let cfg = view.cfg;
    let (mi, mj, mk) = ORACLE_MAX;
    if cfg.num_miot > mi || cfg.num_uav > mj || cfg.num_vessel > mk {
        return Err(MecError::InstanceTooLarge(format!(
            "{} MIoTs, {} UAVs, {} vessels (limit {mi}/{mj}/{mk})",
            cfg.num_miot, cfg.num_uav, cfg.num_vessel
        )));
    }
    if levels.is_empty() || levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(MecError::InvalidArgument("CPU levels must be a nonempty subset of [0, 1]".into()));
    }
    let targets: Vec<Vec<Option<usize>>> = (0..cfg.num_miot)
        .map(|i| {
            std::iter::once(None)
                .chain((0..cfg.num_uav).filter(|&j| in_range(&view.nodes.miot[i], &view.nodes.uav[j], cfg)).map(Some))
                .collect()
        })
        .collect();
    let relay_opts: Vec<Option<usize>> = std::iter::once(None).chain((0..cfg.num_vessel).map(Some)).collect();
    let n_nodes = cfg.num_uav + cfg.num_vessel;

    let mut t_digits = vec![0; cfg.num_miot];
    let t_radix: Vec<usize> = targets.iter().map(Vec::len).collect();
    let r_radix = vec![relay_opts.len(); cfg.num_uav];
    let l_radix = vec![levels.len(); n_nodes];

    let mut best: Option<(Decision, f64, Vec<f64>)> = None;
    loop {
        let mut r_digits = vec![0; cfg.num_uav];
        loop {
            let relay: Vec<Option<usize>> = r_digits.iter().map(|&d| relay_opts[d]).collect();
            let fits = (0..cfg.num_vessel).all(|k| relay.iter().filter(|r| **r == Some(k)).count() <= cfg.antennas());
            if fits {
                let mut l_digits = vec![0; n_nodes];
                loop {
                    let d = Decision {
                        target: t_digits.iter().enumerate().map(|(i, &x)| targets[i][x]).collect(),
                        relay: relay.clone(),
                        uav_level: l_digits[..cfg.num_uav].iter().map(|&x| levels[x]).collect(),
                        vessel_level: l_digits[cfg.num_uav..].iter().map(|&x| levels[x]).collect(),
                    };
                    let (cost, key) = match objective {
                        OracleObjective::SlotCost => {
                            let c = slot_cost(view, &d.materialize(cfg, view.residency))?;
                            (c, vec![c])
                        }
                        OracleObjective::Completion(opts) => {
                            let est = completion_estimates(view, &d, opts)?;
                            (est.iter().sum(), est)
                        }
                    };
                    if best.as_ref().is_none_or(|(_, _, bk)| lex_less(&key, bk)) {
                        best = Some((d, cost, key));
                    }
                    if !advance(&mut l_digits, &l_radix) {
                        break;
                    }
                }
            }
            if !advance(&mut r_digits, &r_radix) {
                break;
            }
        }
        if !advance(&mut t_digits, &t_radix) {
            break;
        }
    }
    let (decision, cost, _) = best.expect("the all-local decision is always enumerated");
    let action = decision.materialize(cfg, view.residency);
    Ok(OracleResult { decision, action, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queueing::validate_action;
    use crate::scenario::Position;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(i: usize, j: usize, k: usize) -> SimConfig {
        SimConfig { num_miot: i, num_uav: j, num_vessel: k, uav_speed: 0.0, ..SimConfig::default() }
    }

    fn nodes(miot: &[(f64, f64)], uav: &[(f64, f64)], vessel: &[(f64, f64)], c: &SimConfig) -> NodeSet {
        NodeSet {
            miot: miot.iter().map(|&(x, y)| Position::new(x, y, c.miot_height)).collect(),
            uav: uav.iter().map(|&(x, y)| Position::new(x, y, c.uav_height)).collect(),
            vessel: vessel.iter().map(|&(x, y)| Position::new(x, y, 0.0)).collect(),
        }
    }

    fn tasks(bits: &[u64]) -> Vec<Task> {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| Task { origin_miot: i, arrival_slot: 0, data_bits: b, cycles_per_bit: 270.0 })
            .collect()
    }

    struct Fixture {
        cfg: SimConfig,
        nodes: NodeSet,
        queues: QueueState,
        residency: Residency,
        tasks: Vec<Task>,
    }

    impl Fixture {
        fn new(cfg: SimConfig, nodes: NodeSet, bits: &[u64]) -> Self {
            Fixture { queues: QueueState::zeros(&cfg), residency: Residency::empty(&cfg), tasks: tasks(bits), cfg, nodes }
        }

        fn view(&self) -> View<'_> {
            View { cfg: &self.cfg, nodes: &self.nodes, queues: &self.queues, residency: &self.residency, tasks: &self.tasks }
        }
    }

    #[test]
    fn ph_tie_goes_to_lowest_uav() {
        let c = cfg(1, 2, 0);
        let f = Fixture::new(c.clone(), nodes(&[(500.0, 500.0)], &[(400.0, 500.0), (600.0, 500.0)], &[], &c), &[1_000_000]);
        assert_eq!(ph_decision(f.view()).unwrap().target, vec![Some(0)]);
    }

    #[test]
    fn ph_prefers_distant_free_uav_over_near_loaded_one() {
        let c = cfg(1, 2, 0);
        let mut f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(10.0, 0.0), (5.0, 0.0)], &[], &c), &[1_000_000]);
        f.queues.uav[1] = 500_000_000;
        let free = |cycles: f64| c.uav_cpu / (1.0 + cycles / (c.uav_cpu * c.slot_len));
        let d0 = f.nodes.miot[0].distance(&f.nodes.uav[0]);
        let d1 = f.nodes.miot[0].distance(&f.nodes.uav[1]);
        assert!(d0 / free(0.0) < d1 / free(500_000_000.0 * c.cycles_per_bit));
        assert_eq!(ph_decision(f.view()).unwrap().target, vec![Some(0)]);
    }

    #[test]
    fn no_reachable_node_stays_local() {
        let c = SimConfig { comm_range: Some(10.0), ..cfg(1, 1, 1) };
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(900.0, 900.0)], &[(500.0, 500.0)], &c), &[1_000_000]);
        for d in [ph_decision(f.view()).unwrap(), clb_decision(f.view()).unwrap(), gct_plan(f.view(), GctOptions::default()).unwrap().0] {
            assert_eq!(d.target, vec![None]);
        }
    }

    #[test]
    fn gct_avoids_strictly_slower_vessel_path() {
        // Vessel CPU equal to the UAV's and the vessel far away: relaying only adds time.
        let c = SimConfig { vessel_cpu: 1e9, ..cfg(1, 1, 1) };
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(0.0, 0.0)], &[(900.0, 900.0)], &c), &[1_000_000]);
        let (d, _) = gct_plan(f.view(), GctOptions::default()).unwrap();
        assert_eq!((d.target, d.relay), (vec![Some(0)], vec![None]));
    }

    #[test]
    fn gct_zero_task_stays_local_at_zero_cost() {
        let c = cfg(1, 1, 1);
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(0.0, 0.0)], &[(10.0, 0.0)], &c), &[0]);
        let (d, est) = gct_plan(f.view(), GctOptions::default()).unwrap();
        assert_eq!((d.target, est), (vec![None], vec![0.0]));
    }

    #[test]
    fn gct_estimate_matches_hand_formula() {
        let c = cfg(1, 1, 0);
        let mut f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(30.0, 40.0)], &[], &c), &[2_000_000]);
        f.queues.miot[0] = 1_000_000;
        f.queues.uav[0] = 500_000;
        let (_, est) = gct_plan(f.view(), GctOptions::default()).unwrap();
        let r = m2u_rate(true, path_loss_db(&f.nodes.miot[0], &f.nodes.uav[0], &c).unwrap(), &c);
        let expected = 3e6 / r + (0.5e6 + 3e6) * 270.0 / 1e9;
        assert!((est[0] - expected).abs() < 1e-12 * expected, "{} vs {expected}", est[0]);
        let (_, no_wait) = gct_plan(f.view(), GctOptions { queue_wait: false }).unwrap();
        assert!((no_wait[0] - (2e6 / r + 2e6 * 270.0 / 1e9)).abs() < 1e-12);
    }

    #[test]
    fn clb_tie_goes_to_lowest_index() {
        let c = cfg(1, 2, 1);
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(100.0, 0.0), (0.0, 100.0)], &[(50.0, 50.0)], &c), &[1_000_000]);
        assert_eq!(clb_decision(f.view()).unwrap().target, vec![Some(0)]);
    }

    #[test]
    fn clb_picks_smaller_normalized_load() {
        let c = cfg(1, 1, 1);
        let mut f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(100.0, 0.0)], &[(50.0, 50.0)], &c), &[1_000_000]);
        // UAV: 2 s of queued work; vessel: 1 s.
        f.queues.uav[0] = (2.0 * c.uav_cpu / c.cycles_per_bit) as u64;
        f.queues.vessel[0] = (1.0 * c.vessel_cpu / c.cycles_per_bit) as u64;
        let d = clb_decision(f.view()).unwrap();
        assert_eq!((d.target, d.relay), (vec![Some(0)], vec![Some(0)]));
    }

    #[test]
    fn clb_alternates_between_equal_uavs() {
        let c = cfg(1, 2, 0);
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(100.0, 0.0), (0.0, 100.0)], &[], &c), &[1_000_000]);
        // Simulate 10 placements of equal tasks, carrying the load forward.
        let mut plan = Plan::new(f.view()).unwrap();
        let mut picks = Vec::new();
        for _ in 0..10 {
            let j = if plan.uav_cycles[0] <= plan.uav_cycles[1] { 0 } else { 1 };
            let scored: Vec<(usize, f64)> = (0..2).map(|u| (u, plan.uav_cycles[u] / c.uav_cpu)).collect();
            assert_eq!(first_min(scored).unwrap().0, j);
            plan.place(0, Placement::Uav(j));
            plan.mode = vec![Mode::Free; 2];
            picks.push(j);
        }
        assert_eq!(picks, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn ro_is_uniform_over_options() {
        let c = cfg(1, 2, 1);
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(100.0, 0.0), (0.0, 100.0)], &[(50.0, 50.0)], &c), &[1_000_000]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let d = ro_decision(f.view(), &mut rng).unwrap();
            let idx = match (d.target[0], d.relay.iter().any(Option::is_some)) {
                (None, _) => 0,
                (Some(_), true) => 3,
                (Some(j), false) => 1 + j,
            };
            counts[idx] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for cnt in counts {
            assert!((cnt as f64 - n as f64 * 0.25).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn ro_without_reachable_uavs_is_local() {
        let c = SimConfig { comm_range: Some(1.0), ..cfg(1, 2, 1) };
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(100.0, 0.0), (0.0, 100.0)], &[(50.0, 50.0)], &c), &[1_000_000]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(ro_decision(f.view(), &mut rng).unwrap().target, vec![None]);
        }
    }

    #[test]
    fn ro_is_reproducible() {
        let c = cfg(3, 2, 1);
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0), (5.0, 5.0), (9.0, 1.0)], &[(100.0, 0.0), (0.0, 100.0)], &[(50.0, 50.0)], &c), &[1, 2, 3]);
        let run = |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..20).map(|_| ro_decision(f.view(), &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let c = cfg(4, 1, 1);
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0); 4], &[(1.0, 1.0)], &[(2.0, 2.0)], &c), &[1; 4]);
        assert!(matches!(brute_force_oracle(f.view(), OracleObjective::SlotCost, &DEFAULT_LEVELS), Err(MecError::InstanceTooLarge(_))));
    }

    #[test]
    fn oracle_with_no_tasks_is_idle_at_zero_cost() {
        let c = cfg(2, 2, 1);
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0), (9.0, 9.0)], &[(100.0, 0.0), (0.0, 100.0)], &[(50.0, 50.0)], &c), &[0, 0]);
        let r = brute_force_oracle(f.view(), OracleObjective::SlotCost, &DEFAULT_LEVELS).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.action, JointAction::idle_for(&c));
    }

    #[test]
    fn oracle_with_single_option_returns_it() {
        let c = SimConfig { comm_range: Some(1.0), ..cfg(1, 1, 0) };
        let f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0)], &[(100.0, 0.0)], &[], &c), &[1_000]);
        let r = brute_force_oracle(f.view(), OracleObjective::SlotCost, &[1.0]).unwrap();
        assert_eq!(r.decision.target, vec![None]);
        assert_eq!(r.action, JointAction::idle_for(&c));
    }

    #[test]
    fn oracle_cost_is_below_every_baseline() {
        let c = cfg(2, 2, 1);
        let mut f = Fixture::new(c.clone(), nodes(&[(100.0, 200.0), (700.0, 300.0)], &[(150.0, 250.0), (600.0, 350.0)], &[(400.0, 900.0)], &c), &[12_000_000, 18_000_000]);
        f.queues.miot = vec![3_000_000, 0];
        let best = brute_force_oracle(f.view(), OracleObjective::SlotCost, &DEFAULT_LEVELS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let baselines = [
            ph_decide(f.view()).unwrap(),
            gct_decide(f.view(), GctOptions::default()).unwrap(),
            clb_decide(f.view()).unwrap(),
            ro_decide(f.view(), &mut rng).unwrap(),
        ];
        for a in &baselines {
            assert!(best.cost <= slot_cost(f.view(), a).unwrap());
        }
    }

    #[test]
    fn gct_matches_completion_oracle() {
        let c = cfg(3, 2, 1);
        let mut f = Fixture::new(
            c.clone(),
            nodes(&[(100.0, 200.0), (700.0, 300.0), (500.0, 500.0)], &[(150.0, 250.0), (600.0, 350.0)], &[(400.0, 900.0)], &c),
            &[12_000_000, 18_000_000, 9_000_000],
        );
        f.queues.uav = vec![20_000_000, 1_000_000];
        let opts = GctOptions::default();
        let (_, est) = gct_plan(f.view(), opts).unwrap();
        let r = brute_force_oracle(f.view(), OracleObjective::Completion(opts), &DEFAULT_LEVELS).unwrap();
        assert_eq!(r.cost, est.iter().sum::<f64>());
    }

    #[test]
    fn baseline_actions_are_feasible() {
        let c = cfg(3, 2, 1);
        let mut f = Fixture::new(c.clone(), nodes(&[(0.0, 0.0), (5.0, 5.0), (900.0, 100.0)], &[(100.0, 0.0), (0.0, 100.0)], &[(50.0, 50.0)], &c), &[5, 0, 7]);
        f.residency.uav[1][2] = 10;
        f.residency.vessel[0][0] = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for a in [
            ph_decide(f.view()).unwrap(),
            gct_decide(f.view(), GctOptions::default()).unwrap(),
            clb_decide(f.view()).unwrap(),
            ro_decide(f.view(), &mut rng).unwrap(),
        ] {
            assert!(validate_action(&a, &c, Some(&f.residency)).unwrap().is_empty());
            assert!(a.alloc_u[2][1] > 0.0, "resident bits keep their CPU share");
        }
    }
}
