//! Task-level FIFO simulation of the three tiers.
//!
//! Each node holds a FIFO of chunks (pieces of tasks). In every slot the
//! MIoT stage runs first (uplink to the chosen UAV, or the local CPU), then
//! each UAV computes from the head of its queue and relays what its budget
//! leaves to the chosen vessel, then vessels compute. Bits that arrive at a
//! node during a slot can be served in the same slot. Servers keep a clock so
//! timestamps inside a slot are fractional and monotone.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{cpu_budget, link_budget, slot_cost_phi, task_delays, JointAction, QueueState, Residency};
use crate::channel::LinkRateTable;
use crate::error::{MecError, Result};
use crate::scenario::{SimConfig, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tier {
    Miot,
    Uav,
    Vessel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierBits {
    pub miot: u64,
    pub uav: u64,
    pub vessel: u64,
}

impl TierBits {
    pub fn total(&self) -> u64 {
        self.miot + self.uav + self.vessel
    }

    fn add(&mut self, tier: Tier, bits: u64) {
        match tier {
            Tier::Miot => self.miot += bits,
            Tier::Uav => self.uav += bits,
            Tier::Vessel => self.vessel += bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: usize,
    pub origin_miot: usize,
    pub arrival_slot: usize,
    pub arrival_time: f64,
    pub data_bits: u64,
    pub remaining_bits: u64,
    pub first_service: Option<f64>,
    pub finish: Option<f64>,
    pub processed: TierBits,
    last_piece: f64,
}

/// Bits entering and leaving one queue in one slot. `service_cap` is the
/// budget the recursion subtracts; `served` is what actually left.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub inflow: u64,
    pub service_cap: u64,
    pub served: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotLedger {
    pub slot: usize,
    /// Φ(t), seconds.
    pub phi: f64,
    pub task_delays: Vec<f64>,
    pub miot: Vec<Flow>,
    pub uav: Vec<Flow>,
    pub vessel: Vec<Flow>,
    /// Bits computed this slot at each tier.
    pub processed: TierBits,
    /// Bits actually moved MIoT→UAV, `[i][j]`.
    pub m2u_bits: Vec<Vec<u64>>,
    /// Bits actually moved UAV→vessel, `[j][k]`.
    pub u2v_bits: Vec<Vec<u64>>,
    pub arrived_bits: u64,
    pub completed_tasks: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Chunk {
    task: usize,
    origin: usize,
    via: usize,
    bits: u64,
    ready: f64,
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    task: usize,
    origin: usize,
    bits: u64,
    start: f64,
    finish: f64,
}

/// Serves up to `cap` bits from the head of `queue`, splitting the last chunk
/// if needed. Each served piece is returned with its start and finish times.
fn serve(queue: &mut VecDeque<Chunk>, cap: u64, clock: &mut f64, t0: f64, tau: f64) -> Vec<(Piece, usize)> {
    let mut out = Vec::new();
    if cap == 0 {
        return out;
    }
    *clock = clock.max(t0);
    let mut left = cap;
    while left > 0 {
        let Some(head) = queue.front_mut() else { break };
        let take = head.bits.min(left);
        let start = clock.max(head.ready);
        let finish = start + tau * take as f64 / cap as f64;
        *clock = finish;
        out.push((Piece { task: head.task, origin: head.origin, bits: take, start, finish }, head.via));
        head.bits -= take;
        left -= take;
        if head.bits == 0 {
            queue.pop_front();
        }
    }
    out
}

/// The simulator's mutable state: node FIFOs, server clocks and task records.
#[derive(Clone, Debug)]
pub struct Network {
    cfg: SimConfig,
    slot: usize,
    miot_q: Vec<VecDeque<Chunk>>,
    uav_q: Vec<VecDeque<Chunk>>,
    vessel_q: Vec<VecDeque<Chunk>>,
    miot_clock: Vec<f64>,
    uav_cpu_clock: Vec<f64>,
    uav_link_clock: Vec<f64>,
    vessel_clock: Vec<f64>,
    records: Vec<TaskRecord>,
    residency: Residency,
    processed: TierBits,
    arrived: u64,
}

impl Network {
    pub fn new(cfg: &SimConfig) -> Self {
        let (i, j, k) = (cfg.num_miot, cfg.num_uav, cfg.num_vessel);
        Network {
            cfg: cfg.clone(),
            slot: 0,
            miot_q: vec![VecDeque::new(); i],
            uav_q: vec![VecDeque::new(); j],
            vessel_q: vec![VecDeque::new(); k],
            miot_clock: vec![0.0; i],
            uav_cpu_clock: vec![0.0; j],
            uav_link_clock: vec![0.0; j],
            vessel_clock: vec![0.0; k],
            records: Vec::new(),
            residency: Residency::empty(cfg),
            processed: TierBits::default(),
            arrived: 0,
        }
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn queues(&self) -> QueueState {
        let sum = |q: &VecDeque<Chunk>| q.iter().map(|c| c.bits).sum();
        QueueState {
            miot: self.miot_q.iter().map(sum).collect(),
            uav: self.uav_q.iter().map(sum).collect(),
            vessel: self.vessel_q.iter().map(sum).collect(),
            slot: self.slot,
        }
    }

    pub fn residency(&self) -> &Residency {
        &self.residency
    }

    pub fn records(&self) -> &[TaskRecord] {
        &self.records
    }

    /// Bits computed so far at each tier.
    pub fn processed(&self) -> TierBits {
        self.processed
    }

    pub fn arrived_bits(&self) -> u64 {
        self.arrived
    }

    /// Bits queued at UAV `j` per origin MIoT, in FIFO order, as `(origin, bits)`.
    pub fn uav_fifo(&self, j: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.uav_q[j].iter().map(|c| (c.origin, c.bits))
    }

    fn touch(&mut self, p: &Piece) {
        let r = &mut self.records[p.task];
        r.first_service = Some(r.first_service.map_or(p.start, |s| s.min(p.start)));
    }

    fn complete(&mut self, p: &Piece, tier: Tier, ledger: &mut SlotLedger) {
        self.touch(p);
        let r = &mut self.records[p.task];
        r.remaining_bits -= p.bits;
        r.processed.add(tier, p.bits);
        r.last_piece = r.last_piece.max(p.finish);
        if r.remaining_bits == 0 {
            r.finish = Some(r.last_piece);
            ledger.completed_tasks.push(p.task);
        }
        self.processed.add(tier, p.bits);
        ledger.processed.add(tier, p.bits);
    }

    /// Advances one slot. `tasks` are the slot's arrivals, one per MIoT.
    pub fn step(&mut self, tasks: &[Task], a: &JointAction, rates: &LinkRateTable) -> Result<SlotLedger> {
        let cfg = self.cfg.clone();
        let (ni, nj, nk) = (cfg.num_miot, cfg.num_uav, cfg.num_vessel);
        a.check_dims(&cfg)?;
        if tasks.len() != ni {
            return Err(MecError::Dimension { what: "tasks", expected: ni, got: tasks.len() });
        }
        let tau = cfg.slot_len;
        let c = cfg.cycles_per_bit;
        let t0 = self.slot as f64 * tau;
        let task_bits: Vec<u64> = tasks.iter().map(|t| t.data_bits).collect();
        let delays = task_delays(&task_bits, a, rates, &cfg);
        let mut ledger = SlotLedger {
            slot: self.slot,
            phi: slot_cost_phi(&delays),
            task_delays: delays,
            miot: vec![Flow::default(); ni],
            uav: vec![Flow::default(); nj],
            vessel: vec![Flow::default(); nk],
            processed: TierBits::default(),
            m2u_bits: vec![vec![0; nj]; ni],
            u2v_bits: vec![vec![0; nk]; nj],
            arrived_bits: task_bits.iter().sum(),
            completed_tasks: Vec::new(),
        };

        for (i, task) in tasks.iter().enumerate() {
            if task.origin_miot != i {
                return Err(MecError::Contract(format!("task {i} has origin {}", task.origin_miot)));
            }
            let id = self.records.len();
            self.records.push(TaskRecord {
                id,
                origin_miot: i,
                arrival_slot: self.slot,
                arrival_time: t0,
                data_bits: task.data_bits,
                remaining_bits: task.data_bits,
                first_service: None,
                finish: None,
                processed: TierBits::default(),
                last_piece: t0,
            });
            if task.data_bits > 0 {
                self.miot_q[i].push_back(Chunk { task: id, origin: i, via: 0, bits: task.data_bits, ready: t0 });
            }
            ledger.miot[i].inflow = task.data_bits;
        }
        self.arrived += ledger.arrived_bits;

        for i in 0..ni {
            let target = a.target_uav(i);
            let cap = match target {
                Some(j) => link_budget(rates.m2u_rate[i][j], tau),
                None => cpu_budget(cfg.miot_local_cpu, c, tau),
            };
            let mut clock = self.miot_clock[i];
            let pieces = serve(&mut self.miot_q[i], cap, &mut clock, t0, tau);
            self.miot_clock[i] = clock;
            ledger.miot[i].service_cap = cap;
            for (p, _) in pieces {
                ledger.miot[i].served += p.bits;
                match target {
                    Some(j) => {
                        self.touch(&p);
                        ledger.m2u_bits[i][j] += p.bits;
                        ledger.uav[j].inflow += p.bits;
                        self.residency.uav[j][i] += p.bits;
                        self.uav_q[j].push_back(Chunk { task: p.task, origin: i, via: 0, bits: p.bits, ready: p.finish });
                    }
                    None => self.complete(&p, Tier::Miot, &mut ledger),
                }
            }
        }

        for j in 0..nj {
            let cpu_cap = cpu_budget(a.uav_alloc_total(j), c, tau);
            let mut clock = self.uav_cpu_clock[j];
            let computed = serve(&mut self.uav_q[j], cpu_cap, &mut clock, t0, tau);
            self.uav_cpu_clock[j] = clock;
            for (p, _) in &computed {
                ledger.uav[j].served += p.bits;
                self.residency.uav[j][p.origin] -= p.bits;
                self.complete(p, Tier::Uav, &mut ledger);
            }
            let relay = a.relay_vessel(j);
            let link_cap = relay.map_or(0, |k| link_budget(rates.u2v_rate[j][k], tau));
            ledger.uav[j].service_cap = cpu_cap + link_cap;
            if let Some(k) = relay {
                let mut clock = self.uav_link_clock[j];
                let sent = serve(&mut self.uav_q[j], link_cap, &mut clock, t0, tau);
                self.uav_link_clock[j] = clock;
                for (p, _) in sent {
                    self.touch(&p);
                    ledger.uav[j].served += p.bits;
                    ledger.u2v_bits[j][k] += p.bits;
                    ledger.vessel[k].inflow += p.bits;
                    self.residency.uav[j][p.origin] -= p.bits;
                    self.residency.vessel[k][j] += p.bits;
                    self.vessel_q[k].push_back(Chunk { task: p.task, origin: p.origin, via: j, bits: p.bits, ready: p.finish });
                }
            }
        }

        for k in 0..nk {
            let cap = cpu_budget(a.vessel_alloc_total(k), c, tau);
            ledger.vessel[k].service_cap = cap;
            let mut clock = self.vessel_clock[k];
            let computed = serve(&mut self.vessel_q[k], cap, &mut clock, t0, tau);
            self.vessel_clock[k] = clock;
            for (p, via) in computed {
                ledger.vessel[k].served += p.bits;
                self.residency.vessel[k][via] -= p.bits;
                self.complete(&p, Tier::Vessel, &mut ledger);
            }
        }

        self.slot += 1;
        Ok(ledger)
    }
}
