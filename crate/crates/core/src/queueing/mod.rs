//! Backlog recursions, per-task delays, feasibility checks and run metrics.
//!
//! Backlogs are held in whole bits so the recursions (and the drift lemma
//! checked against them) are exact. Per-slot service capacities are the
//! floored bit budgets `⌊τ·R⌋` and `⌊τ·f/c⌋`.

mod network;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::{check_dims, LinkRateTable};
use crate::error::{MecError, Result};
use crate::scenario::SimConfig;

pub use network::{Flow, Network, SlotLedger, TaskRecord, Tier, TierBits};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueState {
    pub miot: Vec<u64>,
    pub uav: Vec<u64>,
    pub vessel: Vec<u64>,
    pub slot: usize,
}

impl QueueState {
    pub fn zeros(cfg: &SimConfig) -> Self {
        QueueState {
            miot: vec![0; cfg.num_miot],
            uav: vec![0; cfg.num_uav],
            vessel: vec![0; cfg.num_vessel],
            slot: 0,
        }
    }

    pub fn total_bits(&self) -> u64 {
        self.miot.iter().chain(&self.uav).chain(&self.vessel).sum()
    }

    pub fn max_backlog(&self) -> u64 {
        self.miot.iter().chain(&self.uav).chain(&self.vessel).copied().max().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.miot.iter().chain(&self.uav).chain(&self.vessel).copied()
    }
}

/// Offloading decisions and CPU allocations for one slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointAction {
    /// MIoT i offloads to UAV j.
    pub offload_o: Vec<Vec<bool>>,
    /// UAV j relays to vessel k.
    pub offload_s: Vec<Vec<bool>>,
    /// Cycles/s UAV j spends on MIoT i's tasks, indexed `[i][j]`.
    pub alloc_u: Vec<Vec<f64>>,
    /// Cycles/s vessel k spends on tasks relayed by UAV j, indexed `[j][k]`.
    pub alloc_v: Vec<Vec<f64>>,
}

impl JointAction {
    pub fn idle(num_miot: usize, num_uav: usize, num_vessel: usize) -> Self {
        JointAction {
            offload_o: vec![vec![false; num_uav]; num_miot],
            offload_s: vec![vec![false; num_vessel]; num_uav],
            alloc_u: vec![vec![0.0; num_uav]; num_miot],
            alloc_v: vec![vec![0.0; num_vessel]; num_uav],
        }
    }

    pub fn idle_for(cfg: &SimConfig) -> Self {
        Self::idle(cfg.num_miot, cfg.num_uav, cfg.num_vessel)
    }

    pub fn check_dims(&self, cfg: &SimConfig) -> Result<()> {
        let (i, j, k) = (cfg.num_miot, cfg.num_uav, cfg.num_vessel);
        check_dims("offload_o", &self.offload_o, i, j)?;
        check_dims("offload_s", &self.offload_s, j, k)?;
        check_dims("alloc_u", &self.alloc_u, i, j)?;
        check_dims("alloc_v", &self.alloc_v, j, k)
    }

    /// The UAV MIoT `i` offloads to, if any (first one when the row is infeasible).
    pub fn target_uav(&self, i: usize) -> Option<usize> {
        self.offload_o[i].iter().position(|&o| o)
    }

    pub fn relay_vessel(&self, j: usize) -> Option<usize> {
        self.offload_s[j].iter().position(|&s| s)
    }

    pub fn uav_alloc_total(&self, j: usize) -> f64 {
        self.alloc_u.iter().map(|row| row[j]).sum()
    }

    pub fn vessel_alloc_total(&self, k: usize) -> f64 {
        self.alloc_v.iter().map(|row| row[k]).sum()
    }
}

/// Bits currently held at each edge node, broken down by where they came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Residency {
    /// `uav[j][i]`: bits at UAV j that originated at MIoT i.
    pub uav: Vec<Vec<u64>>,
    /// `vessel[k][j]`: bits at vessel k that were relayed by UAV j.
    pub vessel: Vec<Vec<u64>>,
}

impl Residency {
    pub fn empty(cfg: &SimConfig) -> Self {
        Residency {
            uav: vec![vec![0; cfg.num_miot]; cfg.num_uav],
            vessel: vec![vec![0; cfg.num_uav]; cfg.num_vessel],
        }
    }

    /// Origins UAV `j` may spend CPU on this slot.
    pub fn uav_eligible(&self, a: &JointAction, j: usize, i: usize) -> bool {
        a.offload_o[i][j] || self.uav[j][i] > 0
    }

    pub fn vessel_eligible(&self, a: &JointAction, k: usize, j: usize) -> bool {
        a.offload_s[j][k] || self.vessel[k][j] > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// A MIoT offloads to more than one UAV.
    OffloadRow { miot: usize, count: usize },
    /// A UAV relays to more than one vessel.
    RelayRow { uav: usize, count: usize },
    UavCapacity { uav: usize, total: f64, cap: f64 },
    VesselCapacity { vessel: usize, total: f64, cap: f64 },
    Antenna { vessel: usize, count: usize, limit: usize },
    BadAllocation { tier: Tier, row: usize, col: usize, value: f64 },
    NonResidentUav { miot: usize, uav: usize },
    NonResidentVessel { uav: usize, vessel: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OffloadRow { miot, count } => {
                write!(f, "single-UAV offloading: MIoT {miot} selects {count} UAVs")
            }
            Violation::RelayRow { uav, count } => {
                write!(f, "single-vessel relay: UAV {uav} selects {count} vessels")
            }
            Violation::UavCapacity { uav, total, cap } => {
                write!(f, "UAV capacity: UAV {uav} allocates {total} > {cap} cycles/s")
            }
            Violation::VesselCapacity { vessel, total, cap } => {
                write!(f, "vessel capacity: vessel {vessel} allocates {total} > {cap} cycles/s")
            }
            Violation::Antenna { vessel, count, limit } => {
                write!(f, "antenna limit: vessel {vessel} admits {count} > {limit} UAVs")
            }
            Violation::BadAllocation { tier, row, col, value } => {
                write!(f, "allocation {tier:?}[{row}][{col}] = {value} is negative or non-finite")
            }
            Violation::NonResidentUav { miot, uav } => {
                write!(f, "UAV {uav} allocates CPU to MIoT {miot} with no resident tasks")
            }
            Violation::NonResidentVessel { uav, vessel } => {
                write!(f, "vessel {vessel} allocates CPU to UAV {uav} with no resident tasks")
            }
        }
    }
}

// Allocations produced by rescaling a softmax may exceed the cap by an ulp.
const CAPACITY_RTOL: f64 = 1e-12;

/// Lists every violated feasibility constraint. `residency` enables the
/// "allocate only to resident tasks" check; pass `None` to skip it.
pub fn validate_action(a: &JointAction, cfg: &SimConfig, residency: Option<&Residency>) -> Result<Vec<Violation>> {
    a.check_dims(cfg)?;
    let mut out = Vec::new();
    for (miot, row) in a.offload_o.iter().enumerate() {
        let count = row.iter().filter(|&&o| o).count();
        if count > 1 {
            out.push(Violation::OffloadRow { miot, count });
        }
    }
    for (uav, row) in a.offload_s.iter().enumerate() {
        let count = row.iter().filter(|&&s| s).count();
        if count > 1 {
            out.push(Violation::RelayRow { uav, count });
        }
    }
    for (tier, m) in [(Tier::Uav, &a.alloc_u), (Tier::Vessel, &a.alloc_v)] {
        for (row, values) in m.iter().enumerate() {
            for (col, &value) in values.iter().enumerate() {
                if !(value.is_finite() && value >= 0.0) {
                    out.push(Violation::BadAllocation { tier, row, col, value });
                }
            }
        }
    }
    for uav in 0..cfg.num_uav {
        let total = a.uav_alloc_total(uav);
        if total > cfg.uav_cpu * (1.0 + CAPACITY_RTOL) {
            out.push(Violation::UavCapacity { uav, total, cap: cfg.uav_cpu });
        }
    }
    let limit = cfg.antennas();
    for vessel in 0..cfg.num_vessel {
        let total = a.vessel_alloc_total(vessel);
        if total > cfg.vessel_cpu * (1.0 + CAPACITY_RTOL) {
            out.push(Violation::VesselCapacity { vessel, total, cap: cfg.vessel_cpu });
        }
        let count = a.offload_s.iter().filter(|row| row[vessel]).count();
        if count > limit {
            out.push(Violation::Antenna { vessel, count, limit });
        }
    }
    if let Some(res) = residency {
        check_dims("residency.uav", &res.uav, cfg.num_uav, cfg.num_miot)?;
        check_dims("residency.vessel", &res.vessel, cfg.num_vessel, cfg.num_uav)?;
        for miot in 0..cfg.num_miot {
            for uav in 0..cfg.num_uav {
                if a.alloc_u[miot][uav] > 0.0 && !res.uav_eligible(a, uav, miot) {
                    out.push(Violation::NonResidentUav { miot, uav });
                }
            }
        }
        for uav in 0..cfg.num_uav {
            for vessel in 0..cfg.num_vessel {
                if a.alloc_v[uav][vessel] > 0.0 && !res.vessel_eligible(a, vessel, uav) {
                    out.push(Violation::NonResidentVessel { uav, vessel });
                }
            }
        }
    }
    Ok(out)
}

/// MIoT backlog recursion: `max(q − τ·rate + arrival, 0)`.
pub fn step_miot_queue(q: f64, served_rate: f64, arrival: f64, tau: f64) -> f64 {
    (q - tau * served_rate + arrival).max(0.0)
}

/// UAV backlog recursion; `local_bits_processed` is the compute budget `τ·f/c` in bits.
pub fn step_uav_queue(q: f64, in_rate: f64, out_rate: f64, local_bits_processed: f64, tau: f64) -> f64 {
    (q - out_rate * tau - local_bits_processed + in_rate * tau).max(0.0)
}

pub fn step_vessel_queue(q: f64, in_rate: f64, bits_processed: f64, tau: f64) -> f64 {
    (q - bits_processed + in_rate * tau).max(0.0)
}

/// The integer form used by the simulator: `max(q + inflow − capacity, 0)`.
pub fn advance_backlog(q: u64, inflow: u64, service_cap: u64) -> u64 {
    (q + inflow).saturating_sub(service_cap)
}

/// Bits a link of `rate` bits/s moves in one slot.
pub fn link_budget(rate: f64, tau: f64) -> u64 {
    (tau * rate).floor().max(0.0) as u64
}

/// Bits a CPU of `cycles_per_sec` finishes in one slot.
pub fn cpu_budget(cycles_per_sec: f64, cycles_per_bit: f64, tau: f64) -> u64 {
    (tau * cycles_per_sec / cycles_per_bit).floor().max(0.0) as u64
}

/// Transmission to a UAV plus computation there.
pub fn uav_task_delay(d: f64, c: f64, r_m2u: f64, f_u: f64) -> Result<f64> {
    if d == 0.0 {
        return Ok(0.0);
    }
    if r_m2u <= 0.0 || f_u <= 0.0 {
        return Err(MecError::UndefinedDelay(format!("UAV path with rate {r_m2u} and CPU {f_u}")));
    }
    Ok(d / r_m2u + d * c / f_u)
}

/// Transmission to a UAV, relay to a vessel, computation on the vessel.
pub fn vessel_task_delay(d: f64, c: f64, r_m2u: f64, r_u2v: f64, f_v: f64) -> Result<f64> {
    if d == 0.0 {
        return Ok(0.0);
    }
    if r_m2u <= 0.0 || r_u2v <= 0.0 || f_v <= 0.0 {
        return Err(MecError::UndefinedDelay(format!(
            "vessel path with rates {r_m2u}, {r_u2v} and CPU {f_v}"
        )));
    }
    Ok(d / r_m2u + d / r_u2v + d * c / f_v)
}

/// Service delay charged to each MIoT's slot task along the path the action
/// selects. Local processing, zero-size tasks and paths with a zero rate or
/// allocation are charged nothing.
pub fn task_delays(task_bits: &[u64], a: &JointAction, rates: &LinkRateTable, cfg: &SimConfig) -> Vec<f64> {
    let c = cfg.cycles_per_bit;
    task_bits
        .iter()
        .enumerate()
        .map(|(i, &bits)| {
            let d = bits as f64;
            let Some(j) = a.target_uav(i) else { return 0.0 };
            let delay = match a.relay_vessel(j) {
                Some(k) => vessel_task_delay(d, c, rates.m2u_rate[i][j], rates.u2v_rate[j][k], a.alloc_v[j][k]),
                None => uav_task_delay(d, c, rates.m2u_rate[i][j], a.alloc_u[i][j]),
            };
            delay.unwrap_or(0.0)
        })
        .collect()
}

/// Φ(t): total service delay of the slot's tasks.
pub fn slot_cost_phi(delays: &[f64]) -> f64 {
    delays.iter().sum()
}

pub fn average_cost(history: &[f64]) -> Result<f64> {
    if history.is_empty() {
        return Err(MecError::EmptyHistory);
    }
    Ok(history.iter().sum::<f64>() / history.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean arrival→finish time over completed tasks, seconds.
    pub avg_completion: f64,
    /// Mean arrival→first-service time over completed tasks, seconds.
    pub avg_response: f64,
    /// Share of processed bits handled by UAVs and vessels, percent.
    pub edge_pct: f64,
    pub completed_tasks: usize,
    pub incomplete_tasks: usize,
    /// Like `avg_completion`, but unfinished tasks count up to the end of the run.
    pub avg_completion_censored: f64,
}

/// Reduces task records to the headline metrics. `horizon_end` (seconds)
/// censors tasks still in flight.
pub fn metrics(records: &[TaskRecord], processed: &TierBits, horizon_end: f64) -> Result<Metrics> {
    let real: Vec<&TaskRecord> = records.iter().filter(|r| r.data_bits > 0).collect();
    let done: Vec<&TaskRecord> = real.iter().copied().filter(|r| r.finish.is_some()).collect();
    if done.is_empty() {
        return Err(MecError::EmptyMetric);
    }
    let n = done.len() as f64;
    let avg_completion = done.iter().map(|r| r.finish.unwrap() - r.arrival_time).sum::<f64>() / n;
    let avg_response = done
        .iter()
        .map(|r| r.first_service.expect("finished tasks were served") - r.arrival_time)
        .sum::<f64>()
        / n;
    let censored = real
        .iter()
        .map(|r| r.finish.unwrap_or(horizon_end.max(r.arrival_time)) - r.arrival_time)
        .sum::<f64>()
        / real.len() as f64;
    let total = processed.total();
    let edge_pct = if total == 0 { 0.0 } else { 100.0 * (processed.uav + processed.vessel) as f64 / total as f64 };
    Ok(Metrics {
        avg_completion,
        avg_response,
        edge_pct,
        completed_tasks: done.len(),
        incomplete_tasks: real.len() - done.len(),
        avg_completion_censored: censored,
    })
}

/// One CSV row per task: arrival, first service, completion and per-tier bits.
pub fn write_event_log<W: Write>(records: &[TaskRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "task", "origin_miot", "arrival_slot", "arrival_time", "data_bits", "first_service", "finish",
        "miot_bits", "uav_bits", "vessel_bits",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.id.to_string(),
            r.origin_miot.to_string(),
            r.arrival_slot.to_string(),
            r.arrival_time.to_string(),
            r.data_bits.to_string(),
            opt(r.first_service),
            opt(r.finish),
            r.processed.miot.to_string(),
            r.processed.uav.to_string(),
            r.processed.vessel.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
