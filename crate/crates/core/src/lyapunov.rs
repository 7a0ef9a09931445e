//! Quadratic Lyapunov function, drift, the drift-plus-penalty objective and
//! a sample-path check of the drift bound.
//!
//! Backlogs are integers, so squares and drifts are accumulated in `i128`
//! and only converted to `f64` at the end.

use serde::{Deserialize, Serialize};

use crate::channel::{m2u_rate, path_loss_db, u2v_gain, u2v_rate, LinkRateTable};
use crate::error::{MecError, Result};
use crate::queueing::{validate_action, Flow, JointAction, QueueState, SlotLedger};
use crate::scenario::{Position, SimConfig};

fn sum_squares(q: &QueueState) -> u128 {
    q.iter().map(|x| x as u128 * x as u128).sum()
}

/// `½ Σ Q²` over every queue, bits².
pub fn lyapunov_value(q: &QueueState) -> f64 {
    sum_squares(q) as f64 / 2.0
}

fn drift_exact(q_t: &QueueState, q_next: &QueueState) -> i128 {
    // Twice the drift, kept integral.
    sum_squares(q_next) as i128 - sum_squares(q_t) as i128
}

/// Sample-path drift `L(q_next) − L(q_t)`.
pub fn drift(q_t: &QueueState, q_next: &QueueState) -> f64 {
    drift_exact(q_t, q_next) as f64 / 2.0
}

/// Per-slot bounds used by the constant D. Rates are bits/s, the rest bits per slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCaps {
    pub uav_rate: f64,
    pub vessel_rate: f64,
    pub arrival_bits: f64,
    pub uav_cpu_bits: f64,
    pub vessel_cpu_bits: f64,
}

impl RateCaps {
    /// Best-case rates: a UAV hovering directly above a MIoT, and a lone UAV
    /// directly above a vessel.
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        let miot = Position::new(0.0, 0.0, cfg.miot_height);
        let uav = Position::new(0.0, 0.0, cfg.uav_height);
        let vessel = Position::new(0.0, 0.0, 0.0);
        let uav_rate = m2u_rate(true, path_loss_db(&miot, &uav, cfg)?, cfg);
        let vessel_rate = u2v_rate(true, 1, u2v_gain(&uav, &vessel, cfg.ref_gain_db)?, cfg)?;
        Ok(RateCaps {
            uav_rate,
            vessel_rate,
            arrival_bits: cfg.arrival_cap_bits() as f64,
            uav_cpu_bits: cfg.cpu_bits_per_slot(cfg.uav_cpu),
            vessel_cpu_bits: cfg.cpu_bits_per_slot(cfg.vessel_cpu),
        })
    }
}

/// The drift-bound constant, term for term:
/// `½{ Σ_i[τR^u + A²] + Σ_j[(τR^v − τf^u/c)² + (τR^u)²] + Σ_k[(τR^v)² − (τf^v/c)²] }`.
pub fn constant_d(cfg: &SimConfig, caps: &RateCaps) -> f64 {
    let tau = cfg.slot_len;
    let ru = tau * caps.uav_rate;
    let rv = tau * caps.vessel_rate;
    let miot = ru + caps.arrival_bits * caps.arrival_bits;
    let uav = (rv - caps.uav_cpu_bits).powi(2) + ru * ru;
    let vessel = rv * rv - caps.vessel_cpu_bits * caps.vessel_cpu_bits;
    0.5 * (cfg.num_miot as f64 * miot + cfg.num_uav as f64 * uav + cfg.num_vessel as f64 * vessel)
}

/// The drift-plus-penalty objective C of one slot:
/// `VΦ − Σ_i Q^m τR^m2u + Σ_j Q^u (τR^m2u_in − τR^u2v_out − τF^u/c) + Σ_k Q^v (τR^u2v_in − τF^v/c)`.
pub fn per_slot_objective(
    q: &QueueState,
    a: &JointAction,
    rates: &LinkRateTable,
    phi: f64,
    v: f64,
    cfg: &SimConfig,
) -> Result<f64> {
    let violations = validate_action(a, cfg, None)?;
    if let Some(first) = violations.first() {
        return Err(MecError::Infeasible(first.to_string()));
    }
    let tau = cfg.slot_len;
    let c = cfg.cycles_per_bit;
    let mut total = v * phi;
    for (i, &qm) in q.miot.iter().enumerate() {
        let out: f64 = rates.m2u_rate[i].iter().sum();
        total -= qm as f64 * tau * out;
    }
    for (j, &qu) in q.uav.iter().enumerate() {
        let inflow: f64 = rates.m2u_rate.iter().map(|row| row[j]).sum();
        let relay: f64 = rates.u2v_rate[j].iter().sum();
        let compute = tau * a.uav_alloc_total(j) / c;
        total += qu as f64 * (tau * inflow - tau * relay - compute);
    }
    for (k, &qv) in q.vessel.iter().enumerate() {
        let inflow: f64 = rates.u2v_rate.iter().map(|row| row[k]).sum();
        let compute = tau * a.vessel_alloc_total(k) / c;
        total += qv as f64 * (tau * inflow - compute);
    }
    Ok(total)
}

/// `a² + b² + c² + 2a(c − b) − d²` for backlog `a`, service `b`, arrivals `c`
/// and next backlog `d`. Non-negative whenever `d = max(a − b + c, 0)`.
pub fn quadratic_lemma_slack(a: u64, b: u64, c: u64, d: u64) -> i128 {
    let (a, b, c, d) = (a as i128, b as i128, c as i128, d as i128);
    a * a + b * b + c * c + 2 * a * (c - b) - d * d
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub holds: bool,
    /// Smallest per-queue lemma slack, bits².
    pub min_queue_slack: f64,
    /// `D + V·Φ + Σ Q(c − b) − (ΔL + V·Φ)`, bits².
    pub aggregate_slack: f64,
}

fn flows<'a>(l: &'a SlotLedger) -> impl Iterator<Item = &'a Flow> {
    l.miot.iter().chain(&l.uav).chain(&l.vessel)
}

/// Checks the per-queue lemma and the aggregated drift-plus-penalty bound on
/// one transition. Service is the slot budget the recursion subtracts.
pub fn bound_check(q_t: &QueueState, q_next: &QueueState, ledger: &SlotLedger, v: f64, phi: f64, d: f64) -> BoundCheck {
    let mut min_slack = i128::MAX;
    let mut linear: i128 = 0;
    for ((a, dn), f) in q_t.iter().zip(q_next.iter()).zip(flows(ledger)) {
        min_slack = min_slack.min(quadratic_lemma_slack(a, f.service_cap, f.inflow, dn));
        linear += a as i128 * (f.inflow as i128 - f.service_cap as i128);
    }
    // 2·(Σ Q(c − b) − ΔL), exact. V·Φ sits on both sides of the bound and
    // cancels, so it never touches the floating-point slack.
    let twice_gap = 2 * linear - drift_exact(q_t, q_next);
    let aggregate_slack = d + twice_gap as f64 / 2.0;
    let _ = (v, phi);
    BoundCheck { holds: min_slack >= 0 && aggregate_slack >= 0.0, min_queue_slack: min_slack as f64, aggregate_slack }
}

/// One row of the drift log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub slot: usize,
    pub l_t: f64,
    pub l_next: f64,
    pub drift: f64,
    pub penalty: f64,
    pub objective: f64,
    pub bound_rhs: f64,
    pub d: f64,
    pub bound_slack: f64,
    pub lemma_slack: f64,
    pub holds: bool,
}

impl DriftReport {
    pub fn new(q_t: &QueueState, q_next: &QueueState, ledger: &SlotLedger, objective: f64, v: f64, d: f64) -> Self {
        let check = bound_check(q_t, q_next, ledger, v, ledger.phi, d);
        let drift = drift(q_t, q_next);
        let penalty = v * ledger.phi;
        DriftReport {
            slot: ledger.slot,
            l_t: lyapunov_value(q_t),
            l_next: lyapunov_value(q_next),
            drift,
            penalty,
            objective,
            bound_rhs: drift + penalty + check.aggregate_slack,
            d,
            bound_slack: check.aggregate_slack,
            lemma_slack: check.min_queue_slack,
            holds: check.holds,
        }
    }
}
