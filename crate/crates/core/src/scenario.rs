//! Static configuration, node placement, UAV mobility and task arrivals.
//!
//! Every random quantity is drawn from its own ChaCha stream keyed by
//! `(seed, purpose, index)`. Adding a UAV therefore never perturbs the
//! positions of the existing ones, the MIoT placement, or the arrival
//! process, which keeps sweeps over node counts paired.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{MecError, Result};

/// Simulation parameters. Field names are the config-file keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_miot: usize,
    pub num_uav: usize,
    pub num_vessel: usize,
    /// Side of the square deployment area, meters.
    pub area_side: f64,
    /// Slot length τ, seconds.
    pub slot_len: f64,
    /// Horizon T, slots per episode.
    pub horizon: usize,
    /// Mean task size λ in units of `data_unit_bits`.
    pub arrival_mean: f64,
    /// Bits per arrival unit (1 Mbit by default).
    pub data_unit_bits: f64,
    /// Tail mass cut off when clamping Poisson arrivals to `A^max`.
    pub arrival_tail: f64,
    pub cycles_per_bit: f64,
    pub uav_cpu: f64,
    pub vessel_cpu: f64,
    /// Fallback CPU of each MIoT, cycles/s. Zero forces pure offloading.
    pub miot_local_cpu: f64,
    pub zeta_los: f64,
    pub zeta_nlos: f64,
    pub alpha_env: f64,
    pub beta_env: f64,
    pub carrier_hz: f64,
    pub light_speed: f64,
    /// MIoT uplink bandwidth B_0, Hz.
    pub bandwidth: f64,
    pub miot_power: f64,
    pub noise_dbm: f64,
    pub ref_gain_db: f64,
    /// Number of orthogonal UAV→vessel channels L.
    pub channels: usize,
    /// Per-channel UAV→vessel bandwidth B, Hz.
    pub uav_bandwidth: f64,
    pub uav_power: f64,
    pub miot_height: f64,
    pub uav_height: f64,
    /// Antennas per vessel. `None` means `min(2, num_uav)`.
    pub antenna_limit: Option<usize>,
    /// Drift-plus-penalty trade-off V.
    pub lyapunov_v: f64,
    /// UAV random-waypoint speed, m/s. Zero disables mobility.
    pub uav_speed: f64,
    /// Maximum MIoT→UAV link distance (horizontal, meters). `None` is unlimited.
    pub comm_range: Option<f64>,
    /// Reward normaliser ρ. `None` means `num_miot · (λ · data_unit_bits)²`.
    pub reward_scale: Option<f64>,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_miot: 3,
            num_uav: 2,
            num_vessel: 1,
            area_side: 1000.0,
            slot_len: 1.0,
            horizon: 100,
            arrival_mean: 15.0,
            data_unit_bits: 1e6,
            arrival_tail: 1e-6,
            cycles_per_bit: 270.0,
            uav_cpu: 1e9,
            vessel_cpu: 1e10,
            miot_local_cpu: 1e8,
            zeta_los: 2.3,
            zeta_nlos: 34.0,
            alpha_env: 5.0188,
            beta_env: 0.3511,
            carrier_hz: 2e9,
            light_speed: 3e8,
            bandwidth: 1e6,
            miot_power: 0.5,
            noise_dbm: -114.0,
            ref_gain_db: -50.0,
            channels: 2,
            uav_bandwidth: 20e6,
            uav_power: 5.0,
            miot_height: 0.0,
            uav_height: 30.0,
            antenna_limit: None,
            lyapunov_v: 1e12,
            uav_speed: 10.0,
            comm_range: None,
            reward_scale: None,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    /// The evaluation scenario with 10 MIoTs, 6 UAVs and 2 vessels.
    pub fn full_scale() -> Self {
        SimConfig {
            num_miot: 10,
            num_uav: 6,
            num_vessel: 2,
            ..SimConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| MecError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("SimConfig serialises to TOML")
    }

    pub fn antennas(&self) -> usize {
        self.antenna_limit.unwrap_or_else(|| self.num_uav.min(2))
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Compute work per slot expressed in bits: `τ·f/c`.
    pub fn cpu_bits_per_slot(&self, cycles_per_sec: f64) -> f64 {
        self.slot_len * cycles_per_sec / self.cycles_per_bit
    }

    pub fn mean_task_bits(&self) -> f64 {
        self.arrival_mean * self.data_unit_bits
    }

    pub fn reward_norm(&self) -> f64 {
        self.reward_scale.unwrap_or_else(|| {
            let m = self.mean_task_bits().max(self.data_unit_bits);
            self.num_miot as f64 * m * m
        })
    }

    /// Largest arrival in units, i.e. the `1 - arrival_tail` Poisson quantile.
    pub fn arrival_cap_units(&self) -> u64 {
        poisson_quantile(self.arrival_mean, 1.0 - self.arrival_tail)
    }

    pub fn arrival_cap_bits(&self) -> u64 {
        (self.arrival_cap_units() as f64 * self.data_unit_bits).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_side", self.area_side),
            ("slot_len", self.slot_len),
            ("data_unit_bits", self.data_unit_bits),
            ("cycles_per_bit", self.cycles_per_bit),
            ("uav_cpu", self.uav_cpu),
            ("vessel_cpu", self.vessel_cpu),
            ("carrier_hz", self.carrier_hz),
            ("light_speed", self.light_speed),
            ("bandwidth", self.bandwidth),
            ("miot_power", self.miot_power),
            ("uav_bandwidth", self.uav_bandwidth),
            ("uav_power", self.uav_power),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(MecError::validation(key, format!("must be finite and > 0, got {v}")));
            }
        }
        let non_negative = [
            ("arrival_mean", self.arrival_mean),
            ("miot_local_cpu", self.miot_local_cpu),
            ("lyapunov_v", self.lyapunov_v),
            ("uav_speed", self.uav_speed),
            ("miot_height", self.miot_height),
        ];
        for (key, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MecError::validation(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        let finite = [
            ("zeta_los", self.zeta_los),
            ("zeta_nlos", self.zeta_nlos),
            ("alpha_env", self.alpha_env),
            ("beta_env", self.beta_env),
            ("noise_dbm", self.noise_dbm),
            ("ref_gain_db", self.ref_gain_db),
            ("uav_height", self.uav_height),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(MecError::validation(key, "must be finite"));
            }
        }
        for (key, n) in [
            ("num_miot", self.num_miot),
            ("num_uav", self.num_uav),
            ("num_vessel", self.num_vessel),
            ("horizon", self.horizon),
            ("channels", self.channels),
        ] {
            if n == 0 {
                return Err(MecError::validation(key, "must be >= 1"));
            }
        }
        if !(self.arrival_tail > 0.0 && self.arrival_tail < 1.0) {
            return Err(MecError::validation("arrival_tail", "must lie in (0, 1)"));
        }
        if self.uav_height <= self.miot_height {
            return Err(MecError::validation("uav_height", "must exceed miot_height"));
        }
        if let Some(n) = self.antenna_limit {
            if n == 0 || n > self.num_uav {
                return Err(MecError::validation(
                    "antenna_limit",
                    format!("must lie in 1..={}, got {n}", self.num_uav),
                ));
            }
        }
        if let Some(r) = self.comm_range {
            if !(r.is_finite() && r > 0.0) {
                return Err(MecError::validation("comm_range", "must be finite and > 0"));
            }
        }
        if let Some(r) = self.reward_scale {
            if !(r.is_finite() && r > 0.0) {
                return Err(MecError::validation("reward_scale", "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Reads and validates a TOML config file. Omitted keys keep their defaults.
pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    SimConfig::from_toml_str(&text)
}

/// Smallest `k` with `P(X <= k) >= level` for `X ~ Poisson(mean)`.
pub fn poisson_quantile(mean: f64, level: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let ln_mean = mean.ln();
    let limit = (mean + 60.0 * mean.sqrt() + 100.0) as u64;
    let mut cdf = 0.0;
    let mut ln_fact = 0.0;
    for k in 0..=limit {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        cdf += (-mean + k as f64 * ln_mean - ln_fact).exp();
        if cdf >= level {
            return k;
        }
    }
    limit
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub miot: Vec<Position>,
    pub uav: Vec<Position>,
    pub vessel: Vec<Position>,
}

impl NodeSet {
    pub fn within_area(&self, cfg: &SimConfig) -> bool {
        let inside = |p: &Position| {
            (0.0..=cfg.area_side).contains(&p.x) && (0.0..=cfg.area_side).contains(&p.y)
        };
        self.miot.iter().all(|p| inside(p) && p.z == cfg.miot_height)
            && self.uav.iter().all(|p| inside(p) && p.z == cfg.uav_height)
            && self.vessel.iter().all(|p| inside(p) && p.z == 0.0)
    }
}

/// One task `A_i(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub origin_miot: usize,
    pub arrival_slot: usize,
    pub data_bits: u64,
    pub cycles_per_bit: f64,
}

#[derive(Clone, Copy, Debug)]
#[repr(u64)]
enum Purpose {
    MiotPlacement = 1,
    UavPlacement = 2,
    VesselPlacement = 3,
    Arrival = 4,
    Mobility = 5,
}

/// Seeded source of independent per-purpose random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStreams {
    seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        SeedStreams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn stream(&self, purpose: Purpose, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((purpose as u64) << 56) ^ index);
        rng
    }
}

/// Derives a child seed; used for per-episode and per-cell seeding.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn uniform_xy(rng: &mut ChaCha8Rng, side: f64) -> (f64, f64) {
    (rng.random::<f64>() * side, rng.random::<f64>() * side)
}

pub fn generate_topology(cfg: &SimConfig, streams: &SeedStreams) -> NodeSet {
    let side = cfg.area_side;
    let miot = (0..cfg.num_miot)
        .map(|i| {
            let (x, y) = uniform_xy(&mut streams.stream(Purpose::MiotPlacement, i as u64), side);
            Position::new(x, y, cfg.miot_height)
        })
        .collect();
    let uav = (0..cfg.num_uav)
        .map(|j| {
            let (x, y) = uniform_xy(&mut streams.stream(Purpose::UavPlacement, j as u64), side);
            Position::new(x, y, cfg.uav_height)
        })
        .collect();
    let vessel = (0..cfg.num_vessel)
        .map(|k| {
            let (x, y) = uniform_xy(&mut streams.stream(Purpose::VesselPlacement, k as u64), side);
            Position::new(x, y, 0.0)
        })
        .collect();
    NodeSet { miot, uav, vessel }
}

/// One task per MIoT for `slot`; sizes are Poisson in data units, clamped to `A^max`.
pub fn sample_arrivals(cfg: &SimConfig, slot: usize, streams: &SeedStreams) -> Vec<Task> {
    let cap = cfg.arrival_cap_units();
    let poisson = (cfg.arrival_mean > 0.0).then(|| Poisson::new(cfg.arrival_mean).expect("positive mean"));
    (0..cfg.num_miot)
        .map(|i| {
            let units = match &poisson {
                Some(p) => {
                    let mut rng = streams.stream(Purpose::Arrival, ((slot as u64) << 20) | i as u64);
                    (p.sample(&mut rng) as u64).min(cap)
                }
                None => 0,
            };
            Task {
                origin_miot: i,
                arrival_slot: slot,
                data_bits: (units as f64 * cfg.data_unit_bits).round() as u64,
                cycles_per_bit: cfg.cycles_per_bit,
            }
        })
        .collect()
}

/// Random-waypoint state of every UAV.
#[derive(Clone, Debug)]
pub struct Mobility {
    waypoints: Vec<(f64, f64)>,
    rngs: Vec<ChaCha8Rng>,
}

impl Mobility {
    pub fn new(cfg: &SimConfig, streams: &SeedStreams) -> Self {
        let mut rngs: Vec<ChaCha8Rng> =
            (0..cfg.num_uav).map(|j| streams.stream(Purpose::Mobility, j as u64)).collect();
        let waypoints = rngs.iter_mut().map(|r| uniform_xy(r, cfg.area_side)).collect();
        Mobility { waypoints, rngs }
    }
}

/// Moves every UAV one slot toward its waypoint; MIoTs and vessels are static.
pub fn advance_positions(nodes: &NodeSet, cfg: &SimConfig, mobility: &mut Mobility) -> NodeSet {
    let mut next = nodes.clone();
    let step = cfg.uav_speed * cfg.slot_len;
    if step <= 0.0 {
        return next;
    }
    for (j, p) in next.uav.iter_mut().enumerate() {
        let mut budget = step;
        // A waypoint reached mid-step is replaced and the remainder of the step continues.
        for _ in 0..4 {
            let (wx, wy) = mobility.waypoints[j];
            let (dx, dy) = (wx - p.x, wy - p.y);
            let dist = dx.hypot(dy);
            if dist > budget {
                p.x += dx / dist * budget;
                p.y += dy / dist * budget;
                break;
            }
            p.x = wx;
            p.y = wy;
            budget -= dist;
            mobility.waypoints[j] = uniform_xy(&mut mobility.rngs[j], cfg.area_side);
            if budget <= 0.0 {
                break;
            }
        }
        p.x = p.x.clamp(0.0, cfg.area_side);
        p.y = p.y.clamp(0.0, cfg.area_side);
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_table_defaults() {
        let cfg = SimConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.arrival_mean, 15.0);
        assert_eq!(cfg.cycles_per_bit, 270.0);
        assert_eq!(cfg.uav_cpu, 1e9);
        assert_eq!(cfg.vessel_cpu, 1e10);
        assert_eq!(cfg.bandwidth, 1e6);
        assert_eq!(cfg.miot_power, 0.5);
        assert_eq!(cfg.noise_dbm, -114.0);
        assert_eq!(cfg.ref_gain_db, -50.0);
        assert_eq!(cfg.channels, 2);
        assert_eq!(cfg.uav_bandwidth, 20e6);
        assert_eq!(cfg.uav_power, 5.0);
        assert_eq!((cfg.miot_height, cfg.uav_height), (0.0, 30.0));
    }

    #[test]
    fn counts_are_read_from_file() {
        let cfg = SimConfig::from_toml_str("num_miot = 10\nnum_uav = 6\nnum_vessel = 2\n").unwrap();
        assert_eq!((cfg.num_miot, cfg.num_uav, cfg.num_vessel), (10, 6, 2));
    }

    #[test]
    fn negative_slot_is_rejected_by_key() {
        match SimConfig::from_toml_str("slot_len = -1.0") {
            Err(MecError::Validation { key, .. }) => assert_eq!(key, "slot_len"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_and_unknown_keys_fail_to_parse() {
        assert!(matches!(SimConfig::from_toml_str("num_miot = ["), Err(MecError::Parse(_))));
        assert!(matches!(SimConfig::from_toml_str("bogus = 1"), Err(MecError::Parse(_))));
    }

    #[test]
    fn antenna_limit_bounds() {
        assert!(SimConfig::from_toml_str("num_uav = 2\nantenna_limit = 3").is_err());
        assert!(SimConfig::from_toml_str("antenna_limit = 0").is_err());
        assert_eq!(SimConfig::from_toml_str("num_uav = 1").unwrap().antennas(), 1);
    }

    #[test]
    fn noise_conversion() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(-114.0) / 3.981_071_705_534_97e-15 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uav_heights_and_area() {
        let cfg = SimConfig { num_uav: 5, ..SimConfig::default() };
        let nodes = generate_topology(&cfg, &SeedStreams::new(3));
        assert!(nodes.uav.iter().all(|p| p.z == 30.0));
        assert!(nodes.within_area(&cfg));
    }

    #[test]
    fn topology_is_deterministic_and_nested() {
        let cfg = SimConfig::default();
        let a = generate_topology(&cfg, &SeedStreams::new(11));
        let b = generate_topology(&cfg, &SeedStreams::new(11));
        assert_eq!(a, b);
        let big = generate_topology(&SimConfig { num_uav: 6, ..cfg.clone() }, &SeedStreams::new(11));
        assert_eq!(&big.uav[..2], &a.uav[..]);
        assert_eq!(big.miot, a.miot);
    }

    #[test]
    fn distinct_seeds_give_distinct_topologies() {
        let cfg = SimConfig::default();
        let collisions = (0..100u64)
            .filter(|s| {
                generate_topology(&cfg, &SeedStreams::new(2 * s))
                    == generate_topology(&cfg, &SeedStreams::new(2 * s + 1))
            })
            .count();
        assert_eq!(collisions, 0);
    }

    #[test]
    fn poisson_quantile_known_values() {
        // P(X <= 15 | λ=15) ≈ 0.568 so the median quantile is 15.
        assert_eq!(poisson_quantile(15.0, 0.5), 15);
        assert_eq!(poisson_quantile(0.0, 0.999), 0);
        let cap = poisson_quantile(15.0, 1.0 - 1e-6);
        assert!((35..=40).contains(&cap), "cap {cap}");
    }

    #[test]
    fn zero_rate_gives_empty_tasks() {
        let cfg = SimConfig { arrival_mean: 0.0, ..SimConfig::default() };
        for slot in 0..20 {
            assert!(sample_arrivals(&cfg, slot, &SeedStreams::new(1)).iter().all(|t| t.data_bits == 0));
        }
    }

    #[test]
    fn arrival_moments_match_poisson() {
        let cfg = SimConfig { num_miot: 1, ..SimConfig::default() };
        let streams = SeedStreams::new(99);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|t| sample_arrivals(&cfg, t, &streams)[0].data_bits as f64 / 1e6)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((14.9..=15.1).contains(&mean), "mean {mean}");
        assert!((14.5..=15.5).contains(&var), "var {var}");
    }

    #[test]
    fn one_task_per_miot_with_config_cycles() {
        let cfg = SimConfig { num_miot: 4, ..SimConfig::default() };
        let tasks = sample_arrivals(&cfg, 7, &SeedStreams::new(5));
        assert_eq!(tasks.len(), 4);
        for (i, t) in tasks.iter().enumerate() {
            assert_eq!((t.origin_miot, t.arrival_slot, t.cycles_per_bit), (i, 7, 270.0));
        }
    }

    #[test]
    fn zero_speed_freezes_uavs() {
        let cfg = SimConfig { uav_speed: 0.0, ..SimConfig::default() };
        let streams = SeedStreams::new(4);
        let nodes = generate_topology(&cfg, &streams);
        let mut mob = Mobility::new(&cfg, &streams);
        assert_eq!(advance_positions(&nodes, &cfg, &mut mob), nodes);
    }

    #[test]
    fn uav_steps_are_bounded_and_inside() {
        let cfg = SimConfig { num_uav: 4, ..SimConfig::default() };
        let streams = SeedStreams::new(8);
        let mut nodes = generate_topology(&cfg, &streams);
        nodes.uav[0] = Position::new(0.0, 0.0, cfg.uav_height);
        nodes.uav[1] = Position::new(1000.0, 1000.0, cfg.uav_height);
        let mut mob = Mobility::new(&cfg, &streams);
        let mut max_step: f64 = 0.0;
        for _ in 0..1000 {
            let next = advance_positions(&nodes, &cfg, &mut mob);
            for (a, b) in nodes.uav.iter().zip(&next.uav) {
                max_step = max_step.max(a.distance(b));
            }
            assert!(next.within_area(&cfg));
            assert_eq!(next.miot, nodes.miot);
            assert_eq!(next.vessel, nodes.vessel);
            nodes = next;
        }
        assert!(max_step <= 10.0 + 1e-9, "max step {max_step}");
        assert!(max_step > 9.0);
    }
}
