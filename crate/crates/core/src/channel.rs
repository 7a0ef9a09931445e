//! Air-to-ground and UAV-to-vessel link models.

use serde::{Deserialize, Serialize};

use crate::error::{MecError, Result};
use crate::scenario::{NodeSet, Position, SimConfig};

/// Elevation of `uav` seen from `miot`, radians. Directly overhead is π/2.
pub fn elevation_angle(miot: &Position, uav: &Position) -> f64 {
    (uav.z - miot.z).abs().atan2(miot.horizontal_distance(uav))
}

/// Mean air-to-ground path loss in dB: LoS/NLoS sigmoid over elevation in
/// degrees plus free-space loss over the 3-D distance.
pub fn path_loss_db(miot: &Position, uav: &Position, cfg: &SimConfig) -> Result<f64> {
    let d = miot.distance(uav);
    if d <= 0.0 {
        return Err(MecError::Domain("path loss undefined for coincident positions".into()));
    }
    let gamma_deg = elevation_angle(miot, uav).to_degrees();
    let los = (cfg.zeta_los - cfg.zeta_nlos)
        / (1.0 + cfg.alpha_env * (-cfg.beta_env * (gamma_deg - cfg.alpha_env)).exp());
    let fspl = 20.0 * (4.0 * std::f64::consts::PI * d * cfg.carrier_hz / cfg.light_speed).log10();
    Ok(los + fspl + cfg.zeta_nlos)
}

/// MIoT→UAV rate in bits/s. Zero when the link is not selected.
pub fn m2u_rate(selected: bool, path_loss_db: f64, cfg: &SimConfig) -> f64 {
    if !selected {
        return 0.0;
    }
    let gain = 10f64.powf(-path_loss_db / 10.0);
    cfg.bandwidth * (1.0 + cfg.miot_power * gain / cfg.noise_watts()).log2()
}

/// UAV→vessel power gain, `10^(G0/10) / d²`.
pub fn u2v_gain(uav: &Position, vessel: &Position, ref_gain_db: f64) -> Result<f64> {
    let d = uav.distance(vessel);
    if d <= 0.0 {
        return Err(MecError::Domain("channel gain undefined for coincident positions".into()));
    }
    Ok(10f64.powf(ref_gain_db / 10.0) / (d * d))
}

/// UAV→vessel rate in bits/s. The `channels · uav_bandwidth` pool of a vessel
/// is split equally among the `assign_count` UAVs relaying to it.
pub fn u2v_rate(selected: bool, assign_count: usize, gain: f64, cfg: &SimConfig) -> Result<f64> {
    if !selected {
        return Ok(0.0);
    }
    if assign_count == 0 {
        return Err(MecError::Contract("selected UAV→vessel link with zero assigned UAVs".into()));
    }
    let pool = cfg.channels as f64 * cfg.uav_bandwidth;
    Ok(pool / assign_count as f64 * (1.0 + cfg.uav_power * gain / cfg.noise_watts()).log2())
}

/// Per-slot link quantities, all matrices indexed `[sender][receiver]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkRateTable {
    pub m2u_rate: Vec<Vec<f64>>,
    pub u2v_rate: Vec<Vec<f64>>,
    pub path_loss: Vec<Vec<f64>>,
    pub u2v_gain: Vec<Vec<f64>>,
}

impl LinkRateTable {
    /// Rates gated by the offloading matrices `o` (I×J) and `s` (J×K).
    pub fn compute(nodes: &NodeSet, o: &[Vec<bool>], s: &[Vec<bool>], cfg: &SimConfig) -> Result<Self> {
        let (i_n, j_n, k_n) = (nodes.miot.len(), nodes.uav.len(), nodes.vessel.len());
        check_dims("offload_o", o, i_n, j_n)?;
        check_dims("offload_s", s, j_n, k_n)?;
        let path_loss = path_loss_matrix(nodes, cfg)?;
        let u2v_gain = gain_matrix(nodes, cfg)?;
        let m2u_rate = (0..i_n)
            .map(|i| (0..j_n).map(|j| m2u_rate(o[i][j], path_loss[i][j], cfg)).collect())
            .collect();
        let counts: Vec<usize> = (0..k_n).map(|k| (0..j_n).filter(|&j| s[j][k]).count()).collect();
        let mut u2v_rate = vec![vec![0.0; k_n]; j_n];
        for j in 0..j_n {
            for k in 0..k_n {
                u2v_rate[j][k] = self::u2v_rate(s[j][k], counts[k], u2v_gain[j][k], cfg)?;
            }
        }
        Ok(LinkRateTable { m2u_rate, u2v_rate, path_loss, u2v_gain })
    }
}

pub(crate) fn check_dims<T>(what: &'static str, m: &[Vec<T>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows {
        return Err(MecError::Dimension { what, expected: rows, got: m.len() });
    }
    for row in m {
        if row.len() != cols {
            return Err(MecError::Dimension { what, expected: cols, got: row.len() });
        }
    }
    Ok(())
}

pub fn path_loss_matrix(nodes: &NodeSet, cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    nodes
        .miot
        .iter()
        .map(|m| nodes.uav.iter().map(|u| path_loss_db(m, u, cfg)).collect())
        .collect()
}

pub fn gain_matrix(nodes: &NodeSet, cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    nodes
        .uav
        .iter()
        .map(|u| nodes.vessel.iter().map(|v| u2v_gain(u, v, cfg.ref_gain_db)).collect())
        .collect()
}

/// Rate every MIoT would get from every UAV if that link were selected.
pub fn potential_m2u_rates(nodes: &NodeSet, cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    Ok(path_loss_matrix(nodes, cfg)?
        .into_iter()
        .map(|row| row.into_iter().map(|pl| m2u_rate(true, pl, cfg)).collect())
        .collect())
}

/// Whether MIoT `miot` can reach `uav` under the configured communication range.
pub fn in_range(miot: &Position, uav: &Position, cfg: &SimConfig) -> bool {
    cfg.comm_range.is_none_or(|r| miot.horizontal_distance(uav) <= r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> Position {
        Position::new(0.0, 0.0, 0.0)
    }

    #[test]
    fn elevation_fixtures() {
        let m = origin();
        assert_eq!(elevation_angle(&m, &Position::new(0.0, 0.0, 30.0)), std::f64::consts::FRAC_PI_2);
        let a = elevation_angle(&m, &Position::new(30.0, 0.0, 30.0));
        assert!((a - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        let a = elevation_angle(&m, &Position::new(100.0, 0.0, 30.0));
        assert!((a - 0.3f64.atan()).abs() < 1e-15);
        assert!((a - 0.2915).abs() < 1e-4);
    }

    #[test]
    fn fspl_term_vanishes_at_reference_distance() {
        let cfg = SimConfig::default();
        let d0 = cfg.light_speed / (4.0 * std::f64::consts::PI * cfg.carrier_hz);
        let pl = path_loss_db(&origin(), &Position::new(0.0, 0.0, d0), &cfg).unwrap();
        let expect = cfg.zeta_nlos
            + (cfg.zeta_los - cfg.zeta_nlos)
                / (1.0 + cfg.alpha_env * (-cfg.beta_env * (90.0 - cfg.alpha_env)).exp());
        assert!((pl - expect).abs() < 1e-12, "{pl} vs {expect}");
    }

    #[test]
    fn doubling_distance_adds_six_db() {
        let cfg = SimConfig::default();
        let near = path_loss_db(&origin(), &Position::new(100.0, 0.0, 30.0), &cfg).unwrap();
        let far = path_loss_db(&origin(), &Position::new(200.0, 0.0, 60.0), &cfg).unwrap();
        assert!((far - near - 20.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn coincident_positions_are_domain_errors() {
        let cfg = SimConfig::default();
        let p = Position::new(1.0, 2.0, 3.0);
        assert!(matches!(path_loss_db(&p, &p, &cfg), Err(MecError::Domain(_))));
        assert!(matches!(u2v_gain(&p, &p, -50.0), Err(MecError::Domain(_))));
    }

    #[test]
    fn gates_and_limits() {
        let cfg = SimConfig::default();
        assert_eq!(m2u_rate(false, 90.0, &cfg), 0.0);
        let quiet = SimConfig { miot_power: 1e-30, ..cfg.clone() };
        assert!(m2u_rate(true, 90.0, &quiet) < 1e-6);
        assert_eq!(u2v_rate(false, 0, 1e-10, &cfg).unwrap(), 0.0);
        assert!(matches!(u2v_rate(true, 0, 1e-10, &cfg), Err(MecError::Contract(_))));
    }

    #[test]
    fn gain_fixtures() {
        let v = origin();
        assert!((u2v_gain(&Position::new(0.0, 0.0, 1.0), &v, -50.0).unwrap() - 1e-5).abs() < 1e-20);
        assert!((u2v_gain(&Position::new(0.0, 0.0, 10.0), &v, -50.0).unwrap() - 1e-7).abs() < 1e-22);
        let g = u2v_gain(&Position::new(0.0, 0.0, 316.23), &v, -50.0).unwrap();
        assert!((g - 1e-10).abs() < 1e-12);
    }

    #[test]
    fn shared_pool_halves_rate() {
        let cfg = SimConfig::default();
        let one = u2v_rate(true, 1, 1e-10, &cfg).unwrap();
        let two = u2v_rate(true, 2, 1e-10, &cfg).unwrap();
        assert_eq!(two * 2.0, one);
    }

    #[test]
    fn table_respects_gates_and_pool() {
        let cfg = SimConfig { num_uav: 3, ..SimConfig::default() };
        let nodes = crate::scenario::generate_topology(&cfg, &crate::scenario::SeedStreams::new(2));
        let o = vec![vec![true, false, false], vec![false, false, false], vec![false, true, true]];
        let s = vec![vec![true], vec![true], vec![false]];
        let t = LinkRateTable::compute(&nodes, &o, &s, &cfg).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.m2u_rate[i][j] > 0.0, o[i][j]);
            }
        }
        assert_eq!(t.u2v_rate[2][0], 0.0);
        // Each of the two relays gets half of the vessel's spectrum.
        let snr = |j: usize| 1.0 + cfg.uav_power * t.u2v_gain[j][0] / cfg.noise_watts();
        let share: f64 = (0..2).map(|j| t.u2v_rate[j][0] / snr(j).log2()).sum();
        assert!((share - cfg.channels as f64 * cfg.uav_bandwidth).abs() < 1e-6);
    }
}
