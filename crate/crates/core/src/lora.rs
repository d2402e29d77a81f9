//! Outdoor RF tier: spreading-factor parameter table, Friis path loss,
//! Rayleigh block fading, noise arithmetic, and the base-station decode rule.
//!
//! A packet in an RF slot is decoded only if it is the strongest one, its
//! SNR clears the SF-specific threshold, and it beats every co-slot
//! interferer by the power margin `ε` (6 dB at the default ε = 4).

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::units;

/// One row of the spreading-factor parameter table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfRow {
    pub sf: u8,
    pub bit_rate_bps: f64,
    /// RF slot duration, seconds.
    pub t_rf_s: f64,
    /// Reception SNR threshold, dB.
    pub q_sf_db: f64,
    /// Nominal AP-to-BS distance for this SF, km.
    pub d_sf_km: f64,
}

/// LoRa uplink characteristics at BW = 125 kHz.
pub const SF_TABLE: [SfRow; 6] = [
    SfRow { sf: 7, bit_rate_bps: 5470.0, t_rf_s: 0.0366, q_sf_db: -6.0, d_sf_km: 1.0 },
    SfRow { sf: 8, bit_rate_bps: 3130.0, t_rf_s: 0.064, q_sf_db: -9.0, d_sf_km: 3.0 },
    SfRow { sf: 9, bit_rate_bps: 1760.0, t_rf_s: 0.113, q_sf_db: -12.0, d_sf_km: 5.0 },
    SfRow { sf: 10, bit_rate_bps: 980.0, t_rf_s: 0.204, q_sf_db: -15.0, d_sf_km: 7.0 },
    SfRow { sf: 11, bit_rate_bps: 540.0, t_rf_s: 0.372, q_sf_db: -17.5, d_sf_km: 9.0 },
    SfRow { sf: 12, bit_rate_bps: 290.0, t_rf_s: 0.682, q_sf_db: -20.0, d_sf_km: 11.0 },
];

pub fn sf_table() -> &'static [SfRow; 6] {
    &SF_TABLE
}

/// Look up the table row for a spreading factor.
pub fn sf_row(sf: u8) -> Result<SfRow> {
    SF_TABLE
        .iter()
        .copied()
        .find(|r| r.sf == sf)
        .ok_or_else(|| SimError::domain(format!("spreading factor must be 7..=12, got {sf}")))
}

/// Chirp symbol duration `2^SF / BW`, seconds.
pub fn chirp_symbol_duration(sf: u8, bw_hz: f64) -> Result<f64> {
    if !(7..=12).contains(&sf) {
        return Err(SimError::domain(format!("spreading factor must be 7..=12, got {sf}")));
    }
    if !(bw_hz > 0.0) {
        return Err(SimError::domain(format!("bandwidth must be > 0, got {bw_hz}")));
    }
    Ok((1u64 << sf) as f64 / bw_hz)
}

/// How AP-to-BS distances are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    /// Every AP sits exactly at the nominal distance `d_SF`.
    Fixed,
    /// Each AP's distance is drawn once per run, uniform on
    /// `[d_SF - w, d_SF + w]` with `w` the ring half-width.
    RingUniform,
}

/// RF uplink configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LoraLinkConfig {
    pub sf_row: SfRow,
    pub rf_bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub tx_power_dbm: f64,
    pub carrier_hz: f64,
    pub path_loss_exp: f64,
    /// Power margin `ε` of the strongest-signal condition, linear.
    pub sir_margin_linear: f64,
    /// Half-width of the distance ring, km.
    pub ring_width_km: f64,
    pub distance_mode: DistanceMode,
}

impl LoraLinkConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(7..=12).contains(&self.sf_row.sf) {
            errs.push(format!("spreading factor must be 7..=12, got {}", self.sf_row.sf));
        }
        if !(self.rf_bandwidth_hz > 0.0) {
            errs.push(format!("rf_bandwidth_hz must be > 0, got {}", self.rf_bandwidth_hz));
        }
        if !(self.carrier_hz > 0.0) {
            errs.push(format!("carrier_hz must be > 0, got {}", self.carrier_hz));
        }
        if !(self.sir_margin_linear >= 1.0) {
            errs.push(format!("sir_margin_linear must be >= 1, got {}", self.sir_margin_linear));
        }
        if !(self.path_loss_exp >= 2.0 && self.path_loss_exp <= 6.0) {
            errs.push(format!("path_loss_exp must lie in [2, 6], got {}", self.path_loss_exp));
        }
        if !(self.ring_width_km >= 0.0) {
            errs.push(format!("ring_width_km must be >= 0, got {}", self.ring_width_km));
        }
        if self.distance_mode == DistanceMode::RingUniform
            && self.sf_row.d_sf_km <= self.ring_width_km
        {
            errs.push(format!(
                "ring [d_SF - {}, d_SF + {}] km must stay positive (d_SF = {} km)",
                self.ring_width_km, self.ring_width_km, self.sf_row.d_sf_km
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(errs))
        }
    }

    /// Noise power σ_rf² at this bandwidth and noise figure, watts.
    pub fn noise_power_w(&self) -> f64 {
        noise_power(self.noise_figure_db, self.rf_bandwidth_hz)
    }

    /// Average received power at the nominal distance, watts.
    pub fn rx_power_at_w(&self, distance_m: f64) -> Result<f64> {
        let g = path_loss(distance_m, self.carrier_hz, self.path_loss_exp)?;
        Ok(units::dbm_to_watts(self.tx_power_dbm) * g)
    }

    pub fn q_sf_linear(&self) -> f64 {
        units::db_to_linear(self.sf_row.q_sf_db)
    }
}

/// Thermal noise power `-174 + NF + 10 log₁₀ BW` dBm, returned in watts.
pub fn noise_power(noise_figure_db: f64, bw_hz: f64) -> f64 {
    units::dbm_to_watts(-174.0 + noise_figure_db + 10.0 * bw_hz.log10())
}

/// Friis-style path-loss gain `(λ / 4πd)^n`.
pub fn path_loss(distance_m: f64, carrier_hz: f64, n: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(SimError::domain(format!("distance must be > 0, got {distance_m}")));
    }
    let lambda = units::wavelength_m(carrier_hz);
    Ok((lambda / (4.0 * std::f64::consts::PI * distance_m)).powf(n))
}

/// Rayleigh fading power gain `h²`: exponential with unit mean.
pub fn sample_rayleigh_power_gain<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Probability that a packet's SNR falls below the SF threshold at the
/// nominal distance: `1 - exp(-σ_rf² q_SF / (P_rf g_SF))`.
pub fn outage_cond1_prob(cfg: &LoraLinkConfig) -> Result<f64> {
    outage_cond1_prob_at(cfg, cfg.sf_row.d_sf_km * 1000.0)
}

/// Same threshold-outage probability at an arbitrary distance.
pub fn outage_cond1_prob_at(cfg: &LoraLinkConfig, distance_m: f64) -> Result<f64> {
    let mean_rx = cfg.rx_power_at_w(distance_m)?;
    let x = cfg.noise_power_w() * cfg.q_sf_linear() / mean_rx;
    Ok(1.0 - (-x).exp())
}

/// One packet arriving at the base station in an RF slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfPacket {
    pub origin_ap: usize,
    pub origin_user: usize,
    pub rx_power_w: f64,
    pub snr_linear: f64,
}

impl RfPacket {
    /// Build a packet from a fading draw at the given distance.
    pub fn new(
        cfg: &LoraLinkConfig,
        origin_ap: usize,
        origin_user: usize,
        distance_m: f64,
        fading_power_gain: f64,
    ) -> Result<Self> {
        let rx_power_w = cfg.rx_power_at_w(distance_m)? * fading_power_gain;
        Ok(RfPacket {
            origin_ap,
            origin_user,
            rx_power_w,
            snr_linear: rx_power_w / cfg.noise_power_w(),
        })
    }
}

/// Decode rule for one RF slot: the strongest packet is the sole candidate;
/// it succeeds iff its SNR clears `q_SF` and its power is at least `ε`
/// times every interferer's. At most one packet per slot.
pub fn decode_rf_slot(packets: &[RfPacket], cfg: &LoraLinkConfig) -> Option<RfPacket> {
    let strongest = packets.iter().max_by(|a, b| {
        a.rx_power_w
            .partial_cmp(&b.rx_power_w)
            .unwrap_or(std::cmp::Ordering::Equal)
            // exact power ties broken toward the lowest (cell, user) pair
            .then_with(|| {
                (b.origin_ap, b.origin_user).cmp(&(a.origin_ap, a.origin_user))
            })
    })?;
    if strongest.snr_linear < cfg.q_sf_linear() {
        return None;
    }
    let runner_up = packets
        .iter()
        .filter(|p| (p.origin_ap, p.origin_user) != (strongest.origin_ap, strongest.origin_user))
        .map(|p| p.rx_power_w)
        .fold(0.0f64, f64::max);
    if strongest.rx_power_w < cfg.sir_margin_linear * runner_up {
        return None;
    }
    Some(*strongest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn test_cfg(sf: u8) -> LoraLinkConfig {
        LoraLinkConfig {
            sf_row: sf_row(sf).unwrap(),
            rf_bandwidth_hz: 125e3,
            noise_figure_db: 6.0,
            tx_power_dbm: 14.0,
            carrier_hz: 868.1e6,
            path_loss_exp: 2.7,
            sir_margin_linear: 4.0,
            ring_width_km: 1.0,
            distance_mode: DistanceMode::Fixed,
        }
    }

    #[test]
    fn symbol_duration() {
        assert_relative_eq!(chirp_symbol_duration(7, 125e3).unwrap(), 1.024e-3);
        assert_relative_eq!(chirp_symbol_duration(12, 125e3).unwrap(), 32.768e-3);
        assert_relative_eq!(chirp_symbol_duration(8, 250e3).unwrap(), 1.024e-3);
        assert!(chirp_symbol_duration(6, 125e3).is_err());
        assert!(chirp_symbol_duration(13, 125e3).is_err());
    }

    #[test]
    fn table_rows_as_printed() {
        let r7 = sf_row(7).unwrap();
        assert_eq!((r7.bit_rate_bps, r7.t_rf_s, r7.q_sf_db, r7.d_sf_km), (5470.0, 0.0366, -6.0, 1.0));
        let r11 = sf_row(11).unwrap();
        assert_eq!((r11.bit_rate_bps, r11.t_rf_s, r11.q_sf_db, r11.d_sf_km), (540.0, 0.372, -17.5, 9.0));
        let r12 = sf_row(12).unwrap();
        assert_eq!((r12.bit_rate_bps, r12.t_rf_s, r12.q_sf_db, r12.d_sf_km), (290.0, 0.682, -20.0, 11.0));
        assert!(sf_row(6).is_err());
    }

    #[test]
    fn table_monotone() {
        for w in SF_TABLE.windows(2) {
            assert!(w[1].t_rf_s > w[0].t_rf_s);
            assert!(w[1].q_sf_db < w[0].q_sf_db);
            assert_eq!(w[1].sf, w[0].sf + 1);
        }
        assert_eq!(SF_TABLE.len(), 6);
        assert_eq!(SF_TABLE[0].sf, 7);
    }

    #[test]
    fn noise_power_values() {
        // frozen: -174 + 6 + 10 log10(125000) = -117.0309 dBm
        assert_relative_eq!(noise_power(6.0, 125e3), 1.981116490576392e-15, max_relative = 1e-12);
        assert_relative_eq!(noise_power(0.0, 1.0), units::dbm_to_watts(-174.0));
        assert_relative_eq!(
            units::watts_to_dbm(noise_power(6.0, 500e3)),
            -111.01029995663981,
            max_relative = 1e-12
        );
    }

    #[test]
    fn path_loss_values() {
        // frozen high-precision evaluation at 1 km, 868.1 MHz, n = 2.7
        assert_relative_eq!(
            path_loss(1000.0, 868.1e6, 2.7).unwrap(),
            4.846307013777684e-13,
            max_relative = 1e-12
        );
        let g1 = path_loss(500.0, 868.1e6, 2.0).unwrap();
        let g2 = path_loss(1000.0, 868.1e6, 2.0).unwrap();
        assert_relative_eq!(g1 / g2, 4.0, max_relative = 1e-12);
        assert_relative_eq!(path_loss(12345.0, 868.1e6, 0.0).unwrap(), 1.0);
        assert!(path_loss(0.0, 868.1e6, 2.7).is_err());
    }

    #[test]
    fn rayleigh_power_gain_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000usize;
        let draws: Vec<f64> = (0..n).map(|_| sample_rayleigh_power_gain(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.003, "mean {mean}");
        let below_one = draws.iter().filter(|&&x| x < 1.0).count() as f64 / n as f64;
        let p = 1.0 - (-1.0f64).exp();
        let tol = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((below_one - p).abs() < tol, "P[h²<1] {below_one} vs {p}");
    }

    #[test]
    fn cond1_limits() {
        let mut cfg = test_cfg(7);
        cfg.sf_row.q_sf_db = -300.0; // q → 0 linear
        assert!(outage_cond1_prob(&cfg).unwrap() < 1e-12);
        cfg = test_cfg(7);
        cfg.tx_power_dbm = 300.0;
        assert!(outage_cond1_prob(&cfg).unwrap() < 1e-12);
    }

    #[test]
    fn cond1_sf7_frozen_value() {
        // frozen closed-form value at the defaults, SF 7 at 1 km
        assert_relative_eq!(
            outage_cond1_prob(&test_cfg(7)).unwrap(),
            0.040054617658170835,
            max_relative = 1e-10
        );
    }

    #[test]
    fn cond1_monte_carlo_agrees() {
        let cfg = test_cfg(7);
        let p = outage_cond1_prob(&cfg).unwrap();
        let x = cfg.noise_power_w() * cfg.q_sf_linear()
            / cfg.rx_power_at_w(cfg.sf_row.d_sf_km * 1000.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000usize;
        let hits = (0..n).filter(|_| sample_rayleigh_power_gain(&mut rng) < x).count();
        let emp = hits as f64 / n as f64;
        let tol = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((emp - p).abs() < tol, "{emp} vs {p} ± {tol}");
    }

    fn packet(cfg: &LoraLinkConfig, ap: usize, user: usize, gain: f64) -> RfPacket {
        RfPacket::new(cfg, ap, user, cfg.sf_row.d_sf_km * 1000.0, gain).unwrap()
    }

    #[test]
    fn decode_empty_slot() {
        assert_eq!(decode_rf_slot(&[], &test_cfg(7)), None);
    }

    #[test]
    fn decode_single_packet_threshold() {
        let cfg = test_cfg(7);
        let good = packet(&cfg, 0, 0, 10.0);
        assert!(good.snr_linear >= cfg.q_sf_linear());
        assert_eq!(decode_rf_slot(&[good], &cfg), Some(good));
        let bad = packet(&cfg, 0, 0, 1e-6);
        assert!(bad.snr_linear < cfg.q_sf_linear());
        assert_eq!(decode_rf_slot(&[bad], &cfg), None);
    }

    #[test]
    fn decode_margin_rule() {
        let cfg = test_cfg(7);
        // ratio 3 < ε = 4: nothing decoded
        let a = packet(&cfg, 0, 0, 30.0);
        let b = packet(&cfg, 1, 0, 10.0);
        assert_eq!(decode_rf_slot(&[a, b], &cfg), None);
        // ratio 5 > ε: strongest decoded
        let c = packet(&cfg, 0, 0, 50.0);
        assert_eq!(decode_rf_slot(&[c, b], &cfg), Some(c));
    }

    #[test]
    fn decode_returns_power_argmax_only() {
        let cfg = test_cfg(7);
        let a = packet(&cfg, 0, 0, 100.0);
        let b = packet(&cfg, 1, 0, 1.0);
        let c = packet(&cfg, 2, 3, 0.5);
        let d = decode_rf_slot(&[b, c, a], &cfg).unwrap();
        assert_eq!((d.origin_ap, d.origin_user), (0, 0));
    }

    #[test]
    fn decode_tie_breaks_toward_lowest_index() {
        let cfg = test_cfg(7);
        let a = packet(&cfg, 2, 1, 1.0);
        let b = packet(&cfg, 0, 4, 1.0);
        // equal powers: neither clears an ε ≥ 1 margin against the other
        assert_eq!(decode_rf_slot(&[a, b], &cfg), None);
        let mut cfg1 = cfg;
        cfg1.sir_margin_linear = 1.0;
        let d = decode_rf_slot(&[a, b], &cfg1).unwrap();
        assert_eq!((d.origin_ap, d.origin_user), (0, 4));
    }

    #[test]
    fn tx_power_monotone_in_cond1() {
        let mut prev = 1.0;
        for dbm in [8.0, 14.0, 20.0] {
            let mut cfg = test_cfg(9);
            cfg.tx_power_dbm = dbm;
            let p = outage_cond1_prob(&cfg).unwrap();
            assert!(p <= prev);
            prev = p;
        }
    }
}
