//! Two-tier slot engine: Bernoulli activation, optical-slot decoding with
//! capture and top-M multi-packet reception, random assignment of the
//! forwarded packets to the M RF mini-slots, and base-station decoding.
//!
//! One OWC slot spans M RF slots. Each access point decodes up to M of its
//! own users' packets per OWC slot and forwards them, one per RF mini-slot,
//! in the frame that follows; the model is memoryless, so each (OWC slot,
//! RF frame) pair is processed synchronously. Packets lost at either tier
//! are dropped, never retransmitted.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::lora::{self, DistanceMode, LoraLinkConfig, RfPacket};
use crate::owc::{self, OwcCellConfig, OwcDerived, OwcRadioConfig};
use crate::seed;

// Stage tags for sub-stream derivation.
const STAGE_DISTANCES: u64 = 0;
const STAGE_ACTIVATE: u64 = 1;
const STAGE_OWC: u64 = 2;
const STAGE_ASSIGN: u64 = 3;
const STAGE_RF: u64 = 4;

/// Full description of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    /// Number of cells `K`.
    pub num_cells: usize,
    /// Users per cell `U`.
    pub users_per_cell: usize,
    /// Per-slot activation probability `p_a`.
    pub activation_prob: f64,
    /// Multi-rate factor `M`: RF slots per OWC slot, and the MPR limit.
    pub multirate_factor: usize,
    /// Number of OWC slots to simulate.
    pub num_owc_slots: u64,
    pub master_seed: u64,
    pub owc_cell: OwcCellConfig,
    pub owc_radio: OwcRadioConfig,
    pub lora: LoraLinkConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.activation_prob) {
            errs.push(format!(
                "activation_prob must lie in [0, 1], got {}",
                self.activation_prob
            ));
        }
        if self.multirate_factor < 1 {
            errs.push("multirate_factor must be >= 1".into());
        }
        if self.num_cells < 1 {
            errs.push("num_cells must be >= 1".into());
        }
        if self.users_per_cell < 1 {
            errs.push("users_per_cell must be >= 1".into());
        }
        if self.num_owc_slots < 1 {
            errs.push("num_owc_slots must be >= 1".into());
        }
        for sub in [
            self.owc_cell.validate(),
            self.owc_radio.validate(),
            self.lora.validate(),
        ] {
            if let Err(SimError::Validation(v)) = sub {
                errs.extend(v);
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(errs))
        }
    }

    /// OWC slot duration `T_owc = M · T_rf`, seconds. Always derived.
    pub fn t_owc_s(&self) -> f64 {
        self.multirate_factor as f64 * self.lora.sf_row.t_rf_s
    }
}

/// A packet decoded at its OWC access point, awaiting relay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OwcPacket {
    pub user: usize,
    pub snr_linear: f64,
}

/// Outcome of decoding one cell's OWC slot.
#[derive(Debug, Clone)]
pub struct OwcSlotDecode {
    /// Packets kept for relaying: the top `M` survivors by received power,
    /// sorted descending.
    pub forwarded: Vec<OwcPacket>,
    /// Number of packets that cleared the capture threshold, before the
    /// MPR limit was applied.
    pub capture_pass: usize,
}

/// Per-slot accounting record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotTrace {
    pub slot: u64,
    /// Activated users per cell.
    pub activated: Vec<usize>,
    /// Capture survivors per cell.
    pub capture_pass: Vec<usize>,
    /// Forwarded packets per cell (= min(capture_pass, M)).
    pub forwarded: Vec<usize>,
    /// For each RF mini-slot, the (cell, user) pairs transmitting in it.
    pub rf_slot_assignment: Vec<Vec<(usize, usize)>>,
    pub decoded_at_bs: usize,
}

/// Totals over all simulated slots, one counter per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTotals {
    pub activated: u64,
    pub captured: u64,
    pub forwarded: u64,
    pub decoded: u64,
}

/// Simulation output: throughput per RF slot plus the stage loss budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputStats {
    /// Mean decoded packets per RF slot.
    pub throughput_mean: f64,
    /// 95% confidence half-width (normal approximation over per-OWC-slot
    /// throughput samples).
    pub throughput_ci95: f64,
    pub stage_totals: StageTotals,
    pub num_rf_slots_simulated: u64,
}

/// Draw the set of activated users: each of `0..u` included independently
/// with probability `p_a`.
pub fn activate_users<R: Rng + ?Sized>(u: usize, p_a: f64, rng: &mut R) -> Vec<usize> {
    (0..u).filter(|_| rng.gen::<f64>() < p_a).collect()
}

/// Decode one cell's OWC slot: sample each active user's position, keep
/// packets whose SNR clears the capture threshold, then keep the `m`
/// strongest of the survivors.
pub fn owc_slot_decode<R: Rng + ?Sized>(
    active_users: &[usize],
    cell: &OwcCellConfig,
    radio: &OwcRadioConfig,
    derived: &OwcDerived,
    m: usize,
    rng: &mut R,
) -> OwcSlotDecode {
    let mut survivors: Vec<OwcPacket> = active_users
        .iter()
        .map(|&user| OwcPacket {
            user,
            snr_linear: owc::sample_user_snr(cell, radio, derived, rng),
        })
        .filter(|p| p.snr_linear >= radio.capture_threshold_linear)
        .collect();
    // received power and SNR order identically, so sorting by SNR picks the
    // same top-M; user index breaks exact ties deterministically
    survivors.sort_by(|a, b| {
        b.snr_linear
            .partial_cmp(&a.snr_linear)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.user.cmp(&b.user))
    });
    let capture_pass = survivors.len();
    survivors.truncate(m);
    OwcSlotDecode { forwarded: survivors, capture_pass }
}

/// Place each cell's forwarded packets into distinct RF mini-slots chosen
/// uniformly at random. Different cells may land in the same slot.
pub fn assign_rf_slots<R: Rng + ?Sized>(
    decoded_per_cell: &[Vec<OwcPacket>],
    m: usize,
    rng: &mut R,
) -> Result<Vec<Vec<(usize, OwcPacket)>>> {
    let mut slots: Vec<Vec<(usize, OwcPacket)>> = vec![Vec::new(); m];
    for (cell_idx, packets) in decoded_per_cell.iter().enumerate() {
        if packets.len() > m {
            return Err(SimError::domain(format!(
                "cell {cell_idx} offers {} packets but only {m} RF slots exist",
                packets.len()
            )));
        }
        let chosen = rand::seq::index::sample(rng, m, packets.len());
        for (packet, slot_idx) in packets.iter().zip(chosen.iter()) {
            slots[slot_idx].push((cell_idx, *packet));
        }
    }
    Ok(slots)
}

/// Decode every RF mini-slot of one frame at the base station. Fading is
/// redrawn independently per packet.
pub fn rf_frame_decode<R: Rng + ?Sized>(
    assignment: &[Vec<(usize, OwcPacket)>],
    cfg: &LoraLinkConfig,
    ap_distances_m: &[f64],
    rng: &mut R,
) -> Vec<RfPacket> {
    let mut decoded = Vec::new();
    let mut slot_packets = Vec::new();
    for slot in assignment {
        slot_packets.clear();
        for &(cell_idx, packet) in slot {
            let fading = lora::sample_rayleigh_power_gain(rng);
            let rf = RfPacket::new(cfg, cell_idx, packet.user, ap_distances_m[cell_idx], fading)
                .expect("AP distances validated to be positive");
            slot_packets.push(rf);
        }
        if let Some(winner) = lora::decode_rf_slot(&slot_packets, cfg) {
            decoded.push(winner);
        }
    }
    decoded
}

/// AP-to-BS distances for one run, in metres.
pub fn draw_ap_distances(scenario: &Scenario) -> Vec<f64> {
    let row = &scenario.lora.sf_row;
    match scenario.lora.distance_mode {
        DistanceMode::Fixed => vec![row.d_sf_km * 1000.0; scenario.num_cells],
        DistanceMode::RingUniform => {
            let mut rng = seed::stream(scenario.master_seed, &[STAGE_DISTANCES]);
            (0..scenario.num_cells)
                .map(|_| {
                    let off = rng.gen_range(-scenario.lora.ring_width_km..=scenario.lora.ring_width_km);
                    (row.d_sf_km + off) * 1000.0
                })
                .collect()
        }
    }
}

/// Run the full scenario. Deterministic given `master_seed`.
pub fn run_simulation(scenario: &Scenario) -> Result<ThroughputStats> {
    run_simulation_traced(scenario, |_| {})
}

/// As [`run_simulation`], invoking `sink` with every slot's trace record.
pub fn run_simulation_traced(
    scenario: &Scenario,
    mut sink: impl FnMut(&SlotTrace),
) -> Result<ThroughputStats> {
    scenario.validate()?;
    let derived = OwcDerived::new(&scenario.owc_cell, &scenario.owc_radio)?;
    let distances = draw_ap_distances(scenario);
    let m = scenario.multirate_factor;
    let seed = scenario.master_seed;

    let mut totals = StageTotals::default();
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;

    let mut active_buf: Vec<Vec<usize>> = Vec::with_capacity(scenario.num_cells);
    for slot in 0..scenario.num_owc_slots {
        let mut rng_act = seed::stream(seed, &[slot, STAGE_ACTIVATE]);
        active_buf.clear();
        for _ in 0..scenario.num_cells {
            active_buf.push(activate_users(
                scenario.users_per_cell,
                scenario.activation_prob,
                &mut rng_act,
            ));
        }

        let mut rng_owc = seed::stream(seed, &[slot, STAGE_OWC]);
        let mut per_cell_forwarded: Vec<Vec<OwcPacket>> = Vec::with_capacity(scenario.num_cells);
        let mut capture_counts = Vec::with_capacity(scenario.num_cells);
        for active in &active_buf {
            let out = owc_slot_decode(
                active,
                &scenario.owc_cell,
                &scenario.owc_radio,
                &derived,
                m,
                &mut rng_owc,
            );
            capture_counts.push(out.capture_pass);
            per_cell_forwarded.push(out.forwarded);
        }

        let mut rng_assign = seed::stream(seed, &[slot, STAGE_ASSIGN]);
        let assignment = assign_rf_slots(&per_cell_forwarded, m, &mut rng_assign)?;

        let mut rng_rf = seed::stream(seed, &[slot, STAGE_RF]);
        let decoded = rf_frame_decode(&assignment, &scenario.lora, &distances, &mut rng_rf);

        let activated: usize = active_buf.iter().map(Vec::len).sum();
        let captured: usize = capture_counts.iter().sum();
        let forwarded: usize = per_cell_forwarded.iter().map(Vec::len).sum();
        totals.activated += activated as u64;
        totals.captured += captured as u64;
        totals.forwarded += forwarded as u64;
        totals.decoded += decoded.len() as u64;

        let x = decoded.len() as f64 / m as f64;
        sum += x;
        sum_sq += x * x;

        sink(&SlotTrace {
            slot,
            activated: active_buf.iter().map(Vec::len).collect(),
            capture_pass: capture_counts,
            forwarded: per_cell_forwarded.iter().map(Vec::len).collect(),
            rf_slot_assignment: assignment
                .iter()
                .map(|s| s.iter().map(|(c, p)| (*c, p.user)).collect())
                .collect(),
            decoded_at_bs: decoded.len(),
        });
    }

    let n = scenario.num_owc_slots as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let ci95 = if scenario.num_owc_slots > 1 {
        1.96 * (var / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ThroughputStats {
        throughput_mean: totals.decoded as f64 / (n * m as f64),
        throughput_ci95: ci95,
        stage_totals: totals,
        num_rf_slots_simulated: scenario.num_owc_slots * m as u64,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::lora::{sf_row, DistanceMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn test_scenario() -> Scenario {
        Scenario {
            num_cells: 5,
            users_per_cell: 5,
            activation_prob: 0.3,
            multirate_factor: 3,
            num_owc_slots: 200,
            master_seed: 17,
            owc_cell: OwcCellConfig {
                cell_radius_m: 2.0,
                height_m: 2.15,
                semi_angle_deg: 60.0,
                fov_deg: 90.0,
                detector_area_m2: 1e-4,
                responsivity_a_per_w: 0.4,
                filter_gain: 1.0,
                lens_index: 1.5,
            },
            owc_radio: OwcRadioConfig {
                tx_power_w: 0.01,
                oe_efficiency: 0.8,
                noise_density_w_per_hz: 1e-21,
                bandwidth_hz: 200e3,
                capture_threshold_linear: 1.0,
            },
            lora: LoraLinkConfig {
                sf_row: sf_row(7).unwrap(),
                rf_bandwidth_hz: 125e3,
                noise_figure_db: 6.0,
                tx_power_dbm: 14.0,
                carrier_hz: 868.1e6,
                path_loss_exp: 2.7,
                sir_margin_linear: 4.0,
                ring_width_km: 1.0,
                distance_mode: DistanceMode::Fixed,
            },
        }
    }

    #[test]
    fn activation_edge_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(activate_users(8, 0.0, &mut rng).is_empty());
            assert_eq!(activate_users(8, 1.0, &mut rng).len(), 8);
        }
    }

    #[test]
    fn activation_binomial_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let total: usize = (0..n).map(|_| activate_users(5, 0.2, &mut rng).len()).sum();
        let mean = total as f64 / n as f64;
        // var of Binomial(5, 0.2) is 0.8
        let tol = 3.0 * (0.8f64 / n as f64).sqrt();
        assert!((mean - 1.0).abs() < tol, "mean {mean}");
    }

    #[test]
    fn owc_decode_empty_and_capped() {
        let s = test_scenario();
        let derived = OwcDerived::new(&s.owc_cell, &s.owc_radio).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = owc_slot_decode(&[], &s.owc_cell, &s.owc_radio, &derived, 3, &mut rng);
        assert!(out.forwarded.is_empty());
        assert_eq!(out.capture_pass, 0);

        // default threshold sits below γ_min: every active packet survives
        let active: Vec<usize> = (0..5).collect();
        let out = owc_slot_decode(&active, &s.owc_cell, &s.owc_radio, &derived, 3, &mut rng);
        assert_eq!(out.capture_pass, 5);
        assert_eq!(out.forwarded.len(), 3);
        for w in out.forwarded.windows(2) {
            assert!(w[0].snr_linear >= w[1].snr_linear);
        }
        // forwarded are the strongest 3 of the 5 survivors: all forwarded
        // SNRs exceed γ_min, and none was dropped while a weaker one stayed
        assert!(out.forwarded.iter().all(|p| p.snr_linear >= derived.gamma_min_linear));
    }

    #[test]
    fn owc_decode_threshold_above_gamma_max() {
        let mut s = test_scenario();
        let derived = OwcDerived::new(&s.owc_cell, &s.owc_radio).unwrap();
        s.owc_radio.capture_threshold_linear = derived.gamma_max_linear * 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let active: Vec<usize> = (0..5).collect();
        let out = owc_slot_decode(&active, &s.owc_cell, &s.owc_radio, &derived, 3, &mut rng);
        assert!(out.forwarded.is_empty());
        assert_eq!(out.capture_pass, 0);
    }

    #[test]
    fn assignment_full_occupancy_and_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pk = |u| OwcPacket { user: u, snr_linear: 1.0 };
        let cells = vec![vec![pk(0), pk(1), pk(2)]];
        let slots = assign_rf_slots(&cells, 3, &mut rng).unwrap();
        assert!(slots.iter().all(|s| s.len() == 1));
        let over = vec![vec![pk(0), pk(1)]];
        assert!(assign_rf_slots(&over, 1, &mut rng).is_err());
    }

    #[test]
    fn assignment_uniform_over_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cells = vec![vec![OwcPacket { user: 0, snr_linear: 1.0 }]];
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let slots = assign_rf_slots(&cells, 3, &mut rng).unwrap();
            let idx = slots.iter().position(|s| !s.is_empty()).unwrap();
            counts[idx] += 1;
        }
        let tol = 3.0 * ((1.0 / 3.0) * (2.0 / 3.0) / n as f64).sqrt();
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < tol, "freq {f}");
        }
    }

    #[test]
    fn assignment_collision_rate_two_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cells = vec![
            vec![OwcPacket { user: 0, snr_linear: 1.0 }],
            vec![OwcPacket { user: 0, snr_linear: 1.0 }],
        ];
        let n = 100_000;
        let collisions = (0..n)
            .filter(|_| {
                let slots = assign_rf_slots(&cells, 2, &mut rng).unwrap();
                slots.iter().any(|s| s.len() == 2)
            })
            .count();
        let f = collisions as f64 / n as f64;
        let tol = 3.0 * (0.25f64 / n as f64).sqrt();
        assert!((f - 0.5).abs() < tol, "collision rate {f}");
    }

    #[test]
    fn rf_frame_empty_and_bounded() {
        let s = test_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let empty: Vec<Vec<(usize, OwcPacket)>> = vec![Vec::new(); 3];
        let d = vec![1000.0; s.num_cells];
        assert!(rf_frame_decode(&empty, &s.lora, &d, &mut rng).is_empty());

        let pk = OwcPacket { user: 0, snr_linear: 5.0 };
        let assignment = vec![vec![(0, pk), (1, pk)], vec![(2, pk)], vec![]];
        for _ in 0..200 {
            let decoded = rf_frame_decode(&assignment, &s.lora, &d, &mut rng);
            assert!(decoded.len() <= 3);
        }
    }

    #[test]
    fn zero_activity_zero_throughput() {
        let mut s = test_scenario();
        s.activation_prob = 0.0;
        let stats = run_simulation(&s).unwrap();
        assert_eq!(stats.throughput_mean, 0.0);
        assert_eq!(stats.stage_totals, StageTotals::default());
    }

    #[test]
    fn deterministic_given_seed() {
        let s = test_scenario();
        let a = run_simulation(&s).unwrap();
        let b = run_simulation(&s).unwrap();
        assert_eq!(a, b);
        let mut s2 = s.clone();
        s2.master_seed ^= 1;
        let c = run_simulation(&s2).unwrap();
        assert_ne!(a.stage_totals, c.stage_totals);
    }

    #[test]
    fn conservation_chain_per_slot() {
        let s = test_scenario();
        let mut violations = 0;
        run_simulation_traced(&s, |t| {
            let act: usize = t.activated.iter().sum();
            let cap: usize = t.capture_pass.iter().sum();
            let fwd: usize = t.forwarded.iter().sum();
            if !(t.decoded_at_bs <= fwd && fwd <= cap && cap <= act) {
                violations += 1;
            }
            for ((&a, &c), &f) in t.activated.iter().zip(&t.capture_pass).zip(&t.forwarded) {
                if c > a || f != c.min(s.multirate_factor) {
                    violations += 1;
                }
            }
            // each cell at most once per RF slot
            for slot in &t.rf_slot_assignment {
                let mut cells: Vec<usize> = slot.iter().map(|(c, _)| *c).collect();
                cells.sort_unstable();
                cells.dedup();
                if cells.len() != slot.len() {
                    violations += 1;
                }
            }
        })
        .unwrap();
        assert_eq!(violations, 0);
    }

    #[test]
    fn stats_identities() {
        let s = test_scenario();
        let stats = run_simulation(&s).unwrap();
        assert_eq!(
            stats.num_rf_slots_simulated,
            s.num_owc_slots * s.multirate_factor as u64
        );
        let expect = stats.stage_totals.decoded as f64 / stats.num_rf_slots_simulated as f64;
        assert!((stats.throughput_mean - expect).abs() < 1e-12);
        assert!(stats.throughput_mean <= 1.0);
    }

    #[test]
    fn invalid_scenario_rejected_before_simulation() {
        let mut s = test_scenario();
        s.activation_prob = 1.5;
        s.multirate_factor = 0;
        match run_simulation(&s) {
            Err(SimError::Validation(v)) => assert_eq!(v.len(), 2),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn ring_uniform_distances_within_ring_and_fixed_per_run() {
        let mut s = test_scenario();
        s.lora.distance_mode = DistanceMode::RingUniform;
        let d1 = draw_ap_distances(&s);
        let d2 = draw_ap_distances(&s);
        assert_eq!(d1, d2);
        for d in &d1 {
            assert!(*d >= 0.0 && (*d - 1000.0).abs() <= 1000.0 + 1e-9);
        }
    }
}
