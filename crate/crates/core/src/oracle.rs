//! Closed-form and brute-force oracles used to cross-validate the sampled
//! simulation.
//!
//! Everything here is implemented from the model formulas directly, without
//! touching the simulation's sampling code, so that agreement between the
//! two paths is evidence rather than tautology. The formula duplication
//! against the `owc` and `lora` modules is deliberate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::Scenario;
use crate::error::{Result, SimError};
use crate::lora::DistanceMode;
use crate::units;

/// Exact binomial PMF `C(U, u) p^u (1-p)^(U-u)`.
pub fn binomial_pmf(u_total: u64, p_a: f64, u: u64) -> Result<f64> {
    if u > u_total {
        return Err(SimError::domain(format!("u = {u} exceeds U = {u_total}")));
    }
    if !(0.0..=1.0).contains(&p_a) {
        return Err(SimError::domain(format!("p_a must lie in [0, 1], got {p_a}")));
    }
    // multiplicative form keeps intermediate magnitudes tame
    let mut acc = (1.0 - p_a).powf((u_total - u) as f64) * p_a.powf(u as f64);
    for k in 1..=u {
        acc *= (u_total - u + k) as f64 / k as f64;
    }
    Ok(acc)
}

/// Two-sided Kolmogorov-Smirnov statistic between a sample and an analytic
/// CDF. The input need not be sorted. Requires at least 100 samples.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.len() < 100 {
        return Err(SimError::InsufficientSamples { got: samples.len(), need: 100 });
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = xs.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        sup = sup.max((f - i as f64 / n).abs());
        sup = sup.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(sup)
}

/// KS critical value at significance 0.01 for sample size `n`.
pub fn ks_critical_001(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Probability that the margin condition fails with i.i.d. unit-mean
/// exponential power gains at equal distance.
///
/// For a single interferer this is the closed ratio form
/// `P[X ≤ εY] = ε/(1+ε)`. For more interferers it is the probability that
/// the strongest of the `n+1` gains is below `ε` times the runner-up,
/// estimated by dense Monte Carlo (10⁷ frames, fixed seed).
pub fn cond2_equal_distance_prob(num_interferers: usize, epsilon: f64) -> f64 {
    assert!(num_interferers >= 1);
    if epsilon <= 0.0 {
        return 0.0;
    }
    if num_interferers == 1 {
        return epsilon / (1.0 + epsilon);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6f72_6163_6c65); // fixed oracle seed
    let n = num_interferers + 1;
    let draws = 10_000_000usize;
    let mut fails = 0usize;
    let mut gains = vec![0.0f64; n];
    for _ in 0..draws {
        for g in gains.iter_mut() {
            // inverse-CDF exponential draw, independent of the simulation's
            // sampling helper
            *g = -(1.0 - rng.gen::<f64>()).ln();
        }
        let mut best = f64::MIN;
        let mut second = f64::MIN;
        for &g in &gains {
            if g > best {
                second = best;
                best = g;
            } else if g > second {
                second = g;
            }
        }
        if best < epsilon * second {
            fails += 1;
        }
    }
    fails as f64 / draws as f64
}

/// Closed-form probability that a lone activated packet in a K = 1, U = 1
/// scenario survives both tiers: `(1 - P_er)(1 - P_out)` with the capture
/// erasure taken from the SNR CDF and the threshold outage from the
/// exponential fading CDF at the nominal distance.
pub fn end_to_end_single_packet_prob(scenario: &Scenario) -> Result<f64> {
    if scenario.num_cells != 1 || scenario.users_per_cell != 1 {
        return Err(SimError::domain(format!(
            "oracle requires K = 1, U = 1, got K = {}, U = {}",
            scenario.num_cells, scenario.users_per_cell
        )));
    }
    if scenario.lora.distance_mode != DistanceMode::Fixed {
        return Err(SimError::domain("oracle requires the fixed distance mode"));
    }
    let cell = &scenario.owc_cell;
    let radio = &scenario.owc_radio;

    // optical tier, recomputed from first principles
    let m = -std::f64::consts::LN_2 / cell.semi_angle_deg.to_radians().cos().ln();
    let sin_fov = cell.fov_deg.to_radians().sin();
    let g_conc = cell.lens_index * cell.lens_index / (sin_fov * sin_fov);
    let chi = cell.detector_area_m2 * (m + 1.0) * cell.responsivity_a_per_w * cell.filter_gain
        * g_conc
        * cell.height_m.powf(m + 1.0)
        / (2.0 * std::f64::consts::PI);
    let sigma_n_sq = radio.noise_density_w_per_hz * radio.bandwidth_hz;
    let mu = (radio.tx_power_w * radio.oe_efficiency).powi(2) / sigma_n_sq;
    let mu_chi_sq = mu * chi * chi;
    let r_sq = cell.cell_radius_m * cell.cell_radius_m;
    let l_sq = cell.height_m * cell.height_m;
    let gamma_min = mu_chi_sq / (r_sq + l_sq).powf(m + 3.0);
    let gamma_max = mu_chi_sq / l_sq.powf(m + 3.0);
    let gamma_th = radio.capture_threshold_linear;
    let p_er = if gamma_th < gamma_min {
        0.0
    } else if gamma_th > gamma_max {
        1.0
    } else {
        1.0 + l_sq / r_sq - (mu_chi_sq / gamma_th).powf(1.0 / (m + 3.0)) / r_sq
    };

    // RF tier at the nominal distance
    let lora = &scenario.lora;
    let sigma_rf_sq =
        units::dbm_to_watts(-174.0 + lora.noise_figure_db + 10.0 * lora.rf_bandwidth_hz.log10());
    let lambda = units::SPEED_OF_LIGHT_M_PER_S / lora.carrier_hz;
    let d_m = lora.sf_row.d_sf_km * 1000.0;
    let g_sf = (lambda / (4.0 * std::f64::consts::PI * d_m)).powf(lora.path_loss_exp);
    let q = units::db_to_linear(lora.sf_row.q_sf_db);
    let p_out =
        1.0 - (-(sigma_rf_sq * q) / (units::dbm_to_watts(lora.tx_power_dbm) * g_sf)).exp();

    Ok((1.0 - p_er) * (1.0 - p_out))
}

/// Critical values of the chi-squared distribution at significance 0.01,
/// indexed by degrees of freedom 1..=20.
const CHI2_CRIT_001: [f64; 20] = [
    6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209, 24.725, 26.217,
    27.688, 29.141, 30.578, 32.000, 33.409, 34.805, 36.191, 37.566,
];

/// Pearson chi-squared goodness-of-fit of observed activation counts
/// (index = number of active users) against the binomial PMF. Bins with
/// expected count below 5 are pooled into their neighbour. Returns
/// `(statistic, critical value at significance 0.01)`.
pub fn binomial_chi_squared(counts: &[u64], u_total: u64, p_a: f64) -> Result<(f64, f64)> {
    if counts.len() != u_total as usize + 1 {
        return Err(SimError::domain(format!(
            "need one count per outcome 0..=U, got {} for U = {u_total}",
            counts.len()
        )));
    }
    let n: u64 = counts.iter().sum();
    let mut expected: Vec<f64> = (0..=u_total)
        .map(|u| Ok(n as f64 * binomial_pmf(u_total, p_a, u)?))
        .collect::<Result<_>>()?;
    let mut observed: Vec<f64> = counts.iter().map(|&c| c as f64).collect();

    // pool sparse bins left to right
    let mut i = 0;
    while i < expected.len() {
        if expected[i] < 5.0 && expected.len() > 1 {
            let j = if i + 1 < expected.len() { i + 1 } else { i - 1 };
            expected[j] += expected[i];
            observed[j] += observed[i];
            expected.remove(i);
            observed.remove(i);
        } else {
            i += 1;
        }
    }
    let stat: f64 = expected
        .iter()
        .zip(&observed)
        .map(|(e, o)| (o - e) * (o - e) / e)
        .sum();
    let df = expected.len().saturating_sub(1).clamp(1, CHI2_CRIT_001.len());
    Ok((stat, CHI2_CRIT_001[df - 1]))
}
