//! Statistical self-validation: runs the analytic oracles against the
//! sampled simulation at pre-registered sample sizes and significance 0.01.
//!
//! Backs the `validate` CLI command and the sweep `--validate` flag. Seeds
//! default to fixed constants so a green run is reproducible.

use crate::engine::{self, Scenario};
use crate::error::Result;
use crate::lora;
use crate::oracle;
use crate::owc::{self, OwcDerived};
use crate::scenario::parse_scenario_str;
use crate::seed;
use crate::units;

pub const DEFAULT_VALIDATION_SEED: u64 = 0x5641_4c31; // "VAL1"

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn default_scenario() -> Scenario {
    parse_scenario_str("", "defaults").expect("stock defaults are valid")
}

fn binomial_tol(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Run the full suite. Returns one entry per check; callers decide what a
/// failure means (the CLI exits nonzero).
pub fn run_validation(seed_base: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let base = default_scenario();
    let derived = OwcDerived::new(&base.owc_cell, &base.owc_radio)?;

    // 1. user radius sampling against the triangular CDF r²/R²
    {
        let n = 100_000;
        let mut rng = seed::stream(seed_base, &[1]);
        let samples: Vec<f64> = (0..n)
            .map(|_| owc::sample_user_radius(base.owc_cell.cell_radius_m, &mut rng))
            .collect();
        let r_sq = base.owc_cell.cell_radius_m * base.owc_cell.cell_radius_m;
        let d = oracle::ks_statistic(&samples, |r| (r * r / r_sq).clamp(0.0, 1.0))?;
        let crit = oracle::ks_critical_001(n);
        checks.push(Check {
            name: "radius-sampling-ks",
            pass: d < crit,
            detail: format!("KS = {d:.5}, critical = {crit:.5}"),
        });
    }

    // 2. geometric SNR samples against the closed-form CDF
    {
        let n = 100_000;
        let mut rng = seed::stream(seed_base, &[2]);
        let samples: Vec<f64> = (0..n)
            .map(|_| owc::sample_user_snr(&base.owc_cell, &base.owc_radio, &derived, &mut rng))
            .collect();
        let d = oracle::ks_statistic(&samples, |g| {
            owc::snr_cdf(&derived, &base.owc_cell, g).unwrap_or(0.0)
        })?;
        let crit = oracle::ks_critical_001(n);
        checks.push(Check {
            name: "snr-distribution-ks",
            pass: d < crit,
            detail: format!("KS = {d:.5}, critical = {crit:.5}"),
        });
    }

    // 3. capture erasure frequency against the CDF at γ_th = 5 dB
    {
        let n = 100_000;
        let gamma_th = units::db_to_linear(5.0);
        let p = owc::capture_erasure_prob(&derived, &base.owc_cell, gamma_th)?;
        let mut rng = seed::stream(seed_base, &[3]);
        let hits = (0..n)
            .filter(|_| {
                owc::sample_user_snr(&base.owc_cell, &base.owc_radio, &derived, &mut rng)
                    < gamma_th
            })
            .count();
        let emp = hits as f64 / n as f64;
        let tol = binomial_tol(p, n);
        checks.push(Check {
            name: "capture-erasure",
            pass: (emp - p).abs() < tol,
            detail: format!("empirical {emp:.5} vs closed form {p:.5} ± {tol:.5}"),
        });
    }

    // 4. activation histogram against the binomial PMF (U = 10, p = 0.3)
    {
        let n = 100_000;
        let (u_total, p_a) = (10usize, 0.3);
        let mut rng = seed::stream(seed_base, &[4]);
        let mut counts = vec![0u64; u_total + 1];
        for _ in 0..n {
            counts[engine::activate_users(u_total, p_a, &mut rng).len()] += 1;
        }
        let (stat, crit) = oracle::binomial_chi_squared(&counts, u_total as u64, p_a)?;
        checks.push(Check {
            name: "activation-chi-squared",
            pass: stat < crit,
            detail: format!("chi2 = {stat:.3}, critical = {crit:.3}"),
        });
    }

    // 5. unit-mean fading gain
    {
        let n = 1_000_000;
        let mut rng = seed::stream(seed_base, &[5]);
        let mean: f64 =
            (0..n).map(|_| lora::sample_rayleigh_power_gain(&mut rng)).sum::<f64>() / n as f64;
        let tol = 3.0 / (n as f64).sqrt();
        checks.push(Check {
            name: "rayleigh-power-mean",
            pass: (mean - 1.0).abs() < tol,
            detail: format!("mean {mean:.5} vs 1 ± {tol:.5}"),
        });
    }

    // 6. threshold outage per SF row against the closed form
    {
        let n = 1_000_000;
        for row in lora::sf_table() {
            let mut cfg = base.lora;
            cfg.sf_row = *row;
            let p = lora::outage_cond1_prob(&cfg)?;
            let x = cfg.noise_power_w() * cfg.q_sf_linear()
                / cfg.rx_power_at_w(row.d_sf_km * 1000.0)?;
            let mut rng = seed::stream(seed_base, &[6, row.sf as u64]);
            let hits = (0..n).filter(|_| lora::sample_rayleigh_power_gain(&mut rng) < x).count();
            let emp = hits as f64 / n as f64;
            let tol = binomial_tol(p, n);
            checks.push(Check {
                name: "cond1-outage",
                pass: (emp - p).abs() < tol,
                detail: format!("SF{} empirical {emp:.5} vs {p:.5} ± {tol:.5}", row.sf),
            });
        }
    }

    // 7. margin condition at equal distance against ε/(1+ε)
    {
        let n = 1_000_000;
        let eps = base.lora.sir_margin_linear;
        let p = oracle::cond2_equal_distance_prob(1, eps);
        let mut rng = seed::stream(seed_base, &[7]);
        let fails = (0..n)
            .filter(|_| {
                let desired = lora::sample_rayleigh_power_gain(&mut rng);
                let interferer = lora::sample_rayleigh_power_gain(&mut rng);
                desired <= eps * interferer
            })
            .count();
        let emp = fails as f64 / n as f64;
        let tol = binomial_tol(p, n);
        checks.push(Check {
            name: "cond2-margin",
            pass: (emp - p).abs() < tol,
            detail: format!("empirical {emp:.5} vs {p:.5} ± {tol:.5}"),
        });
    }

    // 8. degenerate end-to-end throughput against the composed closed form
    {
        let mut s = default_scenario();
        s.num_cells = 1;
        s.users_per_cell = 1;
        s.activation_prob = 0.5;
        s.multirate_factor = 2;
        s.owc_radio.capture_threshold_linear = units::db_to_linear(5.0);
        s.num_owc_slots = 200_000;
        s.master_seed = seed::derive_seed(seed_base, &[8]);
        let p_link = oracle::end_to_end_single_packet_prob(&s)?;
        let expect = s.activation_prob * p_link / s.multirate_factor as f64;
        let stats = engine::run_simulation(&s)?;
        // decoded count is Binomial(slots, p_a · p_link) scaled by 1/(N·M)
        let tol = 3.0
            * (s.activation_prob * p_link * (1.0 - s.activation_prob * p_link)
                / s.num_owc_slots as f64)
                .sqrt()
            / s.multirate_factor as f64;
        checks.push(Check {
            name: "end-to-end-degenerate",
            pass: (stats.throughput_mean - expect).abs() < tol,
            detail: format!(
                "throughput {:.6} vs {expect:.6} ± {tol:.6}",
                stats.throughput_mean
            ),
        });
    }

    Ok(checks)
}
