//! Indoor optical tier: Lambertian line-of-sight channel, uniform-disk user
//! placement, SNR statistics, and the capture-erasure probability.
//!
//! Geometry: one access point on the ceiling looks straight down at a
//! horizontal plane a distance `L` below it; devices point straight up and
//! are placed uniformly inside a disk of radius `R` centred under the AP.
//! With that orientation the irradiance and incidence angles coincide and
//! `cos θ = cos ψ = L/d` for a device at link distance `d = sqrt(r² + L²)`,
//! which collapses the Lambertian gain to `h = χ / d^(m+3)` with a single
//! composite constant `χ`.
//!
//! The induced SNR distribution over a random device position is a power
//! law supported on `[γ_min, γ_max]`; its closed-form PDF/CDF live here and
//! double as validation targets for the geometric sampling path.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Geometry and optics of one indoor cell.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OwcCellConfig {
    /// Disk radius `R` on the device plane, metres.
    pub cell_radius_m: f64,
    /// Distance `L` between device plane and ceiling, metres.
    pub height_m: f64,
    /// LED semi-angle at half power `Φ½`, degrees.
    pub semi_angle_deg: f64,
    /// Receiver field of view `Ψ`, degrees.
    pub fov_deg: f64,
    /// Physical detector area `A`, m².
    pub detector_area_m2: f64,
    /// Photodetector responsivity, A/W.
    pub responsivity_a_per_w: f64,
    /// Optical filter gain `T_g`.
    pub filter_gain: f64,
    /// Refractive index `l` of the concentrator lens.
    pub lens_index: f64,
}

impl OwcCellConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.cell_radius_m > 0.0) {
            errs.push(format!("cell_radius_m must be > 0, got {}", self.cell_radius_m));
        }
        if !(self.height_m > 0.0) {
            errs.push(format!("height_m must be > 0, got {}", self.height_m));
        }
        if !(self.semi_angle_deg > 0.0 && self.semi_angle_deg < 90.0) {
            errs.push(format!(
                "semi_angle_deg must lie in (0, 90), got {}",
                self.semi_angle_deg
            ));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 90.0) {
            errs.push(format!("fov_deg must lie in (0, 90], got {}", self.fov_deg));
        }
        if !(self.detector_area_m2 > 0.0) {
            errs.push(format!("detector_area_m2 must be > 0, got {}", self.detector_area_m2));
        }
        if !(self.responsivity_a_per_w > 0.0) {
            errs.push(format!(
                "responsivity_a_per_w must be > 0, got {}",
                self.responsivity_a_per_w
            ));
        }
        if !(self.filter_gain > 0.0) {
            errs.push(format!("filter_gain must be > 0, got {}", self.filter_gain));
        }
        if !(self.lens_index >= 1.0) {
            errs.push(format!("lens_index must be >= 1, got {}", self.lens_index));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(errs))
        }
    }
}

/// Electrical parameters of the optical link. All values linear.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OwcRadioConfig {
    /// Transmitted optical power `P_t`, watts.
    pub tx_power_w: f64,
    /// Optical-to-electrical conversion efficiency `η`.
    pub oe_efficiency: f64,
    /// Noise spectral density `N_0`, W/Hz.
    pub noise_density_w_per_hz: f64,
    /// Receiver bandwidth `B`, Hz.
    pub bandwidth_hz: f64,
    /// Capture threshold `γ_th`, linear SNR ratio.
    pub capture_threshold_linear: f64,
}

impl OwcRadioConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("tx_power_w", self.tx_power_w),
            ("oe_efficiency", self.oe_efficiency),
            ("noise_density_w_per_hz", self.noise_density_w_per_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("capture_threshold_linear", self.capture_threshold_linear),
        ] {
            if !(v > 0.0) {
                errs.push(format!("{name} must be > 0, got {v}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(errs))
        }
    }

    /// Noise variance σ_n² = N_0 · B, watts.
    pub fn noise_variance_w(&self) -> f64 {
        self.noise_density_w_per_hz * self.bandwidth_hz
    }

    /// SNR scale μ = P_t² η² / σ_n², so that γ = μ h².
    pub fn snr_scale(&self) -> f64 {
        let p = self.tx_power_w * self.oe_efficiency;
        p * p / self.noise_variance_w()
    }
}

/// Constants derived from a cell + radio pair, computed once per run.
#[derive(Debug, Clone, Copy)]
pub struct OwcDerived {
    /// Lambertian order `m`.
    pub lambertian_order: f64,
    /// Concentrator gain `g(ψ) = l² / sin² Ψ`.
    pub concentrator_gain: f64,
    /// Composite gain constant `χ`: `h = χ / d^(m+3)` inside the FOV.
    pub chi: f64,
    /// SNR scale times χ², the numerator of the SNR distribution.
    pub mu_chi_sq: f64,
    /// SNR at the cell edge (r = R), linear.
    pub gamma_min_linear: f64,
    /// SNR directly under the AP (r = 0), linear.
    pub gamma_max_linear: f64,
}

impl OwcDerived {
    pub fn new(cell: &OwcCellConfig, radio: &OwcRadioConfig) -> Result<Self> {
        cell.validate()?;
        radio.validate()?;
        let m = lambertian_order(cell.semi_angle_deg)?;
        let g = concentrator_gain(cell.lens_index, cell.fov_deg);
        let l = cell.height_m;
        let chi = cell.detector_area_m2 * (m + 1.0) * cell.responsivity_a_per_w
            / (2.0 * std::f64::consts::PI)
            * cell.filter_gain
            * g
            * l.powf(m + 1.0);
        let mu_chi_sq = radio.snr_scale() * chi * chi;
        let r2l2 = cell.cell_radius_m * cell.cell_radius_m + l * l;
        Ok(OwcDerived {
            lambertian_order: m,
            concentrator_gain: g,
            chi,
            mu_chi_sq,
            gamma_min_linear: mu_chi_sq / r2l2.powf(m + 3.0),
            gamma_max_linear: mu_chi_sq / l.powf(2.0 * (m + 3.0)),
        })
    }
}

/// Lambertian order `m = -ln 2 / ln cos Φ½`.
pub fn lambertian_order(semi_angle_deg: f64) -> Result<f64> {
    if !(semi_angle_deg > 0.0 && semi_angle_deg < 90.0) {
        return Err(SimError::domain(format!(
            "semi-angle must lie in (0°, 90°), got {semi_angle_deg}"
        )));
    }
    Ok(-std::f64::consts::LN_2 / semi_angle_deg.to_radians().cos().ln())
}

/// Optical concentrator gain `l² / sin² Ψ`.
pub fn concentrator_gain(lens_index: f64, fov_deg: f64) -> f64 {
    let s = fov_deg.to_radians().sin();
    lens_index * lens_index / (s * s)
}

/// Radial distance of a uniformly placed device: inverse-CDF draw `R·√u`,
/// matching the triangular density `2r/R²` on `[0, R]`.
pub fn sample_user_radius<R: Rng + ?Sized>(cell_radius_m: f64, rng: &mut R) -> f64 {
    cell_radius_m * rng.gen::<f64>().sqrt()
}

/// Line-of-sight channel gain at radial offset `r`.
///
/// Zero when the incidence angle exceeds the FOV; otherwise `χ / d^(m+3)`.
pub fn channel_gain(cell: &OwcCellConfig, derived: &OwcDerived, radius_m: f64) -> Result<f64> {
    if radius_m < 0.0 {
        return Err(SimError::domain(format!("radius must be >= 0, got {radius_m}")));
    }
    let incidence = (radius_m / cell.height_m).atan();
    if incidence > cell.fov_deg.to_radians() {
        return Ok(0.0);
    }
    let d_sq = radius_m * radius_m + cell.height_m * cell.height_m;
    Ok(derived.chi / d_sq.powf((derived.lambertian_order + 3.0) / 2.0))
}

/// Electrical SNR of the optical link: `γ = μ h²`.
pub fn snr_owc(radio: &OwcRadioConfig, h: f64) -> f64 {
    radio.snr_scale() * h * h
}

/// Closed-form CDF of the SNR of a uniformly placed device.
pub fn snr_cdf(derived: &OwcDerived, cell: &OwcCellConfig, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(SimError::domain(format!("gamma must be > 0, got {gamma}")));
    }
    if gamma < derived.gamma_min_linear {
        return Ok(0.0);
    }
    if gamma > derived.gamma_max_linear {
        return Ok(1.0);
    }
    let r_sq = cell.cell_radius_m * cell.cell_radius_m;
    let l_sq = cell.height_m * cell.height_m;
    let inv_exp = 1.0 / (derived.lambertian_order + 3.0);
    Ok(1.0 + l_sq / r_sq - (derived.mu_chi_sq / gamma).powf(inv_exp) / r_sq)
}

/// Closed-form PDF of the SNR: power law on `[γ_min, γ_max]`, zero elsewhere.
pub fn snr_pdf(derived: &OwcDerived, cell: &OwcCellConfig, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(SimError::domain(format!("gamma must be > 0, got {gamma}")));
    }
    if gamma < derived.gamma_min_linear || gamma > derived.gamma_max_linear {
        return Ok(0.0);
    }
    let m3 = derived.lambertian_order + 3.0;
    let r_sq = cell.cell_radius_m * cell.cell_radius_m;
    Ok(derived.mu_chi_sq.powf(1.0 / m3) / (r_sq * m3) * gamma.powf(-(m3 + 1.0) / m3))
}

/// Probability that a packet misses the capture threshold, `P[γ < γ_th]`.
pub fn capture_erasure_prob(
    derived: &OwcDerived,
    cell: &OwcCellConfig,
    gamma_th: f64,
) -> Result<f64> {
    snr_cdf(derived, cell, gamma_th)
}

/// One geometric SNR draw: position → gain → SNR.
pub fn sample_user_snr<R: Rng + ?Sized>(
    cell: &OwcCellConfig,
    radio: &OwcRadioConfig,
    derived: &OwcDerived,
    rng: &mut R,
) -> f64 {
    let r = sample_user_radius(cell.cell_radius_m, rng);
    // radius is non-negative by construction
    let h = channel_gain(cell, derived, r).expect("sampled radius is non-negative");
    snr_owc(radio, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_cell() -> OwcCellConfig {
        OwcCellConfig {
            cell_radius_m: 2.0,
            height_m: 2.15,
            semi_angle_deg: 60.0,
            fov_deg: 90.0,
            detector_area_m2: 1e-4,
            responsivity_a_per_w: 0.4,
            filter_gain: 1.0,
            lens_index: 1.5,
        }
    }

    fn test_radio() -> OwcRadioConfig {
        OwcRadioConfig {
            tx_power_w: 0.01,
            oe_efficiency: 0.8,
            noise_density_w_per_hz: 1e-21,
            bandwidth_hz: 200e3,
            capture_threshold_linear: 1.0,
        }
    }

    #[test]
    fn lambertian_order_known_angles() {
        assert_relative_eq!(lambertian_order(60.0).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(lambertian_order(45.0).unwrap(), 2.0, max_relative = 1e-12);
        // frozen from a high-precision evaluation of -ln2/ln(cos 30°)
        assert_relative_eq!(
            lambertian_order(30.0).unwrap(),
            4.818841679306418,
            max_relative = 1e-12
        );
    }

    #[test]
    fn lambertian_order_decreasing_and_domain() {
        let mut prev = f64::INFINITY;
        for deg in [10.0, 20.0, 30.0, 45.0, 60.0, 80.0, 89.0] {
            let m = lambertian_order(deg).unwrap();
            assert!(m > 0.0 && m < prev);
            prev = m;
        }
        assert!(lambertian_order(0.0).is_err());
        assert!(lambertian_order(90.0).is_err());
        assert!(lambertian_order(-5.0).is_err());
    }

    #[test]
    fn radius_sampling_endpoints_and_mean() {
        // inverse-CDF endpoints
        assert_relative_eq!(2.0 * 0f64.sqrt(), 0.0);
        assert_relative_eq!(2.0 * 1f64.sqrt(), 2.0);
        // E[r] = 2R/3; sd of r is R*sqrt(1/2 - 4/9) ≈ 0.2357 R
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean: f64 =
            (0..n).map(|_| sample_user_radius(2.0, &mut rng)).sum::<f64>() / n as f64;
        let sd = 2.0 * (0.5f64 - 4.0 / 9.0).sqrt();
        let tol = 3.0 * sd / (n as f64).sqrt();
        assert!((mean - 4.0 / 3.0).abs() < tol, "mean {mean} vs 4/3 ± {tol}");
    }

    #[test]
    fn gain_endpoints() {
        let cell = test_cell();
        let derived = OwcDerived::new(&cell, &test_radio()).unwrap();
        let m3 = derived.lambertian_order + 3.0;
        let h0 = channel_gain(&cell, &derived, 0.0).unwrap();
        assert_relative_eq!(h0, derived.chi / cell.height_m.powf(m3), max_relative = 1e-12);
        let he = channel_gain(&cell, &derived, cell.cell_radius_m).unwrap();
        let d_sq = cell.cell_radius_m.powi(2) + cell.height_m.powi(2);
        assert_relative_eq!(he, derived.chi / d_sq.powf(m3 / 2.0), max_relative = 1e-12);
        assert!(channel_gain(&cell, &derived, -0.1).is_err());
    }

    #[test]
    fn gain_zero_outside_fov() {
        let mut cell = test_cell();
        cell.fov_deg = 45.0;
        let derived = OwcDerived::new(&cell, &test_radio()).unwrap();
        // incidence angle atan(r/L) > 45° once r > L
        let h = channel_gain(&cell, &derived, cell.height_m * 1.01).unwrap();
        assert_eq!(h, 0.0);
        assert!(channel_gain(&cell, &derived, cell.height_m * 0.99).unwrap() > 0.0);
    }

    #[test]
    fn gain_strictly_decreasing_in_radius() {
        let cell = test_cell();
        let derived = OwcDerived::new(&cell, &test_radio()).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let r = cell.cell_radius_m * i as f64 / 40.0;
            let h = channel_gain(&cell, &derived, r).unwrap();
            assert!(h < prev);
            prev = h;
        }
    }

    #[test]
    fn snr_at_cell_centre_and_edge_match_support_bounds() {
        let cell = test_cell();
        let radio = test_radio();
        let derived = OwcDerived::new(&cell, &radio).unwrap();
        let g0 = snr_owc(&radio, channel_gain(&cell, &derived, 0.0).unwrap());
        assert_relative_eq!(g0, derived.gamma_max_linear, max_relative = 1e-12);
        let ge = snr_owc(&radio, channel_gain(&cell, &derived, cell.cell_radius_m).unwrap());
        assert_relative_eq!(ge, derived.gamma_min_linear, max_relative = 1e-12);
        assert_eq!(snr_owc(&radio, 0.0), 0.0);
        assert!(derived.gamma_min_linear < derived.gamma_max_linear);
    }

    #[test]
    fn cdf_endpoints_exact() {
        let cell = test_cell();
        let derived = OwcDerived::new(&cell, &test_radio()).unwrap();
        let f_min = snr_cdf(&derived, &cell, derived.gamma_min_linear).unwrap();
        let f_max = snr_cdf(&derived, &cell, derived.gamma_max_linear).unwrap();
        assert!(f_min.abs() < 1e-12, "F(γ_min) = {f_min}");
        assert!((f_max - 1.0).abs() < 1e-12, "F(γ_max) = {f_max}");
        assert_eq!(snr_cdf(&derived, &cell, derived.gamma_min_linear * 0.5).unwrap(), 0.0);
        assert_eq!(snr_cdf(&derived, &cell, derived.gamma_max_linear * 2.0).unwrap(), 1.0);
        assert!(snr_cdf(&derived, &cell, 0.0).is_err());
    }

    #[test]
    fn cdf_monotone() {
        let cell = test_cell();
        let derived = OwcDerived::new(&cell, &test_radio()).unwrap();
        let lo = derived.gamma_min_linear * 0.5;
        let hi = derived.gamma_max_linear * 1.5;
        let mut prev = -1.0;
        for i in 0..=200 {
            let g = lo + (hi - lo) * i as f64 / 200.0;
            let f = snr_cdf(&derived, &cell, g).unwrap();
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn pdf_matches_cdf_derivative_at_midpoint() {
        let cell = test_cell();
        let derived = OwcDerived::new(&cell, &test_radio()).unwrap();
        let mid = (derived.gamma_min_linear + derived.gamma_max_linear) / 2.0;
        let eps = mid * 1e-6;
        let num = (snr_cdf(&derived, &cell, mid + eps).unwrap()
            - snr_cdf(&derived, &cell, mid - eps).unwrap())
            / (2.0 * eps);
        let pdf = snr_pdf(&derived, &cell, mid).unwrap();
        assert_relative_eq!(pdf, num, max_relative = 1e-4);
    }

    #[test]
    fn pdf_zero_outside_support() {
        let cell = test_cell();
        let derived = OwcDerived::new(&cell, &test_radio()).unwrap();
        assert_eq!(snr_pdf(&derived, &cell, derived.gamma_min_linear * 0.9).unwrap(), 0.0);
        assert_eq!(snr_pdf(&derived, &cell, derived.gamma_max_linear * 1.1).unwrap(), 0.0);
        assert!(snr_pdf(&derived, &cell, -1.0).is_err());
    }

    #[test]
    fn capture_erasure_endpoints() {
        let cell = test_cell();
        let derived = OwcDerived::new(&cell, &test_radio()).unwrap();
        assert_eq!(
            capture_erasure_prob(&derived, &cell, derived.gamma_min_linear * 0.5).unwrap(),
            0.0
        );
        assert_eq!(
            capture_erasure_prob(&derived, &cell, derived.gamma_max_linear * 2.0).unwrap(),
            1.0
        );
    }

    #[test]
    fn config_validation_reports_all_violations() {
        let mut cell = test_cell();
        cell.cell_radius_m = -1.0;
        cell.fov_deg = 120.0;
        match cell.validate() {
            Err(SimError::Validation(v)) => assert_eq!(v.len(), 2),
            other => panic!("expected validation error, got {other:?}"),
        }
    }
}
