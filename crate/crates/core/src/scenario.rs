//! Scenario file parsing.
//!
//! Scenarios are flat TOML with units spelled out in the key names, so a
//! reader can never mistake a dB value for a linear one. Every field has a
//! default; an empty file yields the stock configuration (K = 5 cells of
//! U = 5 users, SF 7 at its nominal distance, 60° LEDs over a 2 m cell).

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::engine::Scenario;
use crate::error::{Result, SimError};
use crate::lora::{sf_row, DistanceMode, LoraLinkConfig, SfRow};
use crate::owc::{OwcCellConfig, OwcRadioConfig};
use crate::units;

fn default_num_cells() -> usize { 5 }
fn default_users_per_cell() -> usize { 5 }
fn default_activation_prob() -> f64 { 0.1 }
fn default_multirate_factor() -> usize { 1 }
fn default_num_owc_slots() -> u64 { 100_000 }

fn default_cell_radius_m() -> f64 { 2.0 }
fn default_height_m() -> f64 { 2.15 }
fn default_semi_angle_deg() -> f64 { 60.0 }
fn default_fov_deg() -> f64 { 90.0 }
fn default_detector_area_cm2() -> f64 { 1.0 }
fn default_responsivity() -> f64 { 0.4 }
fn default_filter_gain() -> f64 { 1.0 }
fn default_lens_index() -> f64 { 1.5 }
fn default_owc_tx_power_dbm() -> f64 { 10.0 }
fn default_oe_efficiency() -> f64 { 0.8 }
fn default_noise_density() -> f64 { 1e-21 }
fn default_owc_bandwidth_khz() -> f64 { 200.0 }
fn default_capture_threshold_db() -> f64 { 0.0 }

fn default_spreading_factor() -> u8 { 7 }
fn default_rf_bandwidth_khz() -> f64 { 125.0 }
fn default_noise_figure_db() -> f64 { 6.0 }
fn default_rf_tx_power_dbm() -> f64 { 14.0 }
fn default_carrier_mhz() -> f64 { 868.1 }
fn default_path_loss_exp() -> f64 { 2.7 }
fn default_sir_margin() -> f64 { 4.0 }
fn default_ring_width_km() -> f64 { 1.0 }
fn default_distance_mode() -> DistanceMode { DistanceMode::Fixed }

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_num_cells")]
    pub num_cells: usize,
    #[serde(default = "default_users_per_cell")]
    pub users_per_cell: usize,
    #[serde(default = "default_activation_prob")]
    pub activation_prob: f64,
    #[serde(default = "default_multirate_factor")]
    pub multirate_factor: usize,
    #[serde(default = "default_num_owc_slots")]
    pub num_owc_slots: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub owc: OwcSection,
    #[serde(default)]
    pub lora: LoraSection,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        toml::from_str("").expect("empty scenario deserializes from defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OwcSection {
    #[serde(default = "default_cell_radius_m")]
    pub cell_radius_m: f64,
    #[serde(default = "default_height_m")]
    pub height_m: f64,
    #[serde(default = "default_semi_angle_deg")]
    pub semi_angle_deg: f64,
    #[serde(default = "default_fov_deg")]
    pub fov_deg: f64,
    #[serde(default = "default_detector_area_cm2")]
    pub detector_area_cm2: f64,
    #[serde(default = "default_responsivity")]
    pub responsivity_a_per_w: f64,
    #[serde(default = "default_filter_gain")]
    pub filter_gain: f64,
    #[serde(default = "default_lens_index")]
    pub lens_index: f64,
    #[serde(default = "default_owc_tx_power_dbm")]
    pub tx_power_dbm: f64,
    #[serde(default = "default_oe_efficiency")]
    pub oe_efficiency: f64,
    #[serde(default = "default_noise_density")]
    pub noise_density_w_per_hz: f64,
    #[serde(default = "default_owc_bandwidth_khz")]
    pub bandwidth_khz: f64,
    #[serde(default = "default_capture_threshold_db")]
    pub capture_threshold_db: f64,
}

impl Default for OwcSection {
    fn default() -> Self {
        toml::from_str("").expect("empty OWC section deserializes from defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoraSection {
    #[serde(default = "default_spreading_factor")]
    pub spreading_factor: u8,
    #[serde(default = "default_rf_bandwidth_khz")]
    pub rf_bandwidth_khz: f64,
    #[serde(default = "default_noise_figure_db")]
    pub noise_figure_db: f64,
    #[serde(default = "default_rf_tx_power_dbm")]
    pub tx_power_dbm: f64,
    #[serde(default = "default_carrier_mhz")]
    pub carrier_mhz: f64,
    #[serde(default = "default_path_loss_exp")]
    pub path_loss_exp: f64,
    #[serde(default = "default_sir_margin")]
    pub sir_margin: f64,
    #[serde(default = "default_ring_width_km")]
    pub ring_width_km: f64,
    #[serde(default = "default_distance_mode")]
    pub distance_mode: DistanceMode,
    /// Optional replacement for the built-in SF parameter table, for
    /// sensitivity studies. Must still cover the requested SF.
    #[serde(default)]
    pub sf_table: Option<Vec<SfRow>>,
}

impl Default for LoraSection {
    fn default() -> Self {
        toml::from_str("").expect("empty LoRa section deserializes from defaults")
    }
}

impl ScenarioFile {
    /// Resolve units and the SF row, then validate everything at once.
    pub fn into_scenario(self) -> Result<Scenario> {
        let row = match &self.lora.sf_table {
            Some(table) => table
                .iter()
                .copied()
                .find(|r| r.sf == self.lora.spreading_factor)
                .ok_or_else(|| {
                    SimError::Validation(vec![format!(
                        "sf_table override has no row for spreading factor {}",
                        self.lora.spreading_factor
                    )])
                })?,
            None => sf_row(self.lora.spreading_factor)
                .map_err(|_| {
                    SimError::Validation(vec![format!(
                        "spreading_factor must be 7..=12, got {}",
                        self.lora.spreading_factor
                    )])
                })?,
        };
        let scenario = Scenario {
            num_cells: self.num_cells,
            users_per_cell: self.users_per_cell,
            activation_prob: self.activation_prob,
            multirate_factor: self.multirate_factor,
            num_owc_slots: self.num_owc_slots,
            master_seed: self.master_seed,
            owc_cell: OwcCellConfig {
                cell_radius_m: self.owc.cell_radius_m,
                height_m: self.owc.height_m,
                semi_angle_deg: self.owc.semi_angle_deg,
                fov_deg: self.owc.fov_deg,
                detector_area_m2: self.owc.detector_area_cm2 * 1e-4,
                responsivity_a_per_w: self.owc.responsivity_a_per_w,
                filter_gain: self.owc.filter_gain,
                lens_index: self.owc.lens_index,
            },
            owc_radio: OwcRadioConfig {
                tx_power_w: units::dbm_to_watts(self.owc.tx_power_dbm),
                oe_efficiency: self.owc.oe_efficiency,
                noise_density_w_per_hz: self.owc.noise_density_w_per_hz,
                bandwidth_hz: self.owc.bandwidth_khz * 1e3,
                capture_threshold_linear: units::db_to_linear(self.owc.capture_threshold_db),
            },
            lora: LoraLinkConfig {
                sf_row: row,
                rf_bandwidth_hz: self.lora.rf_bandwidth_khz * 1e3,
                noise_figure_db: self.lora.noise_figure_db,
                tx_power_dbm: self.lora.tx_power_dbm,
                carrier_hz: self.lora.carrier_mhz * 1e6,
                path_loss_exp: self.lora.path_loss_exp,
                sir_margin_linear: self.lora.sir_margin,
                ring_width_km: self.lora.ring_width_km,
                distance_mode: self.lora.distance_mode,
            },
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Parse a scenario TOML string. `origin` is used in error messages.
pub fn parse_scenario_str(text: &str, origin: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| SimError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    file.into_scenario()
}

/// Load and validate a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_str(&text, &path.display().to_string())
}
