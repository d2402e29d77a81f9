//! dB / dBm / linear conversions.
//!
//! All internal arithmetic is carried out on linear quantities (watts,
//! dimensionless ratios). Decibel values appear only at configuration and
//! reporting boundaries, and every conversion goes through this module.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// dB ratio to linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear ratio to dB.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Carrier wavelength (m) from carrier frequency (Hz).
pub fn wavelength_m(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT_M_PER_S / carrier_hz
}
