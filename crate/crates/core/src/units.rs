//! Conversion between the internal `g = 1` units and SI.

use std::f64::consts::PI;

/// Reference coupling `g = 2π × 10 kHz`, in rad/s.
pub const G_SI: f64 = 2.0 * PI * 10.0e3;

/// Rate in units of `g` to rad/s.
pub fn rate_to_si(rate: f64) -> f64 {
    rate * G_SI
}

/// Rate in rad/s to units of `g`.
pub fn rate_from_si(rate: f64) -> f64 {
    rate / G_SI
}

/// Time in units of `1/g` to seconds.
pub fn time_to_si(t: f64) -> f64 {
    t / G_SI
}

/// Time in seconds to units of `1/g`.
pub fn time_from_si(t: f64) -> f64 {
    t * G_SI
}
