//! Frequency and angle newtypes.
//!
//! Values keep the unit they were written in (Hz, degrees) so that a config
//! document survives a load/save cycle bit for bit. Physics code only ever
//! reads them through [`Frequency::angular`] and [`Angle::radians`].

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

/// An ordinary frequency, exposed to the physics as rad/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frequency(f64);

impl Frequency {
    pub const fn from_hz(hz: f64) -> Self {
        Frequency(hz)
    }

    pub fn from_angular(rad_per_s: f64) -> Self {
        Frequency(rad_per_s / TAU)
    }

    pub fn hz(self) -> f64 {
        self.0
    }

    /// Angular frequency in rad/s.
    pub fn angular(self) -> f64 {
        TAU * self.0
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Hz", self.0)
    }
}

/// A plane angle, stored in degrees.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const fn from_degrees(deg: f64) -> Self {
        Angle(deg)
    }

    pub fn from_radians(rad: f64) -> Self {
        Angle(rad.to_degrees())
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.0)
    }
}
