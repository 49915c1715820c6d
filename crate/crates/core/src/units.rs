//! Unit conventions.
//!
//! Energies are carried in cm⁻¹ and times in fs. Every conversion between
//! wavenumbers and angular frequencies goes through [`CM_TO_RAD_PER_FS`].

use std::f64::consts::PI;

/// Speed of light in cm/fs.
pub const SPEED_OF_LIGHT_CM_PER_FS: f64 = 2.997_924_58e-5;

/// Angular frequency (rad/fs) of one wavenumber: 2πc · (1 cm⁻¹).
pub const CM_TO_RAD_PER_FS: f64 = 2.0 * PI * SPEED_OF_LIGHT_CM_PER_FS;

/// Gaussian FWHM to standard deviation.
pub const FWHM_TO_SIGMA: f64 = 0.424_660_900_144_009_5; // 1 / (2 sqrt(2 ln 2))

#[inline]
pub fn wavenumber_to_angular(cm: f64) -> f64 {
    cm * CM_TO_RAD_PER_FS
}

#[inline]
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm * FWHM_TO_SIGMA
}

/// Spectral standard deviation (cm⁻¹) of a transform-limited Gaussian field
/// envelope with the given temporal FWHM (fs).
pub fn envelope_bandwidth_cm(fwhm: f64) -> f64 {
    1.0 / (fwhm_to_sigma(fwhm) * CM_TO_RAD_PER_FS)
}
