//! Mapping between poles and perceptual decay descriptors.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest pole magnitude whose mode still lasts `t_tr` seconds, `10^(−6/(t_tr·fs_e))`.
pub fn magnitude_threshold(t_tr: f64, fs_e: f64) -> f64 {
    10f64.powf(-6.0 / (t_tr * fs_e))
}

/// Reverberation time (60 dB energy decay) of a pole, in seconds.
pub fn t60_of_pole(p: Complex64, fs_e: f64) -> Result<f64> {
    let m = p.norm();
    if m == 0.0 {
        return Err(Error::Domain("pole at the origin has no decay time".into()));
    }
    if m == 1.0 {
        return Err(Error::UndefinedT60);
    }
    Ok(1e-6f64.ln() / (fs_e * m.ln()))
}

/// Oscillation frequency of a pole's energy envelope, in Hz.
pub fn freq_of_pole(p: Complex64, fs_e: f64) -> Result<f64> {
    if p.norm() == 0.0 {
        return Err(Error::Domain("pole at the origin has no phase".into()));
    }
    Ok(fs_e * p.arg() / (2.0 * PI))
}

/// `(t60_s, freq_hz)` of a pole.
pub fn pole_descriptors(p: Complex64, fs_e: f64) -> Result<(f64, f64)> {
    Ok((t60_of_pole(p, fs_e)?, freq_of_pole(p, fs_e)?))
}

/// Inverse of [`pole_descriptors`].
pub fn pole_from_descriptors(t60: f64, freq: f64, fs_e: f64) -> Complex64 {
    let magnitude = 10f64.powf(-6.0 / (t60 * fs_e));
    Complex64::from_polar(magnitude, 2.0 * PI * freq / fs_e)
}
