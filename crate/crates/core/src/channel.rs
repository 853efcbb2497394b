//! Free-space link budget and bit/packet error statistics.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub frequency_hz: f64,
    pub range_m: f64,
    pub tx_power_dbm: f64,
    pub tx_antenna_gain_db: f64,
    pub rx_antenna_gain_db: f64,
    pub rx_sensitivity_dbm: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            frequency_hz: 2.4e9,
            range_m: 1.0,
            tx_power_dbm: 0.0,
            tx_antenna_gain_db: -5.0,
            rx_antenna_gain_db: 0.0,
            rx_sensitivity_dbm: -75.0,
        }
    }
}

impl ChannelParams {
    pub fn with_range(&self, range_m: f64) -> Self {
        ChannelParams {
            range_m,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("range", self.range_m)?;
        check_positive("frequency", self.frequency_hz)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive, got {v}")))
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Free-space loss in dB, `-20 log10(λ / 4πR)`.
pub fn free_space_loss_db(range_m: f64, frequency_hz: f64) -> Result<f64> {
    check_positive("range", range_m)?;
    check_positive("frequency", frequency_hz)?;
    let wavelength = SPEED_OF_LIGHT / frequency_hz;
    Ok(-20.0 * (wavelength / (4.0 * PI * range_m)).log10())
}

/// Transmit power plus antenna gains.
pub fn effective_radiated_power_dbm(params: &ChannelParams) -> f64 {
    params.tx_power_dbm + params.tx_antenna_gain_db
}

pub fn received_power_dbm(params: &ChannelParams) -> Result<f64> {
    let fsl = free_space_loss_db(params.range_m, params.frequency_hz)?;
    Ok(params.tx_power_dbm + params.tx_antenna_gain_db + params.rx_antenna_gain_db - fsl)
}

pub fn link_margin_db(params: &ChannelParams) -> Result<f64> {
    Ok(received_power_dbm(params)? - params.rx_sensitivity_dbm)
}

/// Largest free-space loss for which the link still closes (zero margin).
pub fn max_tolerable_fsl_db(params: &ChannelParams) -> f64 {
    params.tx_power_dbm + params.tx_antenna_gain_db + params.rx_antenna_gain_db
        - params.rx_sensitivity_dbm
}

/// Probability that at least one of `length_bits` independent bits is in error.
pub fn per_from_ber(ber: f64, length_bits: usize) -> Result<f64> {
    check_probability("ber", ber)?;
    // ln_1p / exp_m1 keep precision for tiny BER
    if ber == 1.0 {
        return Ok(if length_bits == 0 { 0.0 } else { 1.0 });
    }
    Ok(-(length_bits as f64 * (-ber).ln_1p()).exp_m1())
}

pub fn ber_from_per(per: f64, length_bits: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&per) {
        return Err(domain(format!("per must lie in [0, 1), got {per}")));
    }
    if length_bits == 0 {
        return Err(domain("packet length must be at least one bit"));
    }
    Ok(-((-per).ln_1p() / length_bits as f64).exp_m1())
}

/// Positions flipped when `length_bits` bits each err independently with probability `ber`.
pub fn sample_corruption<R: Rng + ?Sized>(rng: &mut R, length_bits: usize, ber: f64) -> Vec<usize> {
    if ber <= 0.0 {
        return Vec::new();
    }
    (0..length_bits)
        .filter(|_| rng.random::<f64>() < ber)
        .collect()
}

/// Mapping from link conditions to bit error probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BerModel {
    Fixed {
        ber: f64,
    },
    Threshold {
        ber_below_sensitivity: f64,
        ber_above: f64,
    },
    /// `(link_margin_db, ber)` points, interpolated linearly in log10(ber).
    Table {
        points: Vec<(f64, f64)>,
    },
}

impl Default for BerModel {
    fn default() -> Self {
        BerModel::Fixed { ber: 0.0 }
    }
}

impl BerModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            BerModel::Fixed { ber } => check_probability("ber", *ber),
            BerModel::Threshold {
                ber_below_sensitivity,
                ber_above,
            } => {
                check_probability("ber_below_sensitivity", *ber_below_sensitivity)?;
                check_probability("ber_above", *ber_above)
            }
            BerModel::Table { points } => {
                if points.is_empty() {
                    return Err(Error::Config("ber table needs at least one point".into()));
                }
                for &(_, ber) in points {
                    if !(ber > 0.0 && ber <= 1.0) {
                        return Err(domain(format!(
                            "ber table values must lie in (0, 1], got {ber}"
                        )));
                    }
                }
                if points.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::Config(
                        "ber table must be strictly sorted by margin".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Bit error probability at the given link margin. Table lookups clamp
    /// to the end points outside the tabulated range.
    pub fn ber(&self, margin_db: f64) -> f64 {
        match self {
            BerModel::Fixed { ber } => *ber,
            BerModel::Threshold {
                ber_below_sensitivity,
                ber_above,
            } => {
                if margin_db < 0.0 {
                    *ber_below_sensitivity
                } else {
                    *ber_above
                }
            }
            BerModel::Table { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if margin_db <= first.0 {
                    return first.1;
                }
                if margin_db >= last.0 {
                    return last.1;
                }
                let i = points.partition_point(|p| p.0 <= margin_db);
                let (m0, b0) = points[i - 1];
                let (m1, b1) = points[i];
                let t = (margin_db - m0) / (m1 - m0);
                10f64.powf(b0.log10() + t * (b1.log10() - b0.log10()))
            }
        }
    }

    pub fn ber_for(&self, params: &ChannelParams) -> Result<f64> {
        Ok(self.ber(link_margin_db(params)?))
    }
}
