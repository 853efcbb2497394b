//! Duty-cycle charge budget and battery lifetime.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::radio::{CurrentProfile, TxPowerLevel};

pub const HOURS_PER_DAY: f64 = 24.0;
pub const DAYS_PER_YEAR: f64 = 365.25;
/// Year length implied by the published lifetime-in-years figure.
pub const PUBLISHED_DAYS_PER_YEAR: f64 = 364.0;

/// One wake/sleep cycle of the node. Defaults are the node's battery-budget
/// table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DutyCycleProfile {
    pub overhead_bits: u32,
    pub payload_bits: u32,
    pub bitrate_bps: f64,
    /// TX-active seconds per cycle.
    pub time_on_air_s: f64,
    pub time_in_rx_s: f64,
    pub pll_lock_s: f64,
    pub power_up_s: f64,
    pub period_s: f64,
    pub mcu_tx_ma: f64,
    pub mcu_rx_ma: f64,
    pub pll_tx_ma: f64,
    pub pll_rx_ma: f64,
    pub power_down_ma: f64,
    pub power_up_ma: f64,
}

impl Default for DutyCycleProfile {
    fn default() -> Self {
        DutyCycleProfile {
            overhead_bits: 65,
            payload_bits: 8,
            bitrate_bps: 2_000_000.0,
            time_on_air_s: 0.3,
            time_in_rx_s: 0.00003252,
            pll_lock_s: 0.00013,
            power_up_s: 0.0015,
            period_s: 55.7,
            mcu_tx_ma: 11.6,
            mcu_rx_ma: 12.9,
            pll_tx_ma: 8.0,
            pll_rx_ma: 8.4,
            power_down_ma: 0.0009,
            power_up_ma: 0.285,
        }
    }
}

impl DutyCycleProfile {
    /// Same cycle with the TX current taken from `currents` at `level`.
    pub fn with_tx_level(&self, level: TxPowerLevel, currents: &CurrentProfile) -> Self {
        DutyCycleProfile {
            mcu_tx_ma: currents.tx(level),
            ..self.clone()
        }
    }

    /// Time the radio spends out of power-down: TX, RX and both PLL locks.
    /// The power-up ramp is billed on top of the sleep floor and does not
    /// shorten the sleep interval.
    pub fn radio_active_s(&self) -> f64 {
        self.time_on_air_s + self.time_in_rx_s + 2.0 * self.pll_lock_s
    }

    pub fn sleep_s(&self) -> f64 {
        self.period_s - self.radio_active_s()
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("time_on_air_s", self.time_on_air_s),
            ("time_in_rx_s", self.time_in_rx_s),
            ("pll_lock_s", self.pll_lock_s),
            ("power_up_s", self.power_up_s),
            ("mcu_tx_ma", self.mcu_tx_ma),
            ("mcu_rx_ma", self.mcu_rx_ma),
            ("pll_tx_ma", self.pll_tx_ma),
            ("pll_rx_ma", self.pll_rx_ma),
            ("power_down_ma", self.power_down_ma),
            ("power_up_ma", self.power_up_ma),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.period_s > 0.0) {
            return Err(Error::Config("period_s must be positive".into()));
        }
        let active = self.radio_active_s() + self.power_up_s;
        if active >= self.period_s {
            return Err(Error::InfeasibleProfile {
                active_s: active,
                period_s: self.period_s,
            });
        }
        Ok(())
    }

    /// Seconds one frame of `overhead_bits + payload_bits` occupies the air.
    pub fn frame_air_time_s(&self) -> f64 {
        (self.overhead_bits + self.payload_bits) as f64 / self.bitrate_bps
    }

    /// Frames per wake-up implied by reading `time_on_air_s` as back-to-back frames.
    pub fn implied_frames_per_wakeup(&self) -> f64 {
        self.time_on_air_s / self.frame_air_time_s()
    }

    /// Charge drawn in each phase of one cycle, in mA·s.
    pub fn phases(&self) -> Vec<PhaseCharge> {
        let phase = |name, current_ma: f64, duration_s: f64| PhaseCharge {
            name,
            current_ma,
            duration_s,
            charge_mas: current_ma * duration_s,
        };
        vec![
            phase("tx", self.mcu_tx_ma, self.time_on_air_s),
            phase("rx", self.mcu_rx_ma, self.time_in_rx_s),
            phase("pll_lock_tx", self.pll_tx_ma, self.pll_lock_s),
            phase("pll_lock_rx", self.pll_rx_ma, self.pll_lock_s),
            phase("power_up", self.power_up_ma, self.power_up_s),
            phase("power_down", self.power_down_ma, self.sleep_s()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCharge {
    pub name: &'static str,
    pub current_ma: f64,
    pub duration_s: f64,
    pub charge_mas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub capacity_mah: f64,
}

impl Default for Battery {
    fn default() -> Self {
        Battery {
            capacity_mah: 2450.0,
        }
    }
}

impl Battery {
    pub fn validate(&self) -> Result<()> {
        if self.capacity_mah > 0.0 && self.capacity_mah.is_finite() {
            Ok(())
        } else {
            Err(Error::Config("battery capacity must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lifetime {
    pub hours: f64,
    pub days: f64,
    pub years: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub phases: Vec<PhaseCharge>,
    pub period_s: f64,
    pub average_current_ma: f64,
    pub lifetime: Lifetime,
}

impl EnergyReport {
    pub fn total_charge_mas(&self) -> f64 {
        self.phases.iter().map(|p| p.charge_mas).sum()
    }
}

/// Cycle-averaged supply current in mA.
pub fn average_current(profile: &DutyCycleProfile) -> Result<f64> {
    profile.validate()?;
    let charge: f64 = profile.phases().iter().map(|p| p.charge_mas).sum();
    Ok(charge / profile.period_s)
}

pub fn lifetime(battery: &Battery, i_avg_ma: f64) -> Result<Lifetime> {
    battery.validate()?;
    if !(i_avg_ma > 0.0) {
        return Err(domain(format!(
            "average current must be positive, got {i_avg_ma}"
        )));
    }
    let hours = battery.capacity_mah / i_avg_ma;
    let days = hours / HOURS_PER_DAY;
    Ok(Lifetime {
        hours,
        days,
        years: days / DAYS_PER_YEAR,
    })
}

pub fn energy_report(profile: &DutyCycleProfile, battery: &Battery) -> Result<EnergyReport> {
    let average_current_ma = average_current(profile)?;
    Ok(EnergyReport {
        phases: profile.phases(),
        period_s: profile.period_s,
        average_current_ma,
        lifetime: lifetime(battery, average_current_ma)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLevelRow {
    pub level: TxPowerLevel,
    pub mcu_tx_ma: f64,
    pub average_current_ma: f64,
    pub lifetime_hours: f64,
}

/// One profile per TX power level from a base cycle and a current table.
pub fn profiles_for_levels(
    base: &DutyCycleProfile,
    currents: &CurrentProfile,
) -> Vec<(TxPowerLevel, DutyCycleProfile)> {
    TxPowerLevel::ALL
        .iter()
        .map(|&l| (l, base.with_tx_level(l, currents)))
        .collect()
}

/// Lifetime per TX power level, sorted by ascending output power.
pub fn lifetime_vs_power(
    profiles: &[(TxPowerLevel, DutyCycleProfile)],
    battery: &Battery,
) -> Result<Vec<PowerLevelRow>> {
    if let Some((_, first)) = profiles.first() {
        for (level, p) in profiles {
            let normalised = DutyCycleProfile {
                mcu_tx_ma: first.mcu_tx_ma,
                ..p.clone()
            };
            if &normalised != first {
                return Err(Error::Config(format!(
                    "profile for {} differs from the others in more than mcu_tx_ma",
                    level.label()
                )));
            }
        }
    }
    let mut rows = profiles
        .iter()
        .map(|(level, p)| {
            let i = average_current(p)?;
            Ok(PowerLevelRow {
                level: *level,
                mcu_tx_ma: p.mcu_tx_ma,
                average_current_ma: i,
                lifetime_hours: lifetime(battery, i)?.hours,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.level);
    Ok(rows)
}
