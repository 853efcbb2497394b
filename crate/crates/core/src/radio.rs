//! Radio power-mode state machine and current/timing profiles.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RadioMode {
    PowerDown,
    StandbyI,
    PllLockTx,
    PllLockRx,
    TxActive,
    RxActive,
}

impl RadioMode {
    pub const ALL: [RadioMode; 6] = [
        RadioMode::PowerDown,
        RadioMode::StandbyI,
        RadioMode::PllLockTx,
        RadioMode::PllLockRx,
        RadioMode::TxActive,
        RadioMode::RxActive,
    ];
}

/// Abstract register writes and pin changes issued by the host MCU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Command {
    SetPwrUp,
    ClearPwrUp,
    CeHighTx,
    CeHighRx,
    CeLow,
    TxDone,
    RxDone,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::SetPwrUp,
        Command::ClearPwrUp,
        Command::CeHighTx,
        Command::CeHighRx,
        Command::CeLow,
        Command::TxDone,
        Command::RxDone,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxPowerLevel {
    #[serde(rename = "-18dBm")]
    Minus18,
    #[serde(rename = "-12dBm")]
    Minus12,
    #[serde(rename = "-6dBm")]
    Minus6,
    #[serde(rename = "0dBm")]
    Zero,
}

impl TxPowerLevel {
    /// Ascending output power.
    pub const ALL: [TxPowerLevel; 4] = [
        TxPowerLevel::Minus18,
        TxPowerLevel::Minus12,
        TxPowerLevel::Minus6,
        TxPowerLevel::Zero,
    ];

    pub fn dbm(self) -> f64 {
        match self {
            TxPowerLevel::Minus18 => -18.0,
            TxPowerLevel::Minus12 => -12.0,
            TxPowerLevel::Minus6 => -6.0,
            TxPowerLevel::Zero => 0.0,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            TxPowerLevel::Minus18 => "-18dBm",
            TxPowerLevel::Minus12 => "-12dBm",
            TxPowerLevel::Minus6 => "-6dBm",
            TxPowerLevel::Zero => "0dBm",
        }
    }
}

/// Per-mode supply current in mA.
///
/// `tx_ma` is indexed by [`TxPowerLevel::ALL`] order (-18, -12, -6, 0 dBm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentProfile {
    pub power_down_ma: f64,
    pub standby_ma: f64,
    pub power_up_ma: f64,
    pub pll_lock_tx_ma: f64,
    pub pll_lock_rx_ma: f64,
    pub tx_ma: [f64; 4],
    pub rx_ma: f64,
}

impl Default for CurrentProfile {
    fn default() -> Self {
        Self::system()
    }
}

impl CurrentProfile {
    /// MCU + radio system currents from the node's battery-budget table.
    ///
    /// Only the 0 dBm TX entry is measured. The -6/-12/-18 dBm entries are
    /// placeholders stepping 0.2 mA per dB down to 8.0 mA; override them from
    /// configuration when real figures are available.
    pub fn system() -> Self {
        CurrentProfile {
            power_down_ma: 0.0009,
            standby_ma: 0.032,
            power_up_ma: 0.285,
            pll_lock_tx_ma: 8.0,
            pll_lock_rx_ma: 8.4,
            tx_ma: [8.0, 9.2, 10.4, 11.6],
            rx_ma: 12.9,
        }
    }

    /// Radio-only datasheet currents. Only power-down (400 nA), standby
    /// (32 uA), RX (12.5 mA) and TX at -6 dBm (8.5 mA) are sourced; the rest
    /// are placeholders.
    pub fn radio_only() -> Self {
        CurrentProfile {
            power_down_ma: 0.0004,
            standby_ma: 0.032,
            power_up_ma: 0.285,
            pll_lock_tx_ma: 8.0,
            pll_lock_rx_ma: 8.4,
            tx_ma: [7.0, 7.5, 8.5, 11.3],
            rx_ma: 12.5,
        }
    }

    pub fn tx(&self, level: TxPowerLevel) -> f64 {
        self.tx_ma[level.index()]
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.power_down_ma,
            self.standby_ma,
            self.power_up_ma,
            self.pll_lock_tx_ma,
            self.pll_lock_rx_ma,
            self.rx_ma,
        ];
        if all
            .iter()
            .chain(self.tx_ma.iter())
            .any(|&c| !(c > 0.0 && c.is_finite()))
        {
            return Err(Error::Config("all currents must be positive".into()));
        }
        if self.tx_ma.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config(
                "tx_ma must be non-decreasing in output power".into(),
            ));
        }
        if !(self.power_down_ma < self.standby_ma && self.standby_ma < self.rx_ma) {
            return Err(Error::Config(
                "currents must satisfy power_down < standby < rx".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingProfile {
    pub power_up_s: f64,
    pub pll_lock_s: f64,
    pub standby_wakeup_s: f64,
}

impl Default for TimingProfile {
    fn default() -> Self {
        TimingProfile {
            power_up_s: 0.0015,
            pll_lock_s: 0.00013,
            standby_wakeup_s: 0.00013,
        }
    }
}

impl TimingProfile {
    pub fn validate(&self) -> Result<()> {
        if [self.power_up_s, self.pll_lock_s, self.standby_wakeup_s]
            .iter()
            .any(|&t| !(t >= 0.0 && t.is_finite()))
        {
            return Err(Error::Config("timings must be non-negative".into()));
        }
        Ok(())
    }
}

/// Transient phase a transition passes through, billed at its own current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transient {
    PowerUp,
    PllLockTx,
    PllLockRx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: RadioMode,
    pub to: RadioMode,
    pub transient: Option<Transient>,
    pub duration_s: f64,
}

/// Successor mode for `command` in `mode`, and the time the change takes.
pub fn apply_command(
    mode: RadioMode,
    command: Command,
    timing: &TimingProfile,
) -> Result<Transition> {
    use Command::*;
    use RadioMode::*;

    let (to, transient, duration_s) = match (mode, command) {
        (_, ClearPwrUp) => (PowerDown, None, 0.0),
        (PowerDown, SetPwrUp) => (StandbyI, Some(Transient::PowerUp), timing.power_up_s),
        (PowerDown, CeLow) => (PowerDown, None, 0.0),
        (m, SetPwrUp) => (m, None, 0.0),
        (StandbyI, CeHighTx) => (TxActive, Some(Transient::PllLockTx), timing.pll_lock_s),
        (StandbyI, CeHighRx) => (RxActive, Some(Transient::PllLockRx), timing.pll_lock_s),
        (StandbyI | PllLockTx | PllLockRx | TxActive | RxActive, CeLow) => (StandbyI, None, 0.0),
        (TxActive, TxDone) => (StandbyI, None, 0.0),
        (RxActive, RxDone) => (StandbyI, None, 0.0),
        _ => return Err(Error::ProtocolViolation { mode, command }),
    };
    Ok(Transition {
        from: mode,
        to,
        transient,
        duration_s,
    })
}

pub fn mode_current(mode: RadioMode, level: TxPowerLevel, profile: &CurrentProfile) -> f64 {
    match mode {
        RadioMode::PowerDown => profile.power_down_ma,
        RadioMode::StandbyI => profile.standby_ma,
        RadioMode::PllLockTx => profile.pll_lock_tx_ma,
        RadioMode::PllLockRx => profile.pll_lock_rx_ma,
        RadioMode::TxActive => profile.tx(level),
        RadioMode::RxActive => profile.rx_ma,
    }
}

pub fn transient_current(transient: Transient, profile: &CurrentProfile) -> f64 {
    match transient {
        Transient::PowerUp => profile.power_up_ma,
        Transient::PllLockTx => profile.pll_lock_tx_ma,
        Transient::PllLockRx => profile.pll_lock_rx_ma,
    }
}

/// Charge in mA·s drawn while resting in `mode` for `dwell_s`.
pub fn charge_for_dwell(
    mode: RadioMode,
    level: TxPowerLevel,
    profile: &CurrentProfile,
    dwell_s: f64,
) -> Result<f64> {
    if dwell_s < 0.0 || dwell_s.is_nan() {
        return Err(domain(format!("dwell must be non-negative, got {dwell_s}")));
    }
    Ok(mode_current(mode, level, profile) * dwell_s)
}

/// Settings held in registers; they survive power-down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub tx_power: TxPowerLevel,
    pub rf_channel: u8,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            tx_power: TxPowerLevel::Zero,
            rf_channel: 2,
        }
    }
}

/// One owned radio instance. Starts powered down.
#[derive(Debug, Clone)]
pub struct Radio {
    mode: RadioMode,
    config: RadioConfig,
    timing: TimingProfile,
}

impl Radio {
    pub fn new(config: RadioConfig, timing: TimingProfile) -> Self {
        Radio {
            mode: RadioMode::PowerDown,
            config,
            timing,
        }
    }

    pub fn mode(&self) -> RadioMode {
        self.mode
    }

    pub fn config(&self) -> &RadioConfig {
        &self.config
    }

    pub fn timing(&self) -> &TimingProfile {
        &self.timing
    }

    /// Register writes are accepted in every mode, power-down included.
    pub fn configure(&mut self, config: RadioConfig) {
        self.config = config;
    }

    pub fn apply(&mut self, command: Command) -> Result<Transition> {
        let t = apply_command(self.mode, command, &self.timing)?;
        self.mode = t.to;
        Ok(t)
    }
}
