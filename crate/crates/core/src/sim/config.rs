//! Experiment configuration, one TOML document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{BerModel, ChannelParams};
use crate::energy::{Battery, DutyCycleProfile};
use crate::error::{Error, Result};
use crate::packet::{PacketConfig, MAX_PAYLOAD};
use crate::radio::{CurrentProfile, TimingProfile, TxPowerLevel};
use crate::shockburst::{RetransmitPolicy, PIPE_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PerSweep,
    FslTable,
    BerPerCurve,
    LifetimeReport,
    Network,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PerSweep => "per_sweep",
            ExperimentKind::FslTable => "fsl_table",
            ExperimentKind::BerPerCurve => "ber_per_curve",
            ExperimentKind::LifetimeReport => "lifetime_report",
            ExperimentKind::Network => "network",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioSection {
    pub tx_power: TxPowerLevel,
    pub currents: CurrentProfile,
    pub timing: TimingProfile,
}

impl Default for RadioSection {
    fn default() -> Self {
        RadioSection {
            tx_power: TxPowerLevel::Zero,
            currents: CurrentProfile::system(),
            timing: TimingProfile::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerSection {
    pub packet_counts: Vec<usize>,
    pub ranges_m: Vec<f64>,
    pub payload_bytes: usize,
    pub no_ack: bool,
    pub interval_s: f64,
    /// Allow packet counts outside 100..=5000.
    pub allow_any_count: bool,
}

impl Default for PerSection {
    fn default() -> Self {
        PerSection {
            packet_counts: vec![100, 500, 1000, 2000, 5000],
            ranges_m: vec![1.0],
            payload_bytes: 1,
            no_ack: true,
            interval_s: 0.01,
            allow_any_count: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FslSection {
    pub ranges_m: Vec<f64>,
}

impl Default for FslSection {
    fn default() -> Self {
        FslSection {
            ranges_m: (1..=10).map(f64::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveSection {
    pub ber_min: f64,
    pub ber_max: f64,
    pub points: usize,
    pub include_zero: bool,
    pub payload_bytes: Vec<usize>,
}

impl Default for CurveSection {
    fn default() -> Self {
        CurveSection {
            ber_min: 1e-7,
            ber_max: 1e-1,
            points: 50,
            include_zero: true,
            payload_bytes: vec![1, 8, 16, 32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EnergySection {
    pub duty_cycle: DutyCycleProfile,
    pub battery: Battery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSection {
    pub ptx_nodes: usize,
    pub packets_per_node: usize,
    pub payload_bytes: usize,
    pub interval_s: f64,
    pub stagger_s: f64,
    pub start_s: f64,
    pub no_ack: bool,
    /// One range per PTX node; a single value applies to all of them.
    pub ranges_m: Vec<f64>,
    /// Charge is integrated at least up to this time.
    pub end_s: f64,
    pub trace: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            ptx_nodes: 1,
            packets_per_node: 10,
            payload_bytes: 1,
            interval_s: 0.05,
            stagger_s: 0.005,
            start_s: 0.01,
            no_ack: false,
            ranges_m: vec![1.0],
            end_s: 0.0,
            trace: true,
        }
    }
}

impl NetworkSection {
    pub fn range_for(&self, ptx_index: usize) -> f64 {
        if self.ranges_m.len() == 1 {
            self.ranges_m[0]
        } else {
            self.ranges_m[ptx_index]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Required: runs never draw seeds from entropy.
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub packet: PacketConfig,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub ber_model: BerModel,
    #[serde(default)]
    pub retransmit: RetransmitPolicy,
    #[serde(default)]
    pub radio: RadioSection,
    #[serde(default)]
    pub per: PerSection,
    #[serde(default)]
    pub fsl: FslSection,
    #[serde(default)]
    pub curve: CurveSection,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub network: NetworkSection,
}

impl ExperimentConfig {
    /// Built-in defaults for `kind` with an explicit seed.
    pub fn new(experiment: ExperimentKind, seed: u64) -> Self {
        ExperimentConfig {
            experiment,
            seed,
            output: None,
            packet: PacketConfig::default(),
            channel: ChannelParams::default(),
            ber_model: BerModel::default(),
            retransmit: RetransmitPolicy::default(),
            radio: RadioSection::default(),
            per: PerSection::default(),
            fsl: FslSection::default(),
            curve: CurveSection::default(),
            energy: EnergySection::default(),
            network: NetworkSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every section the selected experiment reads.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.ber_model.validate()?;
        self.retransmit.validate()?;
        self.radio.currents.validate()?;
        self.radio.timing.validate()?;
        if !(self.channel.frequency_hz > 0.0) {
            return bad("channel.frequency_hz must be positive".into());
        }

        match self.experiment {
            ExperimentKind::PerSweep => {
                let p = &self.per;
                if p.packet_counts.is_empty() || p.ranges_m.is_empty() {
                    return bad("per.packet_counts and per.ranges_m must be non-empty".into());
                }
                if !p.allow_any_count {
                    if let Some(n) = p.packet_counts.iter().find(|n| !(100..=5000).contains(*n)) {
                        return bad(format!(
                            "per.packet_counts entry {n} outside 100..=5000 (set allow_any_count to override)"
                        ));
                    }
                }
                if p.packet_counts.contains(&0) {
                    return bad("per.packet_counts entries must be positive".into());
                }
                check_ranges("per.ranges_m", &p.ranges_m)?;
                check_payload("per.payload_bytes", p.payload_bytes)?;
                if !(p.interval_s > 0.0) {
                    return bad("per.interval_s must be positive".into());
                }
            }
            ExperimentKind::FslTable => {
                if self.fsl.ranges_m.is_empty() {
                    return bad("fsl.ranges_m must be non-empty".into());
                }
                check_ranges("fsl.ranges_m", &self.fsl.ranges_m)?;
            }
            ExperimentKind::BerPerCurve => {
                let c = &self.curve;
                if c.payload_bytes.is_empty() {
                    return bad("curve.payload_bytes must be non-empty".into());
                }
                for &b in &c.payload_bytes {
                    if b > MAX_PAYLOAD {
                        return bad(format!("curve.payload_bytes entry {b} exceeds 32"));
                    }
                }
                if !(c.ber_min > 0.0 && c.ber_min < c.ber_max && c.ber_max <= 1.0) {
                    return bad("curve needs 0 < ber_min < ber_max <= 1".into());
                }
                if c.points < 2 {
                    return bad("curve.points must be at least 2".into());
                }
            }
            ExperimentKind::LifetimeReport => {
                self.energy.duty_cycle.validate()?;
                self.energy.battery.validate()?;
            }
            ExperimentKind::Network => {
                let n = &self.network;
                if n.ptx_nodes == 0 || n.ptx_nodes > PIPE_COUNT {
                    return bad(format!(
                        "network.ptx_nodes must be 1-6, got {}",
                        n.ptx_nodes
                    ));
                }
                if n.ranges_m.len() != 1 && n.ranges_m.len() != n.ptx_nodes {
                    return bad("network.ranges_m needs one entry or one per PTX node".into());
                }
                check_ranges("network.ranges_m", &n.ranges_m)?;
                check_payload("network.payload_bytes", n.payload_bytes)?;
                if !(n.interval_s > 0.0) || n.stagger_s < 0.0 || n.start_s < 0.0 || n.end_s < 0.0 {
                    return bad("network timings must be non-negative, interval positive".into());
                }
            }
        }
        Ok(())
    }
}

fn check_ranges(name: &str, ranges: &[f64]) -> Result<()> {
    match ranges.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        Some(r) => Err(Error::Config(format!(
            "{name} entries must be positive, got {r}"
        ))),
        None => Ok(()),
    }
}

fn check_payload(name: &str, bytes: usize) -> Result<()> {
    if (1..=MAX_PAYLOAD).contains(&bytes) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be 1-32, got {bytes}")))
    }
}
