//! Python bindings: frames, link-budget math, the battery model, the radio
//! mode machine and the experiment runner.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use wsnsim::channel::{self, ChannelParams};
use wsnsim::energy::{self, Battery, DutyCycleProfile};
use wsnsim::packet::{self, Bitstring, DataRate};
use wsnsim::radio::{self, Command, RadioMode, TimingProfile};
use wsnsim::sim::{self, ExperimentConfig, ExperimentKind};

create_exception!(wsnsim_py, WsnsimError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    WsnsimError::new_err(e.to_string())
}

#[pyclass(module = "wsnsim_py", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PacketConfig {
    inner: packet::PacketConfig,
}

#[pymethods]
impl PacketConfig {
    #[new]
    #[pyo3(signature = (address_width = 5, crc_width = 1, datarate_bps = 2_000_000))]
    fn new(address_width: u8, crc_width: u8, datarate_bps: u32) -> PyResult<Self> {
        let rate = DataRate::from_bps(datarate_bps).ok_or_else(|| {
            err(format!(
                "datarate must be 1000000 or 2000000, got {datarate_bps}"
            ))
        })?;
        Ok(PacketConfig {
            inner: packet::PacketConfig::new(address_width, crc_width, rate).map_err(err)?,
        })
    }

    #[getter]
    fn address_width(&self) -> usize {
        self.inner.address_width()
    }

    #[getter]
    fn crc_width(&self) -> usize {
        self.inner.crc_width()
    }

    #[getter]
    fn datarate_bps(&self) -> f64 {
        self.inner.datarate().bits_per_second()
    }

    fn overhead_bits(&self) -> usize {
        self.inner.overhead_bits()
    }

    fn frame_bits(&self, payload_len: usize) -> usize {
        self.inner.frame_bits(payload_len)
    }

    fn air_time(&self, frame_bits: usize) -> f64 {
        packet::air_time(frame_bits, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "PacketConfig(address_width={}, crc_width={}, datarate_bps={})",
            self.address_width(),
            self.crc_width(),
            self.datarate_bps()
        )
    }
}

fn config_or_default(config: Option<PacketConfig>) -> packet::PacketConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

fn parse_bits(bits: &str) -> PyResult<Bitstring> {
    bits.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(err(format!(
                "bit string may only hold 0 and 1, got {other:?}"
            ))),
        })
        .collect::<PyResult<Vec<bool>>>()
        .map(Bitstring::from_bits)
}

/// Serialized frame as a string of '0'/'1', MSB first.
#[pyfunction]
#[pyo3(signature = (address, payload, pid = 0, no_ack = false, config = None))]
fn serialize(
    address: Vec<u8>,
    payload: Vec<u8>,
    pid: u8,
    no_ack: bool,
    config: Option<PacketConfig>,
) -> PyResult<String> {
    let p = packet::Packet::new(address, payload, pid, no_ack).map_err(err)?;
    Ok(packet::serialize(&p, &config_or_default(config))
        .map_err(err)?
        .to_string())
}

/// Decoded frame as `(address, payload, pid, no_ack)`.
#[pyfunction]
#[pyo3(signature = (bits, config = None))]
fn deserialize(bits: &str, config: Option<PacketConfig>) -> PyResult<(Vec<u8>, Vec<u8>, u8, bool)> {
    let p = packet::deserialize(&parse_bits(bits)?, &config_or_default(config)).map_err(err)?;
    Ok((
        p.address().to_vec(),
        p.payload().to_vec(),
        p.pid(),
        p.no_ack(),
    ))
}

#[pyfunction]
fn compute_crc(bits: &str, crc_width: u8) -> PyResult<u16> {
    let crc = match crc_width {
        1 => packet::Crc::Crc8,
        2 => packet::Crc::Crc16,
        w => return Err(err(format!("crc_width must be 1 or 2, got {w}"))),
    };
    Ok(packet::compute_crc(parse_bits(bits)?.bits(), crc))
}

#[pyfunction]
#[pyo3(signature = (range_m, frequency_hz = 2.4e9))]
fn free_space_loss_db(range_m: f64, frequency_hz: f64) -> PyResult<f64> {
    channel::free_space_loss_db(range_m, frequency_hz).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (range_m, tx_power_dbm = 0.0, tx_antenna_gain_db = -5.0, rx_antenna_gain_db = 0.0, rx_sensitivity_dbm = -75.0))]
fn link_margin_db(
    range_m: f64,
    tx_power_dbm: f64,
    tx_antenna_gain_db: f64,
    rx_antenna_gain_db: f64,
    rx_sensitivity_dbm: f64,
) -> PyResult<f64> {
    let p = ChannelParams {
        range_m,
        tx_power_dbm,
        tx_antenna_gain_db,
        rx_antenna_gain_db,
        rx_sensitivity_dbm,
        ..ChannelParams::default()
    };
    channel::link_margin_db(&p).map_err(err)
}

#[pyfunction]
fn per_from_ber(ber: f64, length_bits: usize) -> PyResult<f64> {
    channel::per_from_ber(ber, length_bits).map_err(err)
}

#[pyfunction]
fn ber_from_per(per: f64, length_bits: usize) -> PyResult<f64> {
    channel::ber_from_per(per, length_bits).map_err(err)
}

/// Average current in mA and lifetime `(hours, days, years)` for the default
/// duty cycle with the given fields overridden.
#[pyfunction]
#[pyo3(signature = (capacity_mah = 2450.0, **overrides))]
fn battery_lifetime(
    capacity_mah: f64,
    overrides: Option<BTreeMap<String, f64>>,
) -> PyResult<(f64, (f64, f64, f64))> {
    let mut p = DutyCycleProfile::default();
    for (k, v) in overrides.unwrap_or_default() {
        let slot = match k.as_str() {
            "time_on_air_s" => &mut p.time_on_air_s,
            "time_in_rx_s" => &mut p.time_in_rx_s,
            "pll_lock_s" => &mut p.pll_lock_s,
            "power_up_s" => &mut p.power_up_s,
            "period_s" => &mut p.period_s,
            "mcu_tx_ma" => &mut p.mcu_tx_ma,
            "mcu_rx_ma" => &mut p.mcu_rx_ma,
            "pll_tx_ma" => &mut p.pll_tx_ma,
            "pll_rx_ma" => &mut p.pll_rx_ma,
            "power_down_ma" => &mut p.power_down_ma,
            "power_up_ma" => &mut p.power_up_ma,
            "bitrate_bps" => &mut p.bitrate_bps,
            other => return Err(err(format!("unknown duty-cycle field {other:?}"))),
        };
        *slot = v;
    }
    let i = energy::average_current(&p).map_err(err)?;
    let l = energy::lifetime(&Battery { capacity_mah }, i).map_err(err)?;
    Ok((i, (l.hours, l.days, l.years)))
}

fn mode_from_str(s: &str) -> PyResult<RadioMode> {
    RadioMode::ALL
        .into_iter()
        .find(|m| format!("{m:?}").eq_ignore_ascii_case(s))
        .ok_or_else(|| err(format!("unknown radio mode {s:?}")))
}

fn command_from_str(s: &str) -> PyResult<Command> {
    Command::ALL
        .into_iter()
        .find(|c| format!("{c:?}").eq_ignore_ascii_case(s))
        .ok_or_else(|| err(format!("unknown command {s:?}")))
}

/// `(next_mode, duration_s)` for one command. Names follow the enum
/// variants, case-insensitive: `apply_command("PowerDown", "SetPwrUp")`.
#[pyfunction]
fn apply_command(mode: &str, command: &str) -> PyResult<(String, f64)> {
    let t = radio::apply_command(
        mode_from_str(mode)?,
        command_from_str(command)?,
        &TimingProfile::default(),
    )
    .map_err(err)?;
    Ok((format!("{:?}", t.to), t.duration_s))
}

/// Runs a TOML experiment config. Returns `(tables, summary)` with every
/// table rendered as CSV text.
#[pyfunction]
fn run_experiment(config_toml: &str) -> PyResult<(BTreeMap<String, String>, String)> {
    let cfg = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    let report = sim::run_experiment(&cfg).map_err(err)?;
    let tables = report
        .tables
        .iter()
        .map(|(n, t)| (n.clone(), t.to_csv()))
        .collect();
    Ok((tables, report.summary))
}

/// Lossless-or-lossy star network run: per-PTX `(acked, retransmissions,
/// charge_mas)` plus the number of payloads the receiver delivered.
type NodeSummary = (u64, u64, f64);

#[pyfunction]
#[pyo3(signature = (ptx_nodes, packets_per_node, ber, seed))]
fn simulate_star(
    ptx_nodes: usize,
    packets_per_node: usize,
    ber: f64,
    seed: u64,
) -> PyResult<(u64, Vec<NodeSummary>)> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Network, seed);
    cfg.network.ptx_nodes = ptx_nodes;
    cfg.network.packets_per_node = packets_per_node;
    cfg.network.trace = false;
    cfg.ber_model = channel::BerModel::Fixed { ber };
    cfg.validate().map_err(err)?;
    let out = sim::run_simulation(&sim::NetworkSpec::from_config(&cfg)).map_err(err)?;
    let nodes = out.nodes[1..]
        .iter()
        .map(|n| (n.stats.acked, n.stats.retransmissions, n.charge_mas))
        .collect();
    Ok((out.nodes[sim::engine::PRX].app_received, nodes))
}

#[pymodule]
fn wsnsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WsnsimError", m.py().get_type::<WsnsimError>())?;
    m.add_class::<PacketConfig>()?;
    m.add_function(wrap_pyfunction!(serialize, m)?)?;
    m.add_function(wrap_pyfunction!(deserialize, m)?)?;
    m.add_function(wrap_pyfunction!(compute_crc, m)?)?;
    m.add_function(wrap_pyfunction!(free_space_loss_db, m)?)?;
    m.add_function(wrap_pyfunction!(link_margin_db, m)?)?;
    m.add_function(wrap_pyfunction!(per_from_ber, m)?)?;
    m.add_function(wrap_pyfunction!(ber_from_per, m)?)?;
    m.add_function(wrap_pyfunction!(battery_lifetime, m)?)?;
    m.add_function(wrap_pyfunction!(apply_command, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_star, m)?)?;
    Ok(())
}
