//! The experiment drivers behind the CLI subcommands. Each returns one or more
//! CSV tables plus a text summary; none of them touch the filesystem.

use std::fmt::Write as _;

use crate::channel::{free_space_loss_db, per_from_ber};
use crate::energy::{
    energy_report, lifetime_vs_power, profiles_for_levels, PUBLISHED_DAYS_PER_YEAR,
};
use crate::error::Result;
use crate::radio::RadioMode;

use super::config::{ExperimentConfig, ExperimentKind, NetworkSection};
use super::engine::{run_simulation, NetworkSpec, SimOutput, PRX};
use super::output::{fixed, num, Table};
use super::scheduler::ns_to_seconds;

/// FSL column of the published range table, ranges 1 m to 10 m.
pub const PUBLISHED_FSL_DB: [f64; 10] = [
    10.0, 16.0, 19.8, 22.00, 23.02, 23.61, 23.93, 24.1, 24.13, 24.04,
];

/// Published battery-budget results.
pub const PUBLISHED_I_AVG_MA: f64 = 0.06342619;
pub const PUBLISHED_LIFETIME_H: f64 = 38627.5768;
pub const PUBLISHED_LIFETIME_DAYS: f64 = 1609.48237;
pub const PUBLISHED_LIFETIME_YEARS: f64 = 4.42165486;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Named tables; the first is the primary output.
    pub tables: Vec<(String, Table)>,
    pub summary: String,
}

impl Report {
    pub fn main(&self) -> &Table {
        &self.tables[0].1
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::PerSweep => per_experiment(cfg),
        ExperimentKind::FslTable => fsl_table(&cfg.fsl.ranges_m, cfg.channel.frequency_hz),
        ExperimentKind::BerPerCurve => ber_per_curve(cfg),
        ExperimentKind::LifetimeReport => lifetime_report(cfg),
        ExperimentKind::Network => network(cfg),
    }
}

/// Packet-count by range sweep: one single-link simulation per row.
pub fn per_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let p = &cfg.per;
    let frame_bits = cfg.packet.frame_bits(p.payload_bytes);
    let mut table = Table::new([
        "n_packets",
        "range_m",
        "ber",
        "frame_bits",
        "sent",
        "received",
        "lost",
        "per",
        "expected_per",
        "sigma",
        "within_3sigma",
    ]);
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "PER sweep: {} rows, {frame_bits}-bit frames, {}",
        p.ranges_m.len() * p.packet_counts.len(),
        if p.no_ack {
            "no ACK"
        } else {
            "with ACK/retransmit"
        }
    );
    let mut row = 0u64;
    for &range in &p.ranges_m {
        for &n in &p.packet_counts {
            let mut spec = NetworkSpec::from_config(cfg);
            spec.stream = row;
            spec.network = NetworkSection {
                ptx_nodes: 1,
                packets_per_node: n,
                payload_bytes: p.payload_bytes,
                interval_s: p.interval_s,
                stagger_s: 0.0,
                start_s: p.interval_s,
                no_ack: p.no_ack,
                ranges_m: vec![range],
                end_s: 0.0,
                trace: false,
            };
            let out = run_simulation(&spec)?;
            let ptx = &out.nodes[1];
            let sent = ptx.stats.sent;
            let received = out.nodes[PRX].app_received;
            let per = 1.0 - received as f64 / sent as f64;
            let expected = per_from_ber(ptx.ber, frame_bits)?;
            let sigma = (expected * (1.0 - expected) / sent as f64).sqrt();
            // with retransmissions the single-frame law no longer applies
            let within = if p.no_ack {
                ((per - expected).abs() <= 3.0 * sigma).to_string()
            } else {
                "n/a".to_string()
            };
            let _ = writeln!(
                summary,
                "  n={n:<5} range={range} m  ber={}  received {received}/{sent}  PER={} (expected {})",
                num(ptx.ber),
                fixed(per, 6),
                fixed(expected, 6)
            );
            table.push(vec![
                n.to_string(),
                num(range),
                num(ptx.ber),
                frame_bits.to_string(),
                sent.to_string(),
                received.to_string(),
                (sent - received).to_string(),
                num(per),
                num(expected),
                num(sigma),
                within,
            ]);
            row += 1;
        }
    }
    Ok(Report {
        tables: vec![("per".into(), table)],
        summary,
    })
}

/// Formula FSL next to the published table, with the difference.
pub fn fsl_table(ranges_m: &[f64], frequency_hz: f64) -> Result<Report> {
    let mut table = Table::new(["range_m", "fsl_formula_db", "fsl_published_db", "delta_db"]);
    let mut summary = format!(
        "Free-space loss at {} GHz: formula -20*log10(lambda/(4*pi*R)) against the published table\n",
        frequency_hz / 1e9
    );
    for &r in ranges_m {
        let fsl = free_space_loss_db(r, frequency_hz)?;
        let published = (r.fract() == 0.0 && (1.0..=10.0).contains(&r))
            .then(|| PUBLISHED_FSL_DB[r as usize - 1]);
        let (published_cell, delta_cell) = match published {
            Some(p) => (num(p), num(p - fsl)),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            summary,
            "  {r:>5} m  formula {} dB  published {}",
            fixed(fsl, 2),
            published.map_or("-".to_string(), |p| format!(
                "{} dB (delta {})",
                p,
                fixed(p - fsl, 2)
            ))
        );
        table.push(vec![num(r), num(fsl), published_cell, delta_cell]);
    }
    summary.push_str("  The published column does not follow the formula it is stated with.\n");
    Ok(Report {
        tables: vec![("fsl".into(), table)],
        summary,
    })
}

/// Analytic PER against BER for each configured payload size.
pub fn ber_per_curve(cfg: &ExperimentConfig) -> Result<Report> {
    let c = &cfg.curve;
    let mut grid = Vec::with_capacity(c.points + 1);
    if c.include_zero {
        grid.push(0.0);
    }
    let (lo, hi) = (c.ber_min.log10(), c.ber_max.log10());
    for i in 0..c.points {
        let x = lo + (hi - lo) * i as f64 / (c.points - 1) as f64;
        grid.push(10f64.powf(x));
    }
    let mut table = Table::new(["ber", "size_bits", "per"]);
    let mut summary = String::from("BER/PER curves, PER = 1 - (1 - BER)^L\n");
    for &bytes in &c.payload_bytes {
        let bits = cfg.packet.frame_bits(bytes);
        for &ber in &grid {
            table.push(vec![
                num(ber),
                bits.to_string(),
                num(per_from_ber(ber, bits)?),
            ]);
        }
        let _ = writeln!(
            summary,
            "  L={bits:>3} bits ({bytes} byte payload): PER at BER 1e-4 = {}",
            fixed(per_from_ber(1e-4, bits)?, 6)
        );
    }
    Ok(Report {
        tables: vec![("curve".into(), table)],
        summary,
    })
}

/// Battery-budget table reproduction plus lifetime per TX power level.
pub fn lifetime_report(cfg: &ExperimentConfig) -> Result<Report> {
    let profile = &cfg.energy.duty_cycle;
    let battery = &cfg.energy.battery;
    let report = energy_report(profile, battery)?;
    let life = report.lifetime;
    let years_364 = life.days / PUBLISHED_DAYS_PER_YEAR;

    let mut t = Table::new(["quantity", "computed", "published", "delta", "unit", "note"]);
    let mut row = |q: &str, computed: f64, published: Option<f64>, unit: &str, note: &str| {
        t.push(vec![
            q.into(),
            num(computed),
            published.map(num).unwrap_or_default(),
            published.map(|p| num(computed - p)).unwrap_or_default(),
            unit.into(),
            note.into(),
        ]);
    };
    let frame_bits = (profile.overhead_bits + profile.payload_bits) as f64;
    row("packet_length", frame_bits, Some(73.0), "bits", "");
    row(
        "frame_air_time",
        profile.frame_air_time_s(),
        None,
        "s",
        "one frame at the configured bit rate",
    );
    row(
        "frames_per_wakeup",
        profile.implied_frames_per_wakeup(),
        None,
        "",
        "time on air read as back-to-back frames",
    );
    row(
        "ack_air_time",
        profile.overhead_bits as f64 / profile.bitrate_bps,
        Some(profile.time_in_rx_s),
        "s",
        "payload-free ACK frame; published RX time is rounded up",
    );
    row(
        "sleep_time",
        profile.sleep_s(),
        None,
        "s",
        "period minus TX, RX and both PLL locks",
    );
    row(
        "i_avg",
        report.average_current_ma,
        Some(PUBLISHED_I_AVG_MA),
        "mA",
        "",
    );
    row(
        "lifetime_hours",
        life.hours,
        Some(PUBLISHED_LIFETIME_H),
        "h",
        "",
    );
    row(
        "lifetime_days",
        life.days,
        Some(PUBLISHED_LIFETIME_DAYS),
        "days",
        "",
    );
    row(
        "lifetime_years",
        life.years,
        Some(PUBLISHED_LIFETIME_YEARS),
        "years",
        "discrepancy: computed with 365.25-day years; published value equals days/364",
    );
    row(
        "lifetime_years_364",
        years_364,
        Some(PUBLISHED_LIFETIME_YEARS),
        "years",
        "days/364",
    );

    let mut phases = Table::new(["phase", "current_ma", "duration_s", "charge_mas"]);
    for p in &report.phases {
        phases.push(vec![
            p.name.into(),
            num(p.current_ma),
            num(p.duration_s),
            num(p.charge_mas),
        ]);
    }

    let levels = lifetime_vs_power(&profiles_for_levels(profile, &cfg.radio.currents), battery)?;
    let mut lv = Table::new([
        "level",
        "dbm",
        "mcu_tx_ma",
        "average_current_ma",
        "lifetime_hours",
        "lifetime_days",
    ]);
    for r in &levels {
        lv.push(vec![
            r.level.label().into(),
            num(r.level.dbm()),
            num(r.mcu_tx_ma),
            num(r.average_current_ma),
            num(r.lifetime_hours),
            num(r.lifetime_hours / 24.0),
        ]);
    }

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "Battery lifetime for a {} s duty cycle",
        profile.period_s
    );
    let _ = writeln!(
        summary,
        "  I(avg)   {} mA   (published {PUBLISHED_I_AVG_MA})",
        fixed(report.average_current_ma, 8)
    );
    let _ = writeln!(
        summary,
        "  lifetime {} h = {} days   (published {PUBLISHED_LIFETIME_H} h, {PUBLISHED_LIFETIME_DAYS} days)",
        fixed(life.hours, 4),
        fixed(life.days, 5)
    );
    let _ = writeln!(
        summary,
        "  years    {} (365.25-day years) vs published {PUBLISHED_LIFETIME_YEARS}, which is days/364 = {}",
        fixed(life.years, 5),
        fixed(years_364, 8)
    );
    let _ = writeln!(summary, "Lifetime by TX power level:");
    for r in &levels {
        let _ = writeln!(
            summary,
            "  {:>7}  TX {} mA  I(avg) {} mA  {} h",
            r.level.label(),
            r.mcu_tx_ma,
            fixed(r.average_current_ma, 7),
            fixed(r.lifetime_hours, 1)
        );
    }
    Ok(Report {
        tables: vec![
            ("lifetime".into(), t),
            ("phases".into(), phases),
            ("levels".into(), lv),
        ],
        summary,
    })
}

/// Star-network run: per-node statistics and the event trace.
pub fn network(cfg: &ExperimentConfig) -> Result<Report> {
    let out = run_simulation(&NetworkSpec::from_config(cfg))?;
    Ok(network_report(&out))
}

pub fn network_report(out: &SimOutput) -> Report {
    let mut nodes = Table::new([
        "node",
        "role",
        "pipe",
        "range_m",
        "ber",
        "app_submitted",
        "sent",
        "transmissions",
        "acked",
        "retransmissions",
        "max_rt_failures",
        "delivered",
        "duplicates_suppressed",
        "crc_drops",
        "missed_frames",
        "acks_sent",
        "charge_mas",
        "average_current_ma",
        "final_mode",
    ]);
    let secs = ns_to_seconds(out.end_ns);
    for n in &out.nodes {
        let s = &n.stats;
        let avg = if secs > 0.0 { n.charge_mas / secs } else { 0.0 };
        nodes.push(vec![
            n.id.to_string(),
            n.role.into(),
            n.pipe.map(|p| p.to_string()).unwrap_or_default(),
            num(n.range_m),
            num(n.ber),
            n.app_submitted.to_string(),
            s.sent.to_string(),
            s.transmissions.to_string(),
            s.acked.to_string(),
            s.retransmissions.to_string(),
            s.max_rt_failures.to_string(),
            s.delivered.to_string(),
            s.duplicates_suppressed.to_string(),
            s.crc_drops.to_string(),
            n.missed_frames.to_string(),
            s.acks_sent.to_string(),
            num(n.charge_mas),
            num(avg),
            mode_name(n.final_mode).into(),
        ]);
    }
    let mut trace = Table::new(["time_ns", "seq", "node", "event", "detail"]);
    for e in &out.trace {
        trace.push(vec![
            e.time_ns.to_string(),
            e.seq.to_string(),
            e.node.to_string(),
            e.event.into(),
            e.detail.clone(),
        ]);
    }
    let prx = &out.nodes[PRX];
    let submitted: u64 = out.nodes.iter().map(|n| n.app_submitted).sum();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "Star network: {} PTX nodes, {} events, {} s virtual time",
        out.nodes.len() - 1,
        out.events_dispatched,
        fixed(secs, 6)
    );
    let _ = writeln!(
        summary,
        "  delivered {}/{submitted} payloads, {} duplicates suppressed, {} CRC drops",
        prx.app_received, prx.stats.duplicates_suppressed, prx.stats.crc_drops
    );
    for n in &out.nodes[1..] {
        let _ = writeln!(
            summary,
            "  node {} pipe {}: acked {}, retransmissions {}, max-rt failures {}, charge {} mA*s",
            n.id,
            n.pipe.unwrap_or_default(),
            n.stats.acked,
            n.stats.retransmissions,
            n.stats.max_rt_failures,
            fixed(n.charge_mas, 6)
        );
    }
    let mut tables = vec![("nodes".to_string(), nodes)];
    if !out.trace.is_empty() {
        tables.push(("trace".to_string(), trace));
    }
    Report { tables, summary }
}

fn mode_name(m: RadioMode) -> &'static str {
    match m {
        RadioMode::PowerDown => "power_down",
        RadioMode::StandbyI => "standby_i",
        RadioMode::PllLockTx => "pll_lock_tx",
        RadioMode::PllLockRx => "pll_lock_rx",
        RadioMode::TxActive => "tx_active",
        RadioMode::RxActive => "rx_active",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::BerModel;

    #[test]
    fn fsl_rows() {
        let r = fsl_table(&[1.0, 2.0, 10.0, 12.5], 2.4e9).unwrap();
        let t = r.main();
        assert!((t.value(0, "fsl_formula_db").unwrap() - 40.05).abs() < 0.01);
        assert!((t.value(0, "delta_db").unwrap() + 30.05).abs() < 0.01);
        assert!(
            (t.value(1, "fsl_formula_db").unwrap()
                - t.value(0, "fsl_formula_db").unwrap()
                - 6.0206)
                .abs()
                < 1e-4
        );
        assert!((t.value(2, "fsl_formula_db").unwrap() - 60.05).abs() < 0.01);
        assert_eq!(t.value(2, "fsl_published_db"), Some(24.04));
        assert_eq!(t.value(3, "fsl_published_db"), None);
    }

    #[test]
    fn curve_examples() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::BerPerCurve, 1);
        cfg.curve.payload_bytes = vec![1, 32];
        let r = ber_per_curve(&cfg).unwrap();
        let t = r.main();
        let pts = cfg.curve.points + 1;
        assert_eq!(t.rows.len(), 2 * pts);
        assert_eq!(t.value(0, "per"), Some(0.0));
        assert_eq!(t.value(pts, "per"), Some(0.0));
        for i in 1..pts {
            assert!(t.value(pts + i, "per").unwrap() >= t.value(i, "per").unwrap());
        }
    }

    #[test]
    fn per_zero_ber() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::PerSweep, 5);
        cfg.ber_model = BerModel::Fixed { ber: 0.0 };
        cfg.per.packet_counts = vec![100];
        let t = per_experiment(&cfg).unwrap();
        assert_eq!(t.main().value(0, "per"), Some(0.0));
        assert_eq!(t.main().value(0, "received"), Some(100.0));
    }

    #[test]
    fn per_near_expected_received() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::PerSweep, 9);
        cfg.ber_model = BerModel::Fixed { ber: 1e-3 };
        cfg.per.packet_counts = vec![1000];
        let t = per_experiment(&cfg).unwrap();
        let received = t.main().value(0, "received").unwrap();
        // 1000 * (1 - 0.07043), sigma about 8.1
        assert!((received - 929.57).abs() < 3.0 * 8.1, "{received}");
        assert_eq!(t.main().rows[0][10], "true");
    }

    #[test]
    fn lifetime_rows() {
        let cfg = ExperimentConfig::new(ExperimentKind::LifetimeReport, 1);
        let r = lifetime_report(&cfg).unwrap();
        let t = r.main();
        let row = |q: &str| t.rows.iter().position(|r| r[0] == q).unwrap();
        assert!(t.value(row("i_avg"), "delta").unwrap().abs() < 1e-8);
        assert!(t.value(row("lifetime_hours"), "delta").unwrap().abs() < 1e-3);
        assert!((t.value(row("lifetime_years"), "computed").unwrap() - 4.4065).abs() < 1e-4);
        assert!(t.value(row("lifetime_years_364"), "delta").unwrap().abs() < 1e-7);
        assert_eq!(r.table("levels").unwrap().rows.len(), 4);
    }
}
