use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wsnsim::packet::{serialize, Packet, PacketConfig};
use wsnsim::sim::{run_experiment, ExperimentConfig, ExperimentKind, Report};
use wsnsim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "wsnsim",
    version,
    about = "Enhanced ShockBurst sensor-node simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run whatever experiment a config file describes
    Simulate(Common),
    /// Packet error rate sweep over packet counts and ranges
    Per(Common),
    /// Free-space loss table against the published values
    Fsl(Common),
    /// Analytic BER/PER curves
    Curve(Common),
    /// Battery lifetime report and lifetime per TX power level
    Lifetime(Common),
    /// Serialize one packet and hex-dump the frame
    Frame(FrameArgs),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(short, long)]
    seed: Option<u64>,
    /// CSV output path; extra tables go next to it as <stem>.<table>.csv
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Print only the text summary, no CSV on stdout
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct FrameArgs {
    /// Address bytes as hex, address_width long
    #[arg(long, default_value = "E7E7E7E7E7")]
    address: String,
    /// Payload bytes as hex (0-32 bytes)
    #[arg(long, default_value = "")]
    payload: String,
    #[arg(long, default_value_t = 0)]
    pid: u8,
    #[arg(long)]
    no_ack: bool,
    #[arg(long, default_value_t = 1)]
    crc_width: u8,
    #[arg(long, default_value_t = 2_000_000)]
    datarate_bps: u32,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wsnsim: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (kind, common) = match cli.command {
        Cmd::Frame(f) => return frame(&f),
        Cmd::Simulate(c) => (None, c),
        Cmd::Per(c) => (Some(ExperimentKind::PerSweep), c),
        Cmd::Fsl(c) => (Some(ExperimentKind::FslTable), c),
        Cmd::Curve(c) => (Some(ExperimentKind::BerPerCurve), c),
        Cmd::Lifetime(c) => (Some(ExperimentKind::LifetimeReport), c),
    };
    let cfg = build_config(kind, &common)?;
    let report = run_experiment(&cfg)?;
    emit(
        &report,
        common.output.as_deref().or(cfg.output.as_deref()),
        common.summary,
    )
}

fn build_config(kind: Option<ExperimentKind>, c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, kind) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, None) => return Err(Error::Config("simulate needs --config".into())),
        (None, Some(k)) => {
            let stochastic = k == ExperimentKind::PerSweep;
            let seed = match c.seed {
                Some(s) => s,
                None if stochastic => {
                    return Err(Error::Config(format!(
                        "{} needs --seed or a config with a seed",
                        k.name()
                    )))
                }
                None => 0,
            };
            ExperimentConfig::new(k, seed)
        }
    };
    if let Some(k) = kind {
        cfg.experiment = k;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(report: &Report, output: Option<&Path>, summary_only: bool) -> Result<()> {
    match output {
        Some(path) => {
            for (i, (name, table)) in report.tables.iter().enumerate() {
                let target = if i == 0 {
                    path.to_path_buf()
                } else {
                    sibling(path, name)
                };
                table.write_csv(&target)?;
            }
            print!("{}", report.summary);
        }
        None if summary_only => print!("{}", report.summary),
        None => {
            print!("{}", report.main().to_csv());
            eprint!("{}", report.summary);
        }
    }
    Ok(())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{name}.csv"))
}

fn parse_hex(s: &str) -> Result<Vec<u8>> {
    let s: String = s
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ':')
        .collect();
    if !s.len().is_multiple_of(2) {
        return Err(Error::Config(format!("odd-length hex string {s:?}")));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16)
                .map_err(|_| Error::Config(format!("bad hex {s:?}")))
        })
        .collect()
}

fn frame(f: &FrameArgs) -> Result<()> {
    let address = parse_hex(&f.address)?;
    let payload = parse_hex(&f.payload)?;
    let datarate = wsnsim::packet::DataRate::from_bps(f.datarate_bps).ok_or_else(|| {
        Error::Config(format!(
            "datarate must be 1000000 or 2000000, got {}",
            f.datarate_bps
        ))
    })?;
    let aw = u8::try_from(address.len()).unwrap_or(u8::MAX);
    let cfg = PacketConfig::new(aw, f.crc_width, datarate)?;
    let packet = Packet::new(address, payload, f.pid, f.no_ack)?;
    let bits = serialize(&packet, &cfg)?;
    println!("bits      {}", bits.len());
    println!("air_time  {} s", wsnsim::packet::air_time(bits.len(), &cfg));
    println!("hex       {}", bits.to_hex());
    println!("binary    {bits}");
    Ok(())
}
