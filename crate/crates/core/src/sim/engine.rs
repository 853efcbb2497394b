//! Event-driven star network: PTX nodes `1..=n` talk to the PRX node `0`,
//! PTX node `i` on pipe `i - 1`.
//!
//! PTX nodes sleep in power-down, wake when the application hands them a
//! payload, run the ShockBurst exchange with real mode timings, and go back
//! to power-down once their TX FIFO drains. The PRX listens continuously and
//! turns around to TX for every ACK.

use std::collections::{BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{sample_corruption, BerModel, ChannelParams};
use crate::error::Result;
use crate::packet::{air_time, Bitstring, PacketConfig};
use crate::radio::{
    mode_current, Command, CurrentProfile, Radio, RadioConfig, RadioMode, Transient, TxPowerLevel,
};
use crate::shockburst::{
    LinkEndpoint, LinkStats, PipeId, RetransmitPolicy, Role, TimeoutAction, FIFO_DEPTH, PIPE_COUNT,
};

use super::config::{ExperimentConfig, NetworkSection, RadioSection};
use super::scheduler::{ns_to_seconds, seconds_to_ns, Scheduler, SimTime};

pub const PRX: usize = 0;

/// Everything one simulation run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub packet: PacketConfig,
    pub channel: ChannelParams,
    pub ber_model: BerModel,
    pub retransmit: RetransmitPolicy,
    pub radio: RadioSection,
    pub network: NetworkSection,
    pub seed: u64,
    /// ChaCha stream, so sweep rows draw independent sequences from one seed.
    pub stream: u64,
}

impl NetworkSpec {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        NetworkSpec {
            packet: cfg.packet,
            channel: cfg.channel.clone(),
            ber_model: cfg.ber_model.clone(),
            retransmit: cfg.retransmit.clone(),
            radio: cfg.radio.clone(),
            network: cfg.network.clone(),
            seed: cfg.seed,
            stream: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Data,
    Ack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Timer {
    TxEnd,
    AckTimeout { attempt: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Action {
    ApplicationSend,
    TransitionComplete {
        token: u64,
    },
    FrameArrival {
        frame: Bitstring,
        from: usize,
        kind: FrameKind,
    },
    Timer(Timer),
}

/// What a node is billed for: a resting mode or the power-up ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PowerState {
    Mode(RadioMode),
    PowerUp,
}

impl PowerState {
    fn current_ma(self, level: TxPowerLevel, currents: &CurrentProfile) -> f64 {
        match self {
            PowerState::Mode(m) => mode_current(m, level, currents),
            PowerState::PowerUp => currents.power_up_ma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub start_ns: SimTime,
    pub end_ns: SimTime,
    pub state: PowerState,
}

impl Segment {
    pub fn duration_s(&self) -> f64 {
        ns_to_seconds(self.end_ns - self.start_ns)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Activity {
    Idle,
    WakingToSend,
    LockingTx,
    Transmitting,
    LockingRx,
    AwaitingAck,
    PrxWaking,
    PrxLockingRx,
    PrxAckLock { to: usize, ack: Bitstring },
    PrxAckTx,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub time_ns: SimTime,
    pub seq: u64,
    pub node: usize,
    pub event: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeReport {
    pub id: usize,
    pub role: &'static str,
    pub pipe: Option<u8>,
    pub range_m: f64,
    pub ber: f64,
    pub app_submitted: u64,
    /// PRX only: payloads handed to the application, per source.
    pub app_received: u64,
    pub app_duplicates: u64,
    /// PRX only: deliveries per pipe.
    pub received_by_pipe: [u64; PIPE_COUNT],
    /// PRX only: payloads whose source id disagrees with the pipe they came in on.
    pub pipe_mismatches: u64,
    pub missed_frames: u64,
    pub stats: LinkStats,
    pub charge_mas: f64,
    pub final_mode: RadioMode,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    pub end_ns: SimTime,
    pub events_dispatched: u64,
    pub nodes: Vec<NodeReport>,
    pub trace: Vec<TraceEntry>,
}

impl SimOutput {
    pub fn count_events(&self, event: &str) -> usize {
        self.trace.iter().filter(|t| t.event == event).count()
    }
}

struct Node {
    role: Role,
    radio: Radio,
    endpoint: LinkEndpoint,
    pipe: Option<PipeId>,
    range_m: f64,
    ber: f64,
    power: PowerState,
    since: SimTime,
    segments: Vec<Segment>,
    activity: Activity,
    token: u64,
    attempt: u64,
    backlog: VecDeque<Vec<u8>>,
    app_submitted: u64,
    received: BTreeSet<(usize, u64)>,
    app_received: u64,
    app_duplicates: u64,
    received_by_pipe: [u64; PIPE_COUNT],
    pipe_mismatches: u64,
    missed_frames: u64,
}

struct Sim<'a> {
    spec: &'a NetworkSpec,
    sched: Scheduler<Action>,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
    trace: Vec<TraceEntry>,
}

/// Payload `k` of PTX node `node`: node id, big-endian sequence number, filler.
pub fn app_payload(node: usize, k: u64, len: usize) -> Vec<u8> {
    let mut p = vec![node as u8];
    p.extend_from_slice(&(k as u32).to_be_bytes());
    p.resize(len.max(5), 0xA5);
    p.truncate(len);
    p
}

fn decode_payload(p: &[u8]) -> Option<(usize, u64)> {
    (p.len() >= 5).then(|| {
        (
            p[0] as usize,
            u32::from_be_bytes([p[1], p[2], p[3], p[4]]) as u64,
        )
    })
}

pub fn run_simulation(spec: &NetworkSpec) -> Result<SimOutput> {
    spec.packet_sanity()?;
    let mut sim = Sim::new(spec)?;
    sim.setup();
    while let Some(ev) = sim.sched.pop() {
        sim.dispatch(ev.node, ev.seq, ev.action)?;
    }
    Ok(sim.finish())
}

impl NetworkSpec {
    fn packet_sanity(&self) -> Result<()> {
        self.retransmit.validate()?;
        self.ber_model.validate()?;
        self.radio.currents.validate()?;
        self.radio.timing.validate()?;
        let mut cfg = ExperimentConfig::new(super::config::ExperimentKind::Network, self.seed);
        cfg.network = self.network.clone();
        cfg.validate()
    }
}

impl<'a> Sim<'a> {
    fn new(spec: &'a NetworkSpec) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(spec.stream);
        let radio_cfg = RadioConfig {
            tx_power: spec.radio.tx_power,
            ..RadioConfig::default()
        };
        let mut nodes = Vec::with_capacity(spec.network.ptx_nodes + 1);
        for id in 0..=spec.network.ptx_nodes {
            let (role, endpoint, pipe, range_m) = if id == PRX {
                (Role::Prx, LinkEndpoint::prx(spec.packet), None, 0.0)
            } else {
                (
                    Role::Ptx,
                    LinkEndpoint::ptx(spec.packet),
                    Some(PipeId::new((id - 1) as u8)?),
                    spec.network.range_for(id - 1),
                )
            };
            let ber = if id == PRX {
                0.0
            } else {
                spec.ber_model.ber_for(&spec.channel.with_range(range_m))?
            };
            nodes.push(Node {
                role,
                radio: Radio::new(radio_cfg, spec.radio.timing.clone()),
                endpoint,
                pipe,
                range_m,
                ber,
                power: PowerState::Mode(RadioMode::PowerDown),
                since: 0,
                segments: Vec::new(),
                activity: Activity::Idle,
                token: 0,
                attempt: 0,
                backlog: VecDeque::new(),
                app_submitted: 0,
                received: BTreeSet::new(),
                app_received: 0,
                app_duplicates: 0,
                received_by_pipe: [0; PIPE_COUNT],
                pipe_mismatches: 0,
                missed_frames: 0,
            });
        }
        Ok(Sim {
            spec,
            sched: Scheduler::new(),
            nodes,
            rng,
            trace: Vec::new(),
        })
    }

    fn setup(&mut self) {
        let net = &self.spec.network;
        if net.packets_per_node == 0 {
            return;
        }
        for i in 0..net.ptx_nodes {
            let first = net.start_s + i as f64 * net.stagger_s;
            for k in 0..net.packets_per_node {
                let t = seconds_to_ns(first + k as f64 * net.interval_s);
                self.sched.schedule_at(t, i + 1, Action::ApplicationSend);
            }
        }
        self.command(PRX, Command::SetPwrUp);
        self.nodes[PRX].activity = Activity::PrxWaking;
    }

    fn log(&mut self, node: usize, seq: u64, event: &'static str, detail: String) {
        if self.spec.network.trace {
            self.trace.push(TraceEntry {
                time_ns: self.sched.now(),
                seq,
                node,
                event,
                detail,
            });
        }
    }

    /// Applies a radio command at the current time, closing the running
    /// billing segment. Transients schedule their own completion.
    fn command(&mut self, id: usize, cmd: Command) {
        let now = self.sched.now();
        let node = &mut self.nodes[id];
        let t = node
            .radio
            .apply(cmd)
            .unwrap_or_else(|e| panic!("node {id} in {:?}: {e}", node.activity));
        let next = match t.transient {
            Some(Transient::PowerUp) => PowerState::PowerUp,
            Some(Transient::PllLockTx) => PowerState::Mode(RadioMode::PllLockTx),
            Some(Transient::PllLockRx) => PowerState::Mode(RadioMode::PllLockRx),
            None => PowerState::Mode(t.to),
        };
        node.close_segment(now);
        node.power = next;
        node.token += 1;
        if t.transient.is_some() {
            let token = node.token;
            self.sched.schedule_in(
                seconds_to_ns(t.duration_s),
                id,
                Action::TransitionComplete { token },
            );
        }
    }

    fn corrupt(&mut self, frame: &Bitstring, ber: f64) -> Bitstring {
        let mut out = frame.clone();
        for i in sample_corruption(&mut self.rng, frame.len(), ber) {
            out.flip(i);
        }
        out
    }

    fn dispatch(&mut self, id: usize, seq: u64, action: Action) -> Result<()> {
        match action {
            Action::ApplicationSend => {
                let node = &mut self.nodes[id];
                let k = node.app_submitted;
                node.app_submitted += 1;
                node.backlog
                    .push_back(app_payload(id, k, self.spec.network.payload_bytes));
                self.fill_fifo(id)?;
                self.log(id, seq, "app_send", format!("seq={k}"));
                if self.nodes[id].activity == Activity::Idle {
                    self.nodes[id].activity = Activity::WakingToSend;
                    self.command(id, Command::SetPwrUp);
                }
            }
            Action::TransitionComplete { token } => {
                let node = &mut self.nodes[id];
                if token != node.token {
                    self.log(id, seq, "transition_stale", String::new());
                    return Ok(());
                }
                let now = self.sched.now();
                node.close_segment(now);
                node.power = PowerState::Mode(node.radio.mode());
                let mode = node.radio.mode();
                self.log(id, seq, "transition", format!("{mode:?}"));
                self.on_transition_complete(id)?;
            }
            Action::FrameArrival { frame, from, kind } => {
                self.on_frame(id, seq, frame, from, kind)?;
            }
            Action::Timer(timer) => self.on_timer(id, seq, timer)?,
        }
        Ok(())
    }

    fn fill_fifo(&mut self, id: usize) -> Result<()> {
        let no_ack = self.spec.network.no_ack;
        let node = &mut self.nodes[id];
        let pipe = node.pipe.expect("only PTX nodes queue payloads");
        while node.endpoint.tx_pending() < FIFO_DEPTH {
            let Some(p) = node.backlog.pop_front() else {
                break;
            };
            node.endpoint.enqueue_tx(&p, pipe, no_ack)?;
        }
        Ok(())
    }

    fn on_transition_complete(&mut self, id: usize) -> Result<()> {
        let activity = std::mem::replace(&mut self.nodes[id].activity, Activity::Idle);
        match activity {
            Activity::WakingToSend => self.start_attempt(id),
            Activity::LockingTx => self.transmit(id),
            Activity::LockingRx => self.nodes[id].activity = Activity::AwaitingAck,
            Activity::PrxWaking => {
                self.nodes[id].activity = Activity::PrxLockingRx;
                self.command(id, Command::CeHighRx);
            }
            Activity::PrxLockingRx => self.nodes[id].activity = Activity::Idle,
            Activity::PrxAckLock { to, ack } => {
                let air = seconds_to_ns(air_time(ack.len(), &self.spec.packet));
                let ber = self.nodes[to].ber;
                let frame = self.corrupt(&ack, ber);
                self.sched.schedule_in(
                    air,
                    to,
                    Action::FrameArrival {
                        frame,
                        from: id,
                        kind: FrameKind::Ack,
                    },
                );
                self.sched.schedule_in(air, id, Action::Timer(Timer::TxEnd));
                self.nodes[id].activity = Activity::PrxAckTx;
            }
            other => unreachable!("transition completed while {other:?}"),
        }
        Ok(())
    }

    fn start_attempt(&mut self, id: usize) {
        self.nodes[id].activity = Activity::LockingTx;
        self.command(id, Command::CeHighTx);
    }

    fn transmit(&mut self, id: usize) {
        let bits = self.nodes[id]
            .endpoint
            .begin_attempt()
            .expect("transmit with empty fifo");
        let air = seconds_to_ns(air_time(bits.len(), &self.spec.packet));
        let ber = self.nodes[id].ber;
        let frame = self.corrupt(&bits, ber);
        self.sched.schedule_in(
            air,
            PRX,
            Action::FrameArrival {
                frame,
                from: id,
                kind: FrameKind::Data,
            },
        );
        self.sched.schedule_in(air, id, Action::Timer(Timer::TxEnd));
        self.nodes[id].activity = Activity::Transmitting;
    }

    /// Next packet if any, otherwise back to power-down.
    fn next_packet(&mut self, id: usize) -> Result<()> {
        self.fill_fifo(id)?;
        if self.nodes[id].endpoint.tx_pending() > 0 {
            self.start_attempt(id);
        } else {
            self.nodes[id].activity = Activity::Idle;
            self.command(id, Command::ClearPwrUp);
        }
        Ok(())
    }

    fn on_timer(&mut self, id: usize, seq: u64, timer: Timer) -> Result<()> {
        match timer {
            Timer::TxEnd if self.nodes[id].role == Role::Prx => {
                self.log(id, seq, "timer", "ack_tx_end".into());
                self.command(id, Command::TxDone);
                self.nodes[id].activity = Activity::PrxLockingRx;
                self.command(id, Command::CeHighRx);
            }
            Timer::TxEnd => {
                self.log(id, seq, "timer", "tx_end".into());
                self.command(id, Command::TxDone);
                if self.nodes[id].endpoint.head_expects_ack() {
                    let node = &mut self.nodes[id];
                    node.attempt += 1;
                    let attempt = node.attempt;
                    node.activity = Activity::LockingRx;
                    self.command(id, Command::CeHighRx);
                    let delay = seconds_to_ns(self.spec.retransmit.retransmit_delay_s);
                    self.sched
                        .schedule_in(delay, id, Action::Timer(Timer::AckTimeout { attempt }));
                } else {
                    self.nodes[id].endpoint.complete_no_ack();
                    self.next_packet(id)?;
                }
            }
            Timer::AckTimeout { attempt } => {
                let live = attempt == self.nodes[id].attempt
                    && matches!(
                        self.nodes[id].activity,
                        Activity::LockingRx | Activity::AwaitingAck
                    );
                if !live {
                    self.log(id, seq, "timer_stale", "ack_timeout".into());
                    return Ok(());
                }
                self.command(id, Command::CeLow);
                let action = self.nodes[id]
                    .endpoint
                    .on_ack_timeout(&self.spec.retransmit);
                self.log(id, seq, "timer", format!("ack_timeout {action:?}"));
                match action {
                    TimeoutAction::Retransmit => self.start_attempt(id),
                    TimeoutAction::MaxRetransmits => {
                        self.nodes[id].endpoint.flush_head();
                        self.next_packet(id)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn on_frame(
        &mut self,
        id: usize,
        seq: u64,
        frame: Bitstring,
        from: usize,
        kind: FrameKind,
    ) -> Result<()> {
        match kind {
            FrameKind::Data => {
                let node = &mut self.nodes[id];
                let listening = node.activity == Activity::Idle
                    && node.power == PowerState::Mode(RadioMode::RxActive);
                if !listening {
                    node.missed_frames += 1;
                    self.log(id, seq, "frame_arrival", format!("data from={from} missed"));
                    return Ok(());
                }
                let result = node.endpoint.prx_on_frame(&frame);
                while let Some(p) = node.endpoint.poll_rx() {
                    let pipe = p.pipe.get() as usize;
                    node.received_by_pipe[pipe] += 1;
                    node.app_received += 1;
                    match decode_payload(&p.payload) {
                        Some((src, k)) => {
                            if src != pipe + 1 {
                                node.pipe_mismatches += 1;
                            }
                            if !node.received.insert((src, k)) {
                                node.app_duplicates += 1;
                            }
                        }
                        // 1-byte payloads carry only the source id
                        None if p.payload.first() != Some(&((pipe + 1) as u8)) => {
                            node.pipe_mismatches += 1
                        }
                        None => {}
                    }
                }
                self.log(
                    id,
                    seq,
                    "frame_arrival",
                    format!("data from={from} {:?}", result.verdict),
                );
                if let Some(ack) = result.ack {
                    self.command(id, Command::CeLow);
                    self.nodes[id].activity = Activity::PrxAckLock { to: from, ack };
                    self.command(id, Command::CeHighTx);
                }
            }
            FrameKind::Ack => {
                let node = &mut self.nodes[id];
                if node.activity != Activity::AwaitingAck {
                    node.missed_frames += 1;
                    self.log(id, seq, "frame_arrival", "ack missed".into());
                    return Ok(());
                }
                let accepted = node.endpoint.on_ack(&frame).is_some();
                self.log(id, seq, "frame_arrival", format!("ack accepted={accepted}"));
                if accepted {
                    self.nodes[id].attempt += 1;
                    self.command(id, Command::RxDone);
                    self.next_packet(id)?;
                }
            }
        }
        Ok(())
    }

    fn finish(mut self) -> SimOutput {
        let end = self.sched.now().max(seconds_to_ns(self.spec.network.end_s));
        let level = self.spec.radio.tx_power;
        let currents = &self.spec.radio.currents;
        let nodes = self
            .nodes
            .iter_mut()
            .enumerate()
            .map(|(id, n)| {
                n.close_segment(end);
                let charge_mas = n
                    .segments
                    .iter()
                    .map(|s| s.state.current_ma(level, currents) * s.duration_s())
                    .sum();
                NodeReport {
                    id,
                    role: if n.role == Role::Prx { "prx" } else { "ptx" },
                    pipe: n.pipe.map(PipeId::get),
                    range_m: n.range_m,
                    ber: n.ber,
                    app_submitted: n.app_submitted,
                    app_received: n.app_received,
                    app_duplicates: n.app_duplicates,
                    received_by_pipe: n.received_by_pipe,
                    pipe_mismatches: n.pipe_mismatches,
                    missed_frames: n.missed_frames,
                    stats: n.endpoint.stats().clone(),
                    charge_mas,
                    final_mode: n.radio.mode(),
                    segments: std::mem::take(&mut n.segments),
                }
            })
            .collect();
        SimOutput {
            end_ns: end,
            events_dispatched: self.sched.dispatched(),
            nodes,
            trace: self.trace,
        }
    }
}

impl Node {
    fn close_segment(&mut self, now: SimTime) {
        if now > self.since {
            self.segments.push(Segment {
                start_ns: self.since,
                end_ns: now,
                state: self.power,
            });
        }
        self.since = now;
    }
}
