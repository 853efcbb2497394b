//! Enhanced ShockBurst link layer: TX/RX FIFOs, auto-acknowledgement,
//! auto-retransmission, PID duplicate suppression and six-pipe addressing.
//!
//! The engine is split into small PTX and PRX steps ([`LinkEndpoint::begin_attempt`],
//! [`LinkEndpoint::on_ack`], [`LinkEndpoint::on_ack_timeout`], [`LinkEndpoint::prx_on_frame`])
//! so the event-driven harness can interleave them with radio timing.
//! [`ptx_transaction`] runs one complete transaction synchronously over a [`Medium`].

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::sample_corruption;
use crate::error::{Error, FrameError, Result};
use crate::packet::{self, Bitstring, Packet, PacketConfig, MAX_PAYLOAD};
use crate::radio::RadioMode;

pub const FIFO_DEPTH: usize = 3;
pub const PIPE_COUNT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PipeId(u8);

impl PipeId {
    pub fn new(pipe: u8) -> Result<Self> {
        if (pipe as usize) < PIPE_COUNT {
            Ok(PipeId(pipe))
        } else {
            Err(Error::Config(format!("pipe {pipe} out of range 0..=5")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = PipeId> {
        (0..PIPE_COUNT as u8).map(PipeId)
    }
}

impl TryFrom<u8> for PipeId {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        PipeId::new(v)
    }
}

impl From<PipeId> for u8 {
    fn from(p: PipeId) -> u8 {
        p.0
    }
}

impl fmt::Display for PipeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Receive addresses of the six pipes. Pipes 2-5 reuse pipe 1's bytes and
/// replace only the last (least significant) byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPipeAddresses")]
pub struct PipeAddressSet {
    pipe0: Vec<u8>,
    pipe1: Vec<u8>,
    low_bytes: [u8; 4],
}

#[derive(Deserialize)]
struct RawPipeAddresses {
    pipe0: Vec<u8>,
    pipe1: Vec<u8>,
    low_bytes: [u8; 4],
}

impl TryFrom<RawPipeAddresses> for PipeAddressSet {
    type Error = Error;
    fn try_from(r: RawPipeAddresses) -> Result<Self> {
        PipeAddressSet::new(r.pipe0, r.pipe1, r.low_bytes)
    }
}

impl PipeAddressSet {
    pub fn new(pipe0: Vec<u8>, pipe1: Vec<u8>, low_bytes: [u8; 4]) -> Result<Self> {
        if pipe0.len() != pipe1.len() || !(3..=5).contains(&pipe0.len()) {
            return Err(Error::Config(
                "pipe 0 and pipe 1 addresses must share a 3-5 byte width".into(),
            ));
        }
        let set = PipeAddressSet {
            pipe0,
            pipe1,
            low_bytes,
        };
        let all: Vec<Vec<u8>> = PipeId::all().map(|p| set.address(p)).collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                if all[i] == all[j] {
                    return Err(Error::Config(format!(
                        "pipes {i} and {j} resolve to the same address"
                    )));
                }
            }
        }
        Ok(set)
    }

    /// Device reset addresses, cut to `width` bytes.
    pub fn default_for_width(width: usize) -> Self {
        PipeAddressSet::new(
            vec![0xE7; width],
            vec![0xC2; width],
            [0xC3, 0xC4, 0xC5, 0xC6],
        )
        .expect("reset addresses are distinct")
    }

    pub fn width(&self) -> usize {
        self.pipe0.len()
    }

    pub fn address(&self, pipe: PipeId) -> Vec<u8> {
        match pipe.0 {
            0 => self.pipe0.clone(),
            1 => self.pipe1.clone(),
            n => {
                let mut a = self.pipe1.clone();
                let last = a.len() - 1;
                a[last] = self.low_bytes[n as usize - 2];
                a
            }
        }
    }

    pub fn match_address(&self, address: &[u8]) -> Option<PipeId> {
        PipeId::all().find(|&p| self.address(p) == address)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetransmitPolicy {
    pub max_retransmits: u8,
    pub retransmit_delay_s: f64,
}

impl Default for RetransmitPolicy {
    fn default() -> Self {
        RetransmitPolicy {
            max_retransmits: 3,
            retransmit_delay_s: 250e-6,
        }
    }
}

impl RetransmitPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_retransmits > 15 {
            return Err(Error::Config(format!(
                "max_retransmits must be 0-15, got {}",
                self.max_retransmits
            )));
        }
        if self.max_retransmits > 0 && !(self.retransmit_delay_s > 0.0) {
            return Err(Error::Config(
                "retransmit_delay_s must be positive when retransmits are enabled".into(),
            ));
        }
        Ok(())
    }

    pub fn max_attempts(&self) -> u32 {
        1 + self.max_retransmits as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Ptx,
    Prx,
}

/// Per-endpoint counters. PTX endpoints fill the first group, PRX the second.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    /// Unique packets that started transmission.
    pub sent: u64,
    /// Every frame put on the air, first attempts included.
    pub transmissions: u64,
    pub acked: u64,
    pub retransmissions: u64,
    pub max_rt_failures: u64,
    /// Packets sent with no_ack set; there is no delivery feedback for them.
    pub sent_no_ack: u64,

    pub delivered: u64,
    pub duplicates_suppressed: u64,
    pub crc_drops: u64,
    pub address_mismatches: u64,
    pub rx_overflows: u64,
    pub acks_sent: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueuedFrame {
    pub packet: Packet,
    pub pipe: PipeId,
    attempts: u32,
    started: bool,
}

impl QueuedFrame {
    pub fn attempts(&self) -> u32 {
        self.attempts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RxPayload {
    pub payload: Vec<u8>,
    pub pipe: PipeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RxVerdict {
    Delivered(PipeId),
    DuplicateSuppressed(PipeId),
    CrcDropped,
    AddressMismatch,
    FifoFull(PipeId),
}

/// Verdict plus the ACK frame the receiver puts on the air, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RxResult {
    pub verdict: RxVerdict,
    pub ack: Option<Bitstring>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeoutAction {
    Retransmit,
    MaxRetransmits,
}

#[derive(Debug, Clone)]
pub struct LinkEndpoint {
    role: Role,
    config: PacketConfig,
    addresses: PipeAddressSet,
    tx_fifo: VecDeque<QueuedFrame>,
    rx_fifo: VecDeque<RxPayload>,
    last_seen: [Option<(u8, u16)>; PIPE_COUNT],
    next_pid: u8,
    stats: LinkStats,
}

impl LinkEndpoint {
    pub fn new(role: Role, config: PacketConfig, addresses: PipeAddressSet) -> Result<Self> {
        if addresses.width() != config.address_width() {
            return Err(Error::Config(format!(
                "pipe addresses are {} bytes but frames use {}",
                addresses.width(),
                config.address_width()
            )));
        }
        Ok(LinkEndpoint {
            role,
            config,
            addresses,
            tx_fifo: VecDeque::with_capacity(FIFO_DEPTH),
            rx_fifo: VecDeque::with_capacity(FIFO_DEPTH),
            last_seen: [None; PIPE_COUNT],
            next_pid: 0,
            stats: LinkStats::default(),
        })
    }

    pub fn ptx(config: PacketConfig) -> Self {
        Self::new(
            Role::Ptx,
            config,
            PipeAddressSet::default_for_width(config.address_width()),
        )
        .expect("default addresses match config width")
    }

    pub fn prx(config: PacketConfig) -> Self {
        Self::new(
            Role::Prx,
            config,
            PipeAddressSet::default_for_width(config.address_width()),
        )
        .expect("default addresses match config width")
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn config(&self) -> &PacketConfig {
        &self.config
    }

    pub fn addresses(&self) -> &PipeAddressSet {
        &self.addresses
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    pub fn tx_pending(&self) -> usize {
        self.tx_fifo.len()
    }

    pub fn rx_pending(&self) -> usize {
        self.rx_fifo.len()
    }

    pub fn tx_head(&self) -> Option<&QueuedFrame> {
        self.tx_fifo.front()
    }

    /// Assembles a packet with the next PID and queues it.
    pub fn enqueue_tx(&mut self, payload: &[u8], pipe: PipeId, no_ack: bool) -> Result<()> {
        if payload.is_empty() || payload.len() > MAX_PAYLOAD {
            return Err(FrameError::InvalidPayload(payload.len()).into());
        }
        if self.tx_fifo.len() >= FIFO_DEPTH {
            return Err(Error::FifoFull);
        }
        let packet = Packet::new(
            self.addresses.address(pipe),
            payload.to_vec(),
            self.next_pid,
            no_ack,
        )?;
        self.next_pid = (self.next_pid + 1) % 4;
        self.tx_fifo.push_back(QueuedFrame {
            packet,
            pipe,
            attempts: 0,
            started: false,
        });
        Ok(())
    }

    /// Puts the head packet on the air (same PID on every retry).
    pub fn begin_attempt(&mut self) -> Option<Bitstring> {
        let head = self.tx_fifo.front_mut()?;
        if !head.started {
            head.started = true;
            self.stats.sent += 1;
        }
        if head.attempts > 0 {
            self.stats.retransmissions += 1;
        }
        head.attempts += 1;
        self.stats.transmissions += 1;
        Some(packet::serialize(&head.packet, &self.config).expect("queued packets are valid"))
    }

    /// Whether the head packet waits for an acknowledgement.
    pub fn head_expects_ack(&self) -> bool {
        self.tx_fifo.front().is_some_and(|f| !f.packet.no_ack())
    }

    /// Retires a no_ack head packet once it has been transmitted.
    pub fn complete_no_ack(&mut self) -> Option<QueuedFrame> {
        let head = self.tx_fifo.pop_front()?;
        self.stats.sent_no_ack += 1;
        Some(head)
    }

    /// Checks a received ACK against the head packet; on a match the head is
    /// popped and returned together with its retransmission count.
    pub fn on_ack(&mut self, bits: &Bitstring) -> Option<(QueuedFrame, u32)> {
        let head = self.tx_fifo.front()?;
        let ack = packet::deserialize(bits, &self.config).ok()?;
        if ack.address() != head.packet.address() || ack.payload_len() != 0 {
            return None;
        }
        let frame = self.tx_fifo.pop_front()?;
        self.stats.acked += 1;
        let retransmits = frame.attempts - 1;
        Some((frame, retransmits))
    }

    /// ACK window closed without a valid ACK.
    pub fn on_ack_timeout(&mut self, policy: &RetransmitPolicy) -> TimeoutAction {
        match self.tx_fifo.front_mut() {
            Some(head) if head.attempts >= policy.max_attempts() => {
                head.attempts = 0;
                self.stats.max_rt_failures += 1;
                TimeoutAction::MaxRetransmits
            }
            _ => TimeoutAction::Retransmit,
        }
    }

    /// Drops the head packet, e.g. after a max-retransmit failure.
    pub fn flush_head(&mut self) -> Option<QueuedFrame> {
        self.tx_fifo.pop_front()
    }

    /// Receiver side of the protocol for one frame as delivered by the medium.
    pub fn prx_on_frame(&mut self, bits: &Bitstring) -> RxResult {
        let dropped = |verdict| RxResult { verdict, ack: None };

        let Some(pipe) =
            packet::peek_address(bits, &self.config).and_then(|a| self.addresses.match_address(&a))
        else {
            self.stats.address_mismatches += 1;
            return dropped(RxVerdict::AddressMismatch);
        };
        let packet = match packet::deserialize(bits, &self.config) {
            Ok(p) => p,
            Err(_) => {
                self.stats.crc_drops += 1;
                return dropped(RxVerdict::CrcDropped);
            }
        };
        let id = (packet.pid(), packet::stored_crc(bits, &self.config));
        let slot = pipe.0 as usize;

        let verdict = if self.last_seen[slot] == Some(id) {
            self.stats.duplicates_suppressed += 1;
            RxVerdict::DuplicateSuppressed(pipe)
        } else if self.rx_fifo.len() >= FIFO_DEPTH {
            self.stats.rx_overflows += 1;
            return dropped(RxVerdict::FifoFull(pipe));
        } else {
            self.last_seen[slot] = Some(id);
            self.stats.delivered += 1;
            let no_ack = packet.no_ack();
            let pid = packet.pid();
            let address = packet.address().to_vec();
            self.rx_fifo.push_back(RxPayload {
                payload: packet.into_payload(),
                pipe,
            });
            if no_ack {
                return dropped(RxVerdict::Delivered(pipe));
            }
            return RxResult {
                verdict: RxVerdict::Delivered(pipe),
                ack: Some(self.ack_frame(address, pid)),
            };
        };

        let ack =
            (!packet.no_ack()).then(|| self.ack_frame(packet.address().to_vec(), packet.pid()));
        RxResult { verdict, ack }
    }

    fn ack_frame(&mut self, address: Vec<u8>, pid: u8) -> Bitstring {
        self.stats.acks_sent += 1;
        let ack = Packet::new(address, Vec::new(), pid, false).expect("empty ack payload is valid");
        packet::serialize(&ack, &self.config).expect("ack uses configured width")
    }

    pub fn poll_rx(&mut self) -> Option<RxPayload> {
        self.rx_fifo.pop_front()
    }
}

/// Carries frames between the two ends of a link. `None` means the frame
/// never reached the other side.
pub trait Medium {
    fn forward(&mut self, frame: &Bitstring) -> Option<Bitstring>;
    fn reverse(&mut self, frame: &Bitstring) -> Option<Bitstring>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Lossless;

impl Medium for Lossless {
    fn forward(&mut self, frame: &Bitstring) -> Option<Bitstring> {
        Some(frame.clone())
    }
    fn reverse(&mut self, frame: &Bitstring) -> Option<Bitstring> {
        Some(frame.clone())
    }
}

type DropRule = Box<dyn FnMut(u64) -> bool + Send>;

/// Deterministic medium: each direction drops frame number `n` (counted from
/// zero per direction) when its rule returns true.
pub struct ScriptedMedium {
    drop_forward: DropRule,
    drop_reverse: DropRule,
    forward_count: u64,
    reverse_count: u64,
}

impl ScriptedMedium {
    pub fn new(
        drop_forward: impl FnMut(u64) -> bool + Send + 'static,
        drop_reverse: impl FnMut(u64) -> bool + Send + 'static,
    ) -> Self {
        ScriptedMedium {
            drop_forward: Box::new(drop_forward),
            drop_reverse: Box::new(drop_reverse),
            forward_count: 0,
            reverse_count: 0,
        }
    }

    pub fn forward_frames(&self) -> u64 {
        self.forward_count
    }

    pub fn reverse_frames(&self) -> u64 {
        self.reverse_count
    }
}

impl Medium for ScriptedMedium {
    fn forward(&mut self, frame: &Bitstring) -> Option<Bitstring> {
        let n = self.forward_count;
        self.forward_count += 1;
        (!(self.drop_forward)(n)).then(|| frame.clone())
    }
    fn reverse(&mut self, frame: &Bitstring) -> Option<Bitstring> {
        let n = self.reverse_count;
        self.reverse_count += 1;
        (!(self.drop_reverse)(n)).then(|| frame.clone())
    }
}

/// Loses each data frame independently with probability `p`; ACKs always arrive.
pub struct BernoulliLoss<R> {
    pub p: f64,
    pub rng: R,
}

impl<R: Rng> Medium for BernoulliLoss<R> {
    fn forward(&mut self, frame: &Bitstring) -> Option<Bitstring> {
        (self.rng.random::<f64>() >= self.p).then(|| frame.clone())
    }
    fn reverse(&mut self, frame: &Bitstring) -> Option<Bitstring> {
        Some(frame.clone())
    }
}

/// Flips every bit in both directions independently with probability `ber`.
pub struct BitErrorMedium<R> {
    pub ber: f64,
    pub rng: R,
}

impl<R: Rng> BitErrorMedium<R> {
    fn corrupt(&mut self, frame: &Bitstring) -> Bitstring {
        let mut out = frame.clone();
        for i in sample_corruption(&mut self.rng, frame.len(), self.ber) {
            out.flip(i);
        }
        out
    }
}

impl<R: Rng> Medium for BitErrorMedium<R> {
    fn forward(&mut self, frame: &Bitstring) -> Option<Bitstring> {
        Some(self.corrupt(frame))
    }
    fn reverse(&mut self, frame: &Bitstring) -> Option<Bitstring> {
        Some(self.corrupt(frame))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxOutcome {
    Delivered {
        retransmits: u32,
    },
    /// no_ack packet put on the air once.
    Sent,
    MaxRetransmits {
        attempts: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttemptRecord {
    /// PRX verdict, or `None` when the frame was lost in the medium.
    pub rx: Option<RxVerdict>,
    pub ack_received: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionReport {
    pub outcome: TxOutcome,
    pub attempts: Vec<AttemptRecord>,
}

/// One complete PTX transaction for the head of `ptx`'s TX FIFO.
///
/// On max-retransmit failure the packet stays at the FIFO head.
pub fn ptx_transaction(
    ptx: &mut LinkEndpoint,
    prx: &mut LinkEndpoint,
    medium: &mut dyn Medium,
    policy: &RetransmitPolicy,
    radio_mode: RadioMode,
) -> Result<TransactionReport> {
    if !matches!(radio_mode, RadioMode::StandbyI | RadioMode::TxActive) {
        return Err(Error::ProtocolViolation {
            mode: radio_mode,
            command: crate::radio::Command::CeHighTx,
        });
    }
    if ptx.role != Role::Ptx || prx.role != Role::Prx {
        return Err(Error::Config(
            "ptx_transaction needs a PTX and a PRX endpoint".into(),
        ));
    }
    if ptx.tx_fifo.is_empty() {
        return Err(Error::Config("tx fifo is empty".into()));
    }

    let mut attempts = Vec::new();
    loop {
        let expects_ack = ptx.head_expects_ack();
        let frame = ptx.begin_attempt().expect("fifo checked non-empty");
        let rx = medium.forward(&frame).map(|bits| prx.prx_on_frame(&bits));

        if !expects_ack {
            ptx.complete_no_ack();
            attempts.push(AttemptRecord {
                rx: rx.map(|r| r.verdict),
                ack_received: false,
            });
            return Ok(TransactionReport {
                outcome: TxOutcome::Sent,
                attempts,
            });
        }

        let acked = rx
            .as_ref()
            .and_then(|r| r.ack.as_ref())
            .and_then(|ack| medium.reverse(ack))
            .and_then(|bits| ptx.on_ack(&bits));
        attempts.push(AttemptRecord {
            rx: rx.map(|r| r.verdict),
            ack_received: acked.is_some(),
        });
        if let Some((_, retransmits)) = acked {
            return Ok(TransactionReport {
                outcome: TxOutcome::Delivered { retransmits },
                attempts,
            });
        }
        if ptx.on_ack_timeout(policy) == TimeoutAction::MaxRetransmits {
            let n = attempts.len() as u32;
            return Ok(TransactionReport {
                outcome: TxOutcome::MaxRetransmits { attempts: n },
                attempts,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair() -> (LinkEndpoint, LinkEndpoint) {
        let c = PacketConfig::default();
        (LinkEndpoint::ptx(c), LinkEndpoint::prx(c))
    }

    fn pipe(n: u8) -> PipeId {
        PipeId::new(n).unwrap()
    }

    fn policy(max: u8) -> RetransmitPolicy {
        RetransmitPolicy {
            max_retransmits: max,
            retransmit_delay_s: 250e-6,
        }
    }

    #[test]
    fn pipe_ids_bounded() {
        assert!(PipeId::new(5).is_ok());
        assert!(PipeId::new(6).is_err());
    }

    #[test]
    fn pipe_addresses_share_high_bytes() {
        let set = PipeAddressSet::default_for_width(5);
        assert_eq!(set.address(pipe(3)), vec![0xC2, 0xC2, 0xC2, 0xC2, 0xC4]);
        assert_eq!(
            set.match_address(&[0xC2, 0xC2, 0xC2, 0xC2, 0xC6]),
            Some(pipe(5))
        );
        assert_eq!(set.match_address(&[1, 2, 3, 4, 5]), None);
        // low byte equal to pipe 1's makes pipes 1 and 2 collide
        assert!(PipeAddressSet::new(vec![1; 5], vec![2; 5], [2, 3, 4, 5]).is_err());
        assert!(PipeAddressSet::new(vec![1; 5], vec![2; 4], [3, 4, 5, 6]).is_err());
    }

    #[test]
    fn policy_validation() {
        assert!(policy(15).validate().is_ok());
        assert!(policy(16).validate().is_err());
        let zero_delay = RetransmitPolicy {
            max_retransmits: 1,
            retransmit_delay_s: 0.0,
        };
        assert!(zero_delay.validate().is_err());
    }

    #[test]
    fn fifo_holds_three() {
        let (mut ptx, _) = pair();
        for i in 0..3 {
            ptx.enqueue_tx(&[i], pipe(0), false).unwrap();
        }
        assert!(matches!(
            ptx.enqueue_tx(&[9], pipe(0), false),
            Err(Error::FifoFull)
        ));
        assert_eq!(ptx.tx_pending(), 3);
    }

    #[test]
    fn empty_payload_rejected() {
        let (mut ptx, _) = pair();
        assert!(matches!(
            ptx.enqueue_tx(&[], pipe(0), false),
            Err(Error::Frame(FrameError::InvalidPayload(0)))
        ));
        assert!(ptx.enqueue_tx(&[0; 33], pipe(0), false).is_err());
    }

    #[test]
    fn pid_increments_mod_four() {
        let (mut ptx, _) = pair();
        let mut pids = Vec::new();
        for i in 0..6 {
            ptx.enqueue_tx(&[i], pipe(0), true).unwrap();
            pids.push(ptx.tx_head().unwrap().packet.pid());
            ptx.flush_head();
        }
        assert_eq!(pids, vec![0, 1, 2, 3, 0, 1]);
    }

    #[test]
    fn lossless_delivers_without_retransmit() {
        let (mut ptx, mut prx) = pair();
        ptx.enqueue_tx(b"hi", pipe(0), false).unwrap();
        let r = ptx_transaction(
            &mut ptx,
            &mut prx,
            &mut Lossless,
            &policy(3),
            RadioMode::StandbyI,
        )
        .unwrap();
        assert_eq!(r.outcome, TxOutcome::Delivered { retransmits: 0 });
        assert_eq!(
            prx.poll_rx().unwrap(),
            RxPayload {
                payload: b"hi".to_vec(),
                pipe: pipe(0)
            }
        );
        assert_eq!(ptx.tx_pending(), 0);
    }

    #[test]
    fn first_attempt_dropped() {
        let (mut ptx, mut prx) = pair();
        ptx.enqueue_tx(b"x", pipe(1), false).unwrap();
        let mut m = ScriptedMedium::new(|n| n == 0, |_| false);
        let r =
            ptx_transaction(&mut ptx, &mut prx, &mut m, &policy(3), RadioMode::StandbyI).unwrap();
        assert_eq!(r.outcome, TxOutcome::Delivered { retransmits: 1 });
        assert_eq!(r.attempts.len(), 2);
        assert_eq!(r.attempts[0].rx, None);
    }

    #[test]
    fn everything_dropped_hits_max_rt() {
        let (mut ptx, mut prx) = pair();
        ptx.enqueue_tx(b"x", pipe(0), false).unwrap();
        let mut m = ScriptedMedium::new(|_| true, |_| true);
        let r =
            ptx_transaction(&mut ptx, &mut prx, &mut m, &policy(2), RadioMode::StandbyI).unwrap();
        assert_eq!(r.outcome, TxOutcome::MaxRetransmits { attempts: 3 });
        assert_eq!(m.forward_frames(), 3);
        assert_eq!(ptx.tx_pending(), 1, "failed packet stays at the head");
        assert_eq!(ptx.stats().max_rt_failures, 1);
    }

    #[test]
    fn wrong_radio_mode_is_violation() {
        let (mut ptx, mut prx) = pair();
        ptx.enqueue_tx(b"x", pipe(0), false).unwrap();
        let r = ptx_transaction(
            &mut ptx,
            &mut prx,
            &mut Lossless,
            &policy(3),
            RadioMode::PowerDown,
        );
        assert!(matches!(r, Err(Error::ProtocolViolation { .. })));
    }

    #[test]
    fn lost_ack_is_suppressed_as_duplicate() {
        let (mut ptx, mut prx) = pair();
        ptx.enqueue_tx(b"once", pipe(0), false).unwrap();
        let mut m = ScriptedMedium::new(|_| false, |n| n == 0);
        let r =
            ptx_transaction(&mut ptx, &mut prx, &mut m, &policy(3), RadioMode::StandbyI).unwrap();
        assert_eq!(r.outcome, TxOutcome::Delivered { retransmits: 1 });
        assert_eq!(
            r.attempts[1].rx,
            Some(RxVerdict::DuplicateSuppressed(pipe(0)))
        );
        assert_eq!(prx.stats().duplicates_suppressed, 1);
        assert_eq!(prx.stats().acks_sent, 2);
        assert_eq!(prx.poll_rx().unwrap().payload, b"once");
        assert!(prx.poll_rx().is_none());
    }

    #[test]
    fn prx_routes_to_pipe_and_acks() {
        let (mut ptx, mut prx) = pair();
        ptx.enqueue_tx(&[7], pipe(3), false).unwrap();
        let frame = ptx.begin_attempt().unwrap();
        let r = prx.prx_on_frame(&frame);
        assert_eq!(r.verdict, RxVerdict::Delivered(pipe(3)));
        let ack = r.ack.unwrap();
        assert_eq!(ack.len(), 65);
        assert!(ptx.on_ack(&ack).is_some());
    }

    #[test]
    fn corrupted_frame_dropped_without_ack() {
        let (mut ptx, mut prx) = pair();
        ptx.enqueue_tx(&[7], pipe(0), false).unwrap();
        let mut frame = ptx.begin_attempt().unwrap();
        frame.flip(60);
        let r = prx.prx_on_frame(&frame);
        assert_eq!(
            r,
            RxResult {
                verdict: RxVerdict::CrcDropped,
                ack: None
            }
        );
        // address bits hit
        let mut frame = ptx.begin_attempt().unwrap();
        frame.flip(10);
        assert_eq!(prx.prx_on_frame(&frame).verdict, RxVerdict::AddressMismatch);
    }

    #[test]
    fn no_ack_frames_get_no_ack() {
        let (mut ptx, mut prx) = pair();
        ptx.enqueue_tx(&[1], pipe(2), true).unwrap();
        let r = ptx_transaction(
            &mut ptx,
            &mut prx,
            &mut Lossless,
            &policy(3),
            RadioMode::StandbyI,
        )
        .unwrap();
        assert_eq!(r.outcome, TxOutcome::Sent);
        assert_eq!(prx.stats().acks_sent, 0);
        assert_eq!(prx.poll_rx().unwrap().pipe, pipe(2));
    }

    #[test]
    fn full_rx_fifo_drops_without_ack() {
        let (mut ptx, mut prx) = pair();
        for i in 0..4u8 {
            ptx.enqueue_tx(&[i], pipe(0), false).unwrap();
            let r = ptx_transaction(
                &mut ptx,
                &mut prx,
                &mut Lossless,
                &policy(0),
                RadioMode::StandbyI,
            )
            .unwrap();
            if i < 3 {
                assert_eq!(r.outcome, TxOutcome::Delivered { retransmits: 0 });
            } else {
                assert_eq!(r.outcome, TxOutcome::MaxRetransmits { attempts: 1 });
                assert_eq!(r.attempts[0].rx, Some(RxVerdict::FifoFull(pipe(0))));
            }
        }
        assert_eq!(prx.stats().rx_overflows, 1);
        // drain and retry the held packet
        while prx.poll_rx().is_some() {}
        let r = ptx_transaction(
            &mut ptx,
            &mut prx,
            &mut Lossless,
            &policy(0),
            RadioMode::StandbyI,
        )
        .unwrap();
        assert_eq!(r.outcome, TxOutcome::Delivered { retransmits: 0 });
        assert_eq!(prx.poll_rx().unwrap().payload, vec![3]);
    }

    #[test]
    fn poll_preserves_order() {
        let (mut ptx, mut prx) = pair();
        assert!(prx.poll_rx().is_none());
        for i in 0..3u8 {
            ptx.enqueue_tx(&[i], pipe(0), false).unwrap();
            ptx_transaction(
                &mut ptx,
                &mut prx,
                &mut Lossless,
                &policy(3),
                RadioMode::StandbyI,
            )
            .unwrap();
        }
        let got: Vec<u8> = std::iter::from_fn(|| prx.poll_rx())
            .map(|p| p.payload[0])
            .collect();
        assert_eq!(got, vec![0, 1, 2]);
    }

    proptest! {
        /// Arbitrary forward/ACK loss scripts: every packet ends up delivered
        /// or failed, nothing reaches the application twice, and attempts stay
        /// within the retransmit bound.
        #[test]
        fn conservation_under_loss(
            fwd in prop::collection::vec(any::<bool>(), 0..200),
            rev in prop::collection::vec(any::<bool>(), 0..200),
            max_rt in 0u8..4,
            n in 1usize..40,
        ) {
            // 16-bit CRC keeps (pid, crc) collisions between packets four apart negligible
            let c = PacketConfig::new(5, 2, crate::packet::DataRate::Mbps2).unwrap();
            let (mut ptx, mut prx) = (LinkEndpoint::ptx(c), LinkEndpoint::prx(c));
            let mut m = ScriptedMedium::new(
                move |i| fwd.get(i as usize).copied().unwrap_or(false),
                move |i| rev.get(i as usize).copied().unwrap_or(false),
            );
            let pol = policy(max_rt);
            let mut delivered_app = Vec::new();
            let (mut ok, mut failed) = (0u64, 0u64);
            for k in 0..n {
                let payload = (k as u16).to_be_bytes();
                ptx.enqueue_tx(&payload, pipe(0), false).unwrap();
                let r = ptx_transaction(&mut ptx, &mut prx, &mut m, &pol, RadioMode::StandbyI).unwrap();
                prop_assert!(r.attempts.len() as u32 <= pol.max_attempts());
                match r.outcome {
                    TxOutcome::Delivered { .. } => ok += 1,
                    TxOutcome::MaxRetransmits { .. } => { failed += 1; ptx.flush_head(); }
                    TxOutcome::Sent => unreachable!(),
                }
                while let Some(p) = prx.poll_rx() {
                    delivered_app.push(u16::from_be_bytes([p.payload[0], p.payload[1]]));
                }
            }
            prop_assert_eq!(ok + failed, n as u64);
            prop_assert_eq!(ptx.stats().acked + ptx.stats().max_rt_failures, ptx.stats().sent);
            let mut dedup = delivered_app.clone();
            dedup.sort();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), delivered_app.len(), "duplicate delivery");
            prop_assert!(delivered_app.iter().all(|&v| (v as usize) < n));
            prop_assert!(delivered_app.len() as u64 >= ok);
        }
    }
}
