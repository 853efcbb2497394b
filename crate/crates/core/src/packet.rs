//! Enhanced ShockBurst frame codec.
//!
//! Over-the-air layout, most-significant bit first within every field:
//!
//! | field    | bits               |
//! | :---     | :---               |
//! | preamble | 8                  |
//! | address  | 8 × address_width  |
//! | control  | 9 (6 length, 2 pid, 1 no_ack) |
//! | payload  | 8 × payload_len    |
//! | crc      | 8 × crc_width      |
//!
//! The CRC covers address, control and payload. The preamble is a constant
//! sync pattern.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FrameError};

pub const PREAMBLE: u8 = 0xAA;
pub const PREAMBLE_BITS: usize = 8;
pub const CONTROL_BITS: usize = 9;
pub const MAX_PAYLOAD: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataRate {
    #[serde(rename = "1mbps")]
    Mbps1,
    #[serde(rename = "2mbps")]
    Mbps2,
}

impl DataRate {
    pub fn bits_per_second(self) -> f64 {
        match self {
            DataRate::Mbps1 => 1_000_000.0,
            DataRate::Mbps2 => 2_000_000.0,
        }
    }

    pub fn from_bps(bps: u32) -> Option<Self> {
        match bps {
            1_000_000 => Some(DataRate::Mbps1),
            2_000_000 => Some(DataRate::Mbps2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crc {
    Crc8,
    Crc16,
}

impl Crc {
    pub fn width_bits(self) -> usize {
        match self {
            Crc::Crc8 => 8,
            Crc::Crc16 => 16,
        }
    }

    fn params(self) -> (u32, u32) {
        match self {
            // x^8 + x^2 + x + 1
            Crc::Crc8 => (0x07, 0xFF),
            // x^16 + x^12 + x^5 + 1
            Crc::Crc16 => (0x1021, 0xFFFF),
        }
    }
}

/// Frame geometry and air data rate. Constructed only through [`PacketConfig::new`],
/// so every instance satisfies the width and rate invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPacketConfig", into = "RawPacketConfig")]
pub struct PacketConfig {
    address_width: u8,
    crc_width: u8,
    datarate: DataRate,
}

#[derive(Serialize, Deserialize)]
struct RawPacketConfig {
    address_width: u8,
    crc_width: u8,
    datarate_bps: u32,
}

impl TryFrom<RawPacketConfig> for PacketConfig {
    type Error = Error;

    fn try_from(raw: RawPacketConfig) -> Result<Self, Error> {
        let rate = DataRate::from_bps(raw.datarate_bps).ok_or_else(|| {
            Error::Config(format!(
                "datarate_bps must be 1000000 or 2000000, got {}",
                raw.datarate_bps
            ))
        })?;
        PacketConfig::new(raw.address_width, raw.crc_width, rate)
    }
}

impl From<PacketConfig> for RawPacketConfig {
    fn from(c: PacketConfig) -> Self {
        RawPacketConfig {
            address_width: c.address_width,
            crc_width: c.crc_width,
            datarate_bps: c.datarate.bits_per_second() as u32,
        }
    }
}

impl Default for PacketConfig {
    /// 5-byte address, 1-byte CRC, 2 Mbps: the 65-bit-overhead frame.
    fn default() -> Self {
        PacketConfig {
            address_width: 5,
            crc_width: 1,
            datarate: DataRate::Mbps2,
        }
    }
}

impl PacketConfig {
    pub fn new(address_width: u8, crc_width: u8, datarate: DataRate) -> Result<Self, Error> {
        if !(3..=5).contains(&address_width) {
            return Err(Error::Config(format!(
                "address_width must be 3, 4 or 5 bytes, got {address_width}"
            )));
        }
        if !(1..=2).contains(&crc_width) {
            return Err(Error::Config(format!(
                "crc_width must be 1 or 2 bytes, got {crc_width}"
            )));
        }
        Ok(PacketConfig {
            address_width,
            crc_width,
            datarate,
        })
    }

    pub fn address_width(&self) -> usize {
        self.address_width as usize
    }

    pub fn crc_width(&self) -> usize {
        self.crc_width as usize
    }

    pub fn datarate(&self) -> DataRate {
        self.datarate
    }

    pub fn crc(&self) -> Crc {
        if self.crc_width == 1 {
            Crc::Crc8
        } else {
            Crc::Crc16
        }
    }

    /// Every bit of a frame that is not payload.
    pub fn overhead_bits(&self) -> usize {
        PREAMBLE_BITS + 8 * self.address_width() + CONTROL_BITS + 8 * self.crc_width()
    }

    pub fn frame_bits(&self, payload_len: usize) -> usize {
        self.overhead_bits() + 8 * payload_len
    }
}

pub fn overhead_bits(config: &PacketConfig) -> usize {
    config.overhead_bits()
}

/// Seconds needed to clock `frame_bits` out at the configured data rate.
pub fn air_time(frame_bits: usize, config: &PacketConfig) -> f64 {
    frame_bits as f64 / config.datarate.bits_per_second()
}

/// An ordered bit sequence with an explicit length.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Bitstring {
    bits: Vec<bool>,
}

impl Bitstring {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Bitstring { bits }
    }

    /// Unpacks the first `len` bits of `bytes`, MSB first.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self, FrameError> {
        if len > bytes.len() * 8 {
            return Err(FrameError::Malformed(format!(
                "{len} bits requested from {} bytes",
                bytes.len()
            )));
        }
        let bits = (0..len)
            .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1)
            .collect();
        Ok(Bitstring { bits })
    }

    /// Packs MSB first; the final byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Appends the low `width` bits of `value`, MSB first.
    pub fn push_value(&mut self, value: u64, width: usize) {
        for i in (0..width).rev() {
            self.bits.push((value >> i) & 1 == 1);
        }
    }

    pub fn push_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.push_value(b as u64, 8);
        }
    }

    /// Reads `width` bits starting at `start` as an unsigned integer.
    pub fn read_value(&self, start: usize, width: usize) -> u64 {
        self.bits[start..start + width]
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    fn read_bytes(&self, start: usize, count: usize) -> Vec<u8> {
        (0..count)
            .map(|i| self.read_value(start + 8 * i, 8) as u8)
            .collect()
    }

    pub fn flip(&mut self, index: usize) {
        self.bits[index] = !self.bits[index];
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Bit-serial CRC, MSB first, no reflection and no final xor.
pub fn compute_crc(bits: &[bool], crc: Crc) -> u16 {
    let (poly, init) = crc.params();
    let width = crc.width_bits();
    let top = 1u32 << (width - 1);
    let mask = (1u32 << width) - 1;
    let mut reg = init;
    for &bit in bits {
        let feedback = (reg & top != 0) ^ bit;
        reg = (reg << 1) & mask;
        if feedback {
            reg ^= poly;
        }
    }
    reg as u16
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Packet {
    address: Vec<u8>,
    payload: Vec<u8>,
    pid: u8,
    no_ack: bool,
}

impl Packet {
    pub fn new(
        address: Vec<u8>,
        payload: Vec<u8>,
        pid: u8,
        no_ack: bool,
    ) -> Result<Self, FrameError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(FrameError::InvalidPayload(payload.len()));
        }
        if pid > 3 {
            return Err(FrameError::InvalidPid(pid));
        }
        Ok(Packet {
            address,
            payload,
            pid,
            no_ack,
        })
    }

    pub fn address(&self) -> &[u8] {
        &self.address
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.payload
    }

    pub fn pid(&self) -> u8 {
        self.pid
    }

    pub fn no_ack(&self) -> bool {
        self.no_ack
    }

    pub fn payload_len(&self) -> usize {
        self.payload.len()
    }
}

pub fn serialize(packet: &Packet, config: &PacketConfig) -> Result<Bitstring, FrameError> {
    if packet.address.len() != config.address_width() {
        return Err(FrameError::AddressWidth {
            expected: config.address_width(),
            got: packet.address.len(),
        });
    }
    let mut out = Bitstring::new();
    out.push_value(PREAMBLE as u64, PREAMBLE_BITS);
    out.push_bytes(&packet.address);
    out.push_value(packet.payload.len() as u64, 6);
    out.push_value(packet.pid as u64, 2);
    out.push(packet.no_ack);
    out.push_bytes(&packet.payload);
    let crc = config.crc();
    let checksum = compute_crc(&out.bits()[PREAMBLE_BITS..], crc);
    out.push_value(checksum as u64, crc.width_bits());
    Ok(out)
}

/// Parses and checks a received frame.
///
/// Bounds are checked first, then the preamble and CRC (either failing is a
/// [`FrameError::CrcFailure`]), then the length field against the frame size.
pub fn deserialize(bits: &Bitstring, config: &PacketConfig) -> Result<Packet, FrameError> {
    let n = bits.len();
    let overhead = config.overhead_bits();
    if n < overhead {
        return Err(FrameError::Malformed(format!(
            "{n} bits is shorter than the {overhead}-bit minimum frame"
        )));
    }
    if n > overhead + 8 * MAX_PAYLOAD || !(n - overhead).is_multiple_of(8) {
        return Err(FrameError::Malformed(format!(
            "{n} bits is not a whole-byte payload frame"
        )));
    }

    let crc = config.crc();
    let crc_start = n - crc.width_bits();
    let stored = bits.read_value(crc_start, crc.width_bits()) as u16;
    let computed = compute_crc(&bits.bits()[PREAMBLE_BITS..crc_start], crc);
    let preamble = bits.read_value(0, PREAMBLE_BITS) as u8;
    if stored != computed || preamble != PREAMBLE {
        return Err(FrameError::CrcFailure);
    }

    let aw = config.address_width();
    let address = bits.read_bytes(PREAMBLE_BITS, aw);
    let ctrl = PREAMBLE_BITS + 8 * aw;
    let len = bits.read_value(ctrl, 6) as usize;
    let pid = bits.read_value(ctrl + 6, 2) as u8;
    let no_ack = bits.bits()[ctrl + 8];
    if len > MAX_PAYLOAD || config.frame_bits(len) != n {
        return Err(FrameError::Malformed(format!(
            "length field says {len} bytes but frame carries {} bytes",
            (n - overhead) / 8
        )));
    }
    let payload = bits.read_bytes(ctrl + CONTROL_BITS, len);
    Packet::new(address, payload, pid, no_ack)
}

/// Address bits of a frame as received, without any integrity check.
pub(crate) fn peek_address(bits: &Bitstring, config: &PacketConfig) -> Option<Vec<u8>> {
    let aw = config.address_width();
    (bits.len() >= PREAMBLE_BITS + 8 * aw).then(|| bits.read_bytes(PREAMBLE_BITS, aw))
}

/// Stored CRC field of a frame, assumed already checked.
pub(crate) fn stored_crc(bits: &Bitstring, config: &PacketConfig) -> u16 {
    let w = config.crc().width_bits();
    bits.read_value(bits.len() - w, w) as u16
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ADDR: [u8; 5] = [0xE7, 0xE7, 0xE7, 0xE7, 0xE7];

    fn cfg(aw: u8, cw: u8) -> PacketConfig {
        PacketConfig::new(aw, cw, DataRate::Mbps2).unwrap()
    }

    /// Polynomial long division over GF(2) of `init·x^n + msg·x^w` by the
    /// generator. Independent of the shift-register path.
    fn crc_long_division(msg: &[bool], poly: u32, init: u32, w: usize) -> u32 {
        let n = msg.len();
        let mut dividend = vec![false; n + w];
        for (i, &b) in msg.iter().enumerate() {
            dividend[i] = b;
        }
        for (i, d) in dividend.iter_mut().take(w).enumerate() {
            *d ^= (init >> (w - 1 - i)) & 1 == 1;
        }
        // generator with its implicit leading term
        let gen: Vec<bool> = (0..=w)
            .map(|i| {
                if i == 0 {
                    true
                } else {
                    (poly >> (w - i)) & 1 == 1
                }
            })
            .collect();
        for i in 0..n {
            if dividend[i] {
                for (j, &g) in gen.iter().enumerate() {
                    dividend[i + j] ^= g;
                }
            }
        }
        dividend[n..]
            .iter()
            .fold(0u32, |acc, &b| (acc << 1) | b as u32)
    }

    #[test]
    fn overhead_matches_field_widths() {
        assert_eq!(overhead_bits(&cfg(5, 1)), 65);
        assert_eq!(overhead_bits(&cfg(3, 1)), 49);
        assert_eq!(overhead_bits(&cfg(5, 2)), 73);
    }

    #[test]
    fn config_rejects_bad_widths() {
        assert!(PacketConfig::new(2, 1, DataRate::Mbps2).is_err());
        assert!(PacketConfig::new(6, 1, DataRate::Mbps2).is_err());
        assert!(PacketConfig::new(5, 0, DataRate::Mbps2).is_err());
        assert!(PacketConfig::new(5, 3, DataRate::Mbps1).is_err());
        assert!(DataRate::from_bps(250_000).is_none());
    }

    #[test]
    fn serialized_lengths() {
        let one = Packet::new(ADDR.to_vec(), vec![0x42], 0, false).unwrap();
        assert_eq!(serialize(&one, &cfg(5, 1)).unwrap().len(), 73);
        let ack = Packet::new(ADDR.to_vec(), vec![], 0, false).unwrap();
        assert_eq!(serialize(&ack, &cfg(5, 1)).unwrap().len(), 65);
        let full = Packet::new(ADDR.to_vec(), vec![0x5A; 32], 3, true).unwrap();
        assert_eq!(serialize(&full, &cfg(5, 2)).unwrap().len(), 329);
    }

    #[test]
    fn oversize_payload_rejected() {
        assert_eq!(
            Packet::new(ADDR.to_vec(), vec![0; 33], 0, false),
            Err(FrameError::InvalidPayload(33))
        );
        assert_eq!(
            Packet::new(ADDR.to_vec(), vec![], 4, false),
            Err(FrameError::InvalidPid(4))
        );
    }

    #[test]
    fn address_width_mismatch_rejected() {
        let p = Packet::new(vec![1, 2, 3], vec![1], 0, false).unwrap();
        assert!(matches!(
            serialize(&p, &cfg(5, 1)),
            Err(FrameError::AddressWidth {
                expected: 5,
                got: 3
            })
        ));
    }

    #[test]
    fn crc_of_empty_input_is_init() {
        assert_eq!(compute_crc(&[], Crc::Crc8), 0xFF);
        assert_eq!(compute_crc(&[], Crc::Crc16), 0xFFFF);
    }

    #[test]
    fn crc16_check_value() {
        // CRC-16/CCITT-FALSE catalogue check value
        let msg = Bitstring::from_bytes(b"123456789", 72).unwrap();
        assert_eq!(compute_crc(msg.bits(), Crc::Crc16), 0x29B1);
        assert_eq!(crc_long_division(msg.bits(), 0x1021, 0xFFFF, 16), 0x29B1);
    }

    #[test]
    fn crc_matches_long_division() {
        let msg = Bitstring::from_bytes(b"123456789", 72).unwrap();
        let expected8 = crc_long_division(msg.bits(), 0x07, 0xFF, 8);
        assert_eq!(compute_crc(msg.bits(), Crc::Crc8) as u32, expected8);
        // odd bit counts, including shorter than the register
        for len in [1usize, 3, 7, 9, 13, 49] {
            let m = Bitstring::from_bytes(b"\xA5\x3C\x0F\xF0\x99\x66\x12", len).unwrap();
            assert_eq!(
                compute_crc(m.bits(), Crc::Crc8) as u32,
                crc_long_division(m.bits(), 0x07, 0xFF, 8)
            );
            assert_eq!(
                compute_crc(m.bits(), Crc::Crc16) as u32,
                crc_long_division(m.bits(), 0x1021, 0xFFFF, 16)
            );
        }
    }

    #[test]
    fn truncated_input_is_malformed() {
        let bits = Bitstring::from_bits(vec![true; 40]);
        assert!(matches!(
            deserialize(&bits, &cfg(5, 1)),
            Err(FrameError::Malformed(_))
        ));
    }

    #[test]
    fn every_single_bit_flip_fails_frame_check() {
        let p = Packet::new(ADDR.to_vec(), vec![0x42], 1, false).unwrap();
        let frame = serialize(&p, &cfg(5, 1)).unwrap();
        assert_eq!(frame.len(), 73);
        for i in 0..frame.len() {
            let mut bad = frame.clone();
            bad.flip(i);
            assert_eq!(
                deserialize(&bad, &cfg(5, 1)),
                Err(FrameError::CrcFailure),
                "bit {i}"
            );
        }
    }

    #[test]
    fn inconsistent_length_field_is_malformed() {
        // hand-built frame claiming 2 payload bytes while carrying 1, with a valid CRC
        let c = cfg(5, 1);
        let mut b = Bitstring::new();
        b.push_value(PREAMBLE as u64, 8);
        b.push_bytes(&ADDR);
        b.push_value(2, 6);
        b.push_value(0, 2);
        b.push(false);
        b.push_bytes(&[0x11]);
        let crc = compute_crc(&b.bits()[8..], Crc::Crc8);
        b.push_value(crc as u64, 8);
        assert!(matches!(deserialize(&b, &c), Err(FrameError::Malformed(_))));
    }

    #[test]
    fn air_time_values() {
        let c = cfg(5, 1);
        assert!((air_time(73, &c) - 36.5e-6).abs() < 1e-15);
        assert!((air_time(65, &c) - 32.5e-6).abs() < 1e-15);
        assert_eq!(air_time(0, &c), 0.0);
        let slow = PacketConfig::new(5, 1, DataRate::Mbps1).unwrap();
        assert!((air_time(73, &slow) - 2.0 * air_time(73, &c)).abs() < 1e-15);
    }

    #[test]
    fn byte_packing_pads_last_byte() {
        let b = Bitstring::from_bits(vec![true, false, true]);
        assert_eq!(b.to_bytes(), vec![0b1010_0000]);
        assert_eq!(Bitstring::from_bytes(&b.to_bytes(), 3).unwrap(), b);
        assert!(Bitstring::from_bytes(&[0], 9).is_err());
    }

    fn arb_packet() -> impl Strategy<Value = (Packet, PacketConfig)> {
        (3u8..=5, 1u8..=2, any::<bool>()).prop_flat_map(|(aw, cw, fast)| {
            let rate = if fast {
                DataRate::Mbps2
            } else {
                DataRate::Mbps1
            };
            let config = PacketConfig::new(aw, cw, rate).unwrap();
            (
                prop::collection::vec(any::<u8>(), aw as usize),
                prop::collection::vec(any::<u8>(), 0..=MAX_PAYLOAD),
                0u8..4,
                any::<bool>(),
            )
                .prop_map(move |(a, p, pid, na)| (Packet::new(a, p, pid, na).unwrap(), config))
        })
    }

    proptest! {
        #[test]
        fn round_trip((packet, config) in arb_packet()) {
            let bits = serialize(&packet, &config).unwrap();
            prop_assert_eq!(bits.len(), config.overhead_bits() + 8 * packet.payload_len());
            let back = deserialize(&bits, &config).unwrap();
            prop_assert_eq!(&back, &packet);
            prop_assert_eq!(serialize(&back, &config).unwrap(), bits);
        }

        #[test]
        fn bytes_round_trip(bits in prop::collection::vec(any::<bool>(), 0..200)) {
            let b = Bitstring::from_bits(bits);
            prop_assert_eq!(Bitstring::from_bytes(&b.to_bytes(), b.len()).unwrap(), b);
        }
    }
}
