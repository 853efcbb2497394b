//! Simulation and planning toolkit for a low-power 2.4 GHz sensor node built
//! around an Enhanced ShockBurst transceiver: bit-exact frames, the radio mode
//! machine, link budget and bit errors, the ACK/retransmit link layer, a
//! duty-cycle battery model and a deterministic discrete-event harness.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod energy;
pub mod error;
pub mod packet;
pub mod radio;
pub mod shockburst;
pub mod sim;

pub use error::{Error, FrameError, Result};
pub use packet::{deserialize, serialize, Bitstring, Packet, PacketConfig};
