//! The emulated tether.
//!
//! Wire envelope, all multi-byte integers little-endian:
//!
//! ```text
//! 0xAA 0x55 | len: u8 | msg_type: u8 | payload[len] | crc: u16
//! ```
//!
//! The CRC is CRC-16/CCITT-FALSE over `len`, `msg_type` and the payload, in
//! wire order. Payloads are at most [`MAX_PAYLOAD`] bytes.

mod codec;
mod fixed;
pub mod json;
pub mod link;
mod message;

pub use codec::{
    crc16, decode_stream, encode_envelope, encode_frame, DecodeError, DecodeErrorKind,
    DecodeOutput, EncodeError, StreamDecoder,
};
pub use fixed::{CENTI, MILLI, PER_MILLE};
pub use message::{Command, CommandMessage, Flags, Gains, Message, MsgType, TelemetryFrame};

pub const SYNC: [u8; 2] = [0xAA, 0x55];
pub const MAX_PAYLOAD: usize = 64;
/// Sync, length, type and CRC.
pub const ENVELOPE_OVERHEAD: usize = 6;
