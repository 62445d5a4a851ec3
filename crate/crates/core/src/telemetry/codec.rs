use crc::{Crc, CRC_16_IBM_3740};
use thiserror::Error;

use super::message::{Message, MsgType};
use super::{ENVELOPE_OVERHEAD, MAX_PAYLOAD, SYNC};

/// CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection, no xorout),
/// catalogued as CRC-16/IBM-3740.
const CCITT_FALSE: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub fn crc16(bytes: &[u8]) -> u16 {
    CCITT_FALSE.checksum(bytes)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("field `{field}` value {value} is outside its encodable range")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("payload of {0} bytes exceeds the 64-byte limit")]
    PayloadTooLarge(usize),
}

/// Wraps a raw payload in the wire envelope.
pub fn encode_envelope(msg_type: u8, payload: &[u8]) -> Result<Vec<u8>, EncodeError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(EncodeError::PayloadTooLarge(payload.len()));
    }
    let mut out = Vec::with_capacity(payload.len() + ENVELOPE_OVERHEAD);
    out.extend_from_slice(&SYNC);
    out.push(payload.len() as u8);
    out.push(msg_type);
    out.extend_from_slice(payload);
    let crc = crc16(&out[2..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, EncodeError> {
    encode_envelope(msg.msg_type() as u8, &msg.payload()?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeErrorKind {
    /// Bytes skipped while hunting for a sync pattern.
    Garbage {
        len: usize,
    },
    /// Length byte above the payload limit; treated as a false sync.
    BadLength(u8),
    CrcMismatch {
        expected: u16,
        actual: u16,
    },
    UnknownMsgType(u8),
    /// CRC was valid but the payload did not parse.
    BadPayload(String),
}

/// A per-frame decoding problem. `offset` is relative to the start of the
/// buffer handed to the decoder, including any carried-over remainder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeError {
    pub offset: usize,
    pub kind: DecodeErrorKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecodeOutput {
    pub messages: Vec<Message>,
    /// Trailing bytes of a frame that has not fully arrived yet.
    pub remainder: Vec<u8>,
    pub errors: Vec<DecodeError>,
}

/// Decodes every complete frame in `buffer`.
///
/// Scanning resynchronizes on `AA 55`. A frame with a bad length or CRC is
/// reported and scanning resumes one byte after its sync; a frame whose CRC
/// checks but whose type or payload is invalid is reported and skipped whole.
pub fn decode_stream(buffer: &[u8]) -> DecodeOutput {
    let mut out = DecodeOutput::default();
    let mut garbage_start: Option<usize> = None;
    let mut i = 0;
    let n = buffer.len();

    let flush_garbage = |start: &mut Option<usize>, end: usize, errors: &mut Vec<DecodeError>| {
        if let Some(s) = start.take() {
            errors.push(DecodeError {
                offset: s,
                kind: DecodeErrorKind::Garbage { len: end - s },
            });
        }
    };

    while i < n {
        let at_sync = buffer[i] == SYNC[0] && (i + 1 == n || buffer[i + 1] == SYNC[1]);
        if !at_sync {
            garbage_start.get_or_insert(i);
            i += 1;
            continue;
        }
        flush_garbage(&mut garbage_start, i, &mut out.errors);
        if n - i < 4 {
            out.remainder = buffer[i..].to_vec();
            return out;
        }
        let len = buffer[i + 2];
        if len as usize > MAX_PAYLOAD {
            out.errors.push(DecodeError {
                offset: i,
                kind: DecodeErrorKind::BadLength(len),
            });
            garbage_start = Some(i + 1);
            i += 1;
            continue;
        }
        let total = len as usize + ENVELOPE_OVERHEAD;
        if n - i < total {
            out.remainder = buffer[i..].to_vec();
            return out;
        }
        let body = &buffer[i + 2..i + total - 2];
        let expected = crc16(body);
        let actual = u16::from_le_bytes([buffer[i + total - 2], buffer[i + total - 1]]);
        if expected != actual {
            out.errors.push(DecodeError {
                offset: i,
                kind: DecodeErrorKind::CrcMismatch { expected, actual },
            });
            garbage_start = Some(i + 1);
            i += 1;
            continue;
        }
        let type_byte = body[1];
        let payload = &body[2..];
        match MsgType::from_u8(type_byte) {
            None => out.errors.push(DecodeError {
                offset: i,
                kind: DecodeErrorKind::UnknownMsgType(type_byte),
            }),
            Some(t) => match Message::parse(t, payload) {
                Ok(m) => out.messages.push(m),
                Err(e) => out.errors.push(DecodeError {
                    offset: i,
                    kind: DecodeErrorKind::BadPayload(e),
                }),
            },
        }
        i += total;
    }
    flush_garbage(&mut garbage_start, n, &mut out.errors);
    out
}

/// Incremental decoder for a byte stream delivered in arbitrary chunks.
///
/// The carried-over remainder never exceeds one maximum-size frame.
#[derive(Debug, Default, Clone)]
pub struct StreamDecoder {
    pending: Vec<u8>,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) -> DecodeOutput {
        self.pending.extend_from_slice(bytes);
        let mut out = decode_stream(&self.pending);
        self.pending = std::mem::take(&mut out.remainder);
        out
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }
}
