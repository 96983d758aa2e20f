//! Little-endian framing for external segmenters over stdin/stdout.
//!
//! ```text
//! HELLO     "FMOS" u32 version
//! REQUEST   "FMOW" u32 H, u32 W, u32 C=15, H·W·C f32
//! RESPONSE  "FMOM" u32 H, u32 W, u32 C=1,  H·W f32 in [0, 1]
//! ```

use std::io::{Read, Write};

use thiserror::Error;

pub const VERSION: u32 = 1;
pub const HELLO_MAGIC: [u8; 4] = *b"FMOS";
pub const REQUEST_MAGIC: [u8; 4] = *b"FMOW";
pub const RESPONSE_MAGIC: [u8; 4] = *b"FMOM";
pub const REQUEST_CHANNELS: u32 = 15;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("unexpected magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("dimension mismatch: expected {expected:?}, got {found:?}")]
    Dimensions { expected: (u32, u32, u32), found: (u32, u32, u32) },
    #[error("mask value {0} outside [0, 1]")]
    OutOfRange(f32),
    #[error("no response within {0:?}")]
    Timeout(std::time::Duration),
    #[error("segmenter process exited: {0}")]
    Exited(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A decoded frame: `(h, w, c)` and the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

pub fn write_hello(out: &mut impl Write) -> Result<(), ProtocolError> {
    out.write_all(&HELLO_MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn read_hello(input: &mut impl Read) -> Result<u32, ProtocolError> {
    expect_magic(input, HELLO_MAGIC)?;
    let v = read_u32(input)?;
    if v != VERSION {
        return Err(ProtocolError::Version(v));
    }
    Ok(v)
}

/// Full request bytes for a `height`×`width` 15-channel stack.
pub fn encode_request(height: u32, width: u32, data: &[f32]) -> Result<Vec<u8>, ProtocolError> {
    encode(REQUEST_MAGIC, height, width, REQUEST_CHANNELS, data)
}

pub fn encode_response(height: u32, width: u32, data: &[f32]) -> Result<Vec<u8>, ProtocolError> {
    encode(RESPONSE_MAGIC, height, width, 1, data)
}

fn encode(magic: [u8; 4], h: u32, w: u32, c: u32, data: &[f32]) -> Result<Vec<u8>, ProtocolError> {
    let n = h as usize * w as usize * c as usize;
    if data.len() != n {
        return Err(ProtocolError::Dimensions { expected: (h, w, c), found: (h, w, (data.len() / (h as usize * w as usize).max(1)) as u32) });
    }
    let mut buf = Vec::with_capacity(16 + 4 * n);
    buf.extend_from_slice(&magic);
    for v in [h, w, c] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn read_request(input: &mut impl Read) -> Result<Tensor, ProtocolError> {
    let t = read_tensor(input, REQUEST_MAGIC)?;
    if t.channels != REQUEST_CHANNELS {
        return Err(ProtocolError::Dimensions { expected: (t.height, t.width, REQUEST_CHANNELS), found: (t.height, t.width, t.channels) });
    }
    Ok(t)
}

/// Reads a response and checks it against the request's `(h, w)`.
pub fn read_response(input: &mut impl Read, height: u32, width: u32) -> Result<Tensor, ProtocolError> {
    let t = read_response_any(input)?;
    check_response(&t, height, width)?;
    Ok(t)
}

/// Reads a response frame without checking its shape or values.
pub fn read_response_any(input: &mut impl Read) -> Result<Tensor, ProtocolError> {
    read_tensor(input, RESPONSE_MAGIC)
}

pub fn check_response(t: &Tensor, height: u32, width: u32) -> Result<(), ProtocolError> {
    if (t.height, t.width, t.channels) != (height, width, 1) {
        return Err(ProtocolError::Dimensions { expected: (height, width, 1), found: (t.height, t.width, t.channels) });
    }
    if let Some(&v) = t.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ProtocolError::OutOfRange(v));
    }
    Ok(())
}

fn read_tensor(input: &mut impl Read, magic: [u8; 4]) -> Result<Tensor, ProtocolError> {
    expect_magic(input, magic)?;
    let height = read_u32(input)?;
    let width = read_u32(input)?;
    let channels = read_u32(input)?;
    let n = height as usize * width as usize * channels as usize;
    let mut bytes = vec![0u8; 4 * n];
    input.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    Ok(Tensor { height, width, channels, data })
}

fn expect_magic(input: &mut impl Read, expected: [u8; 4]) -> Result<(), ProtocolError> {
    let mut found = [0u8; 4];
    input.read_exact(&mut found)?;
    if found != expected {
        return Err(ProtocolError::BadMagic { expected, found });
    }
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32, ProtocolError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
