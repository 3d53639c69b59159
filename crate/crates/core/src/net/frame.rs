//! NxFrame: a small length-implicit frame carrying one signal block or one
//! marker.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "NXS1"
//! 4       16    stream id
//! 20      8     seq (u64)
//! 28      1     kind (1 signal, 2 marker)
//! 29      8     timestamp (f64 seconds)
//! 37            payload
//!   signal: u16 channels, u16 samples, f32 × channels × samples (row-major)
//!   marker: u16 label length, UTF-8 label, i32 code (i32::MIN = absent)
//! ```
//!
//! All fields little-endian.

use crate::error::{Error, Result};
use crate::types::{ChannelNames, Chunk, MarkerEvent, SamplingRate};

pub const MAGIC: &[u8; 4] = b"NXS1";
pub const HEADER_LEN: usize = 37;
pub const KIND_SIGNAL: u8 = 1;
pub const KIND_MARKER: u8 = 2;
/// Code value meaning "no code".
pub const NO_CODE: i32 = i32::MIN;
/// Largest datagram the UDP sender emits.
pub const MAX_UDP_PAYLOAD: usize = 1400;

pub type StreamId = [u8; 16];

/// Samples as carried on the wire: row-major f32, stamped with the time of
/// the first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBlock {
    pub timestamp: f64,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl SignalBlock {
    pub fn samples(&self) -> usize {
        self.data.len().checked_div(self.channels).unwrap_or(0)
    }

    /// Narrows samples to f32.
    pub fn from_chunk(chunk: &Chunk) -> Result<Self> {
        if chunk.is_empty() {
            return Err(Error::InvalidChunk("cannot frame an empty chunk".into()));
        }
        Ok(SignalBlock {
            timestamp: chunk.timestamps()[0],
            channels: chunk.channel_count(),
            data: chunk.data().iter().map(|&v| v as f32).collect(),
        })
    }

    /// Rebuilds a chunk on the regular grid `timestamp + i / fs`.
    pub fn to_chunk(&self, fs: f64, names: ChannelNames) -> Result<Chunk> {
        if names.len() != self.channels {
            return Err(Error::ChannelCountChanged { expected: names.len(), got: self.channels });
        }
        let n = self.samples();
        let data = ndarray::Array2::from_shape_fn((n, self.channels), |(r, c)| self.data[r * self.channels + c] as f64);
        let timestamps = (0..n).map(|i| self.timestamp + i as f64 / fs).collect();
        Chunk::new(timestamps, names, data, SamplingRate::Regular(fs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WireItem {
    Signal(SignalBlock),
    Marker(MarkerEvent),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub stream_id: StreamId,
    pub seq: u64,
    pub item: WireItem,
}

pub fn frame_encode(item: &WireItem, stream_id: &StreamId, seq: u64) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(stream_id);
    out.extend_from_slice(&seq.to_le_bytes());
    match item {
        WireItem::Signal(b) => {
            let samples = b.samples();
            if b.channels == 0 || b.channels > u16::MAX as usize || samples > u16::MAX as usize {
                return Err(Error::Oversize(format!("{} channels × {samples} samples", b.channels)));
            }
            if b.data.len() != b.channels * samples {
                return Err(Error::InvalidChunk("signal block length is not a multiple of channels".into()));
            }
            out.push(KIND_SIGNAL);
            out.extend_from_slice(&b.timestamp.to_le_bytes());
            out.extend_from_slice(&(b.channels as u16).to_le_bytes());
            out.extend_from_slice(&(samples as u16).to_le_bytes());
            for v in &b.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        WireItem::Marker(m) => {
            let label = m.label.as_bytes();
            if label.len() > u16::MAX as usize {
                return Err(Error::Oversize(format!("marker label of {} bytes", label.len())));
            }
            out.push(KIND_MARKER);
            out.extend_from_slice(&m.timestamp.to_le_bytes());
            out.extend_from_slice(&(label.len() as u16).to_le_bytes());
            out.extend_from_slice(label);
            out.extend_from_slice(&m.code.unwrap_or(NO_CODE).to_le_bytes());
        }
    }
    Ok(out)
}

fn need(bytes: &[u8], n: usize) -> Result<()> {
    if bytes.len() < n {
        Err(Error::Truncated { expected: n, got: bytes.len() })
    } else {
        Ok(())
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

/// Total frame length implied by the bytes seen so far, or `None` if more
/// bytes are needed to tell.
pub fn frame_len(prefix: &[u8]) -> Result<Option<usize>> {
    if prefix.len() >= 4 && &prefix[..4] != MAGIC {
        return Err(Error::BadMagic { expected: "NXS1" });
    }
    if prefix.len() < HEADER_LEN + 4 {
        return Ok(None);
    }
    match prefix[28] {
        KIND_SIGNAL => {
            let ch = u16_at(prefix, HEADER_LEN) as usize;
            let n = u16_at(prefix, HEADER_LEN + 2) as usize;
            Ok(Some(HEADER_LEN + 4 + 4 * ch * n))
        }
        KIND_MARKER => Ok(Some(HEADER_LEN + 2 + u16_at(prefix, HEADER_LEN) as usize + 4)),
        k => Err(Error::Protocol(format!("unknown frame kind {k}"))),
    }
}

pub fn frame_decode(bytes: &[u8]) -> Result<Frame> {
    need(bytes, 4)?;
    let total = match frame_len(bytes)? {
        Some(t) => t,
        None => return Err(Error::Truncated { expected: HEADER_LEN + 4, got: bytes.len() }),
    };
    need(bytes, total)?;
    if bytes.len() > total {
        return Err(Error::InconsistentHeader(format!("{} trailing bytes after frame", bytes.len() - total)));
    }
    let mut stream_id = [0u8; 16];
    stream_id.copy_from_slice(&bytes[4..20]);
    let seq = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let timestamp = f64::from_le_bytes(bytes[29..37].try_into().unwrap());
    let item = match bytes[28] {
        KIND_SIGNAL => {
            let channels = u16_at(bytes, HEADER_LEN) as usize;
            let data = bytes[HEADER_LEN + 4..total]
                .chunks_exact(4)
                .map(|w| f32::from_le_bytes(w.try_into().unwrap()))
                .collect();
            WireItem::Signal(SignalBlock { timestamp, channels, data })
        }
        _ => {
            let len = u16_at(bytes, HEADER_LEN) as usize;
            let label = std::str::from_utf8(&bytes[HEADER_LEN + 2..HEADER_LEN + 2 + len])
                .map_err(|e| Error::Protocol(format!("marker label is not UTF-8: {e}")))?;
            let code = i32::from_le_bytes(bytes[total - 4..total].try_into().unwrap());
            let marker = MarkerEvent::new(timestamp, label, (code != NO_CODE).then_some(code))
                .map_err(|e| Error::Protocol(e.to_string()))?;
            WireItem::Marker(marker)
        }
    };
    Ok(Frame { stream_id, seq, item })
}

/// Splits a chunk into blocks whose encoded frames fit in `max_frame`
/// bytes. Each block is stamped with its first sample's timestamp.
pub fn split_chunk(chunk: &Chunk, max_frame: usize) -> Result<Vec<SignalBlock>> {
    let ch = chunk.channel_count();
    let room = max_frame.saturating_sub(HEADER_LEN + 4);
    let per = (room / (4 * ch.max(1))).min(u16::MAX as usize);
    if per == 0 {
        return Err(Error::Oversize(format!("one sample of {ch} channels exceeds {max_frame} bytes")));
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < chunk.len() {
        let end = (start + per).min(chunk.len());
        out.push(SignalBlock::from_chunk(&chunk.slice(start, end))?);
        start = end;
    }
    Ok(out)
}
