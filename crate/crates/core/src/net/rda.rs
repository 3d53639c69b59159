//! Brain Products Remote Data Access (RDA), 32-bit float variant.
//!
//! Every message starts with a 24-byte header: the 16-byte RDA GUID, the
//! total message size (u32, header included) and the message type (u32).
//! All fields are little-endian.
//!
//! | type | body |
//! |------|------|
//! | 1 Start | u32 channels, f64 sampling interval (µs), f64 resolution × channels, NUL-terminated channel names |
//! | 4 Data | u32 block, u32 points, u32 marker count, f32 × points × channels, markers |
//! | 3 Stop | empty |
//!
//! A marker is u32 size (including strings), u32 position, u32 points,
//! i32 channel (-1 = all), then `type\0description\0`.

use std::io::{ErrorKind, Read};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::PipelineClock;
use crate::net::queue::{DropOldestQueue, DEFAULT_QUEUE_CAPACITY};
use crate::types::{channel_names, ChannelNames, Chunk, MarkerEvent, SamplingRate};

pub const RDA_GUID: [u8; 16] =
    [0x8E, 0x45, 0x58, 0x43, 0x96, 0xC9, 0x86, 0x4C, 0xAF, 0x4A, 0x98, 0xBB, 0xF6, 0xC9, 0x14, 0x50];
pub const HEADER_LEN: usize = 24;
pub const TYPE_START: u32 = 1;
pub const TYPE_STOP: u32 = 3;
pub const TYPE_DATA_FLOAT: u32 = 4;
/// Default port of the float variant.
pub const DEFAULT_PORT: u16 = 51244;

#[derive(Debug, Clone, PartialEq)]
pub struct RdaStart {
    pub sampling_interval_us: f64,
    pub resolutions: Vec<f64>,
    pub channel_names: Vec<String>,
}

impl RdaStart {
    pub fn channel_count(&self) -> usize {
        self.channel_names.len()
    }

    pub fn fs(&self) -> f64 {
        1e6 / self.sampling_interval_us
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdaMarker {
    /// Sample index relative to the block.
    pub position: u32,
    pub points: u32,
    pub channel: i32,
    pub kind: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdaData {
    pub block: u32,
    pub points: usize,
    /// points × channels, row-major.
    pub samples: Vec<f32>,
    pub markers: Vec<RdaMarker>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RdaMessage {
    Start(RdaStart),
    Data(RdaData),
    Stop,
    /// A valid message of a type this client does not handle.
    Unknown(u32),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
    total: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::Truncated { expected: self.total.max(self.at + n), got: self.bytes.len() });
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn cstr(&mut self, limit: usize) -> Result<String> {
        let rest = &self.bytes[self.at..limit.min(self.bytes.len())];
        let end = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| Error::InconsistentHeader("unterminated string".into()))?;
        let s = String::from_utf8_lossy(&rest[..end]).into_owned();
        self.at += end + 1;
        Ok(s)
    }
}

/// Size and type from a 24-byte header.
pub fn decode_header(bytes: &[u8]) -> Result<(usize, u32)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated { expected: HEADER_LEN, got: bytes.len() });
    }
    if bytes[..16] != RDA_GUID {
        return Err(Error::BadGuid);
    }
    let size = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let kind = u32::from_le_bytes(bytes[20..24].try_into().unwrap());
    if size < HEADER_LEN {
        return Err(Error::InconsistentHeader(format!("message size {size} is smaller than the header")));
    }
    Ok((size, kind))
}

/// Decodes one complete message. Data messages need the channel count of
/// the preceding Start.
pub fn rda_decode(bytes: &[u8], channels: Option<usize>) -> Result<RdaMessage> {
    let (size, kind) = decode_header(bytes)?;
    if bytes.len() < size {
        return Err(Error::Truncated { expected: size, got: bytes.len() });
    }
    let mut c = Cursor { bytes: &bytes[..size], at: HEADER_LEN, total: size };
    match kind {
        TYPE_START => {
            let n = c.u32()? as usize;
            let interval = c.f64()?;
            if !(interval > 0.0) {
                return Err(Error::InconsistentHeader(format!("sampling interval {interval} µs")));
            }
            if n == 0 || HEADER_LEN + 12 + 8 * n > size {
                return Err(Error::InconsistentHeader(format!("{n} channels do not fit in {size} bytes")));
            }
            let resolutions = (0..n).map(|_| c.f64()).collect::<Result<_>>()?;
            let names = (0..n).map(|_| c.cstr(size)).collect::<Result<_>>()?;
            Ok(RdaMessage::Start(RdaStart { sampling_interval_us: interval, resolutions, channel_names: names }))
        }
        TYPE_DATA_FLOAT => {
            let ch = channels.ok_or_else(|| Error::InconsistentHeader("data before start".into()))?;
            let block = c.u32()?;
            let points = c.u32()? as usize;
            let n_markers = c.u32()?;
            if HEADER_LEN + 12 + 4 * points * ch > size {
                return Err(Error::InconsistentHeader(format!(
                    "{points} points × {ch} channels do not fit in {size} bytes"
                )));
            }
            let samples = c
                .take(4 * points * ch)?
                .chunks_exact(4)
                .map(|w| f32::from_le_bytes(w.try_into().unwrap()))
                .collect();
            let mut markers = Vec::with_capacity(n_markers as usize);
            for _ in 0..n_markers {
                let start = c.at;
                let msize = c.u32()? as usize;
                let end = start + msize;
                if msize < 16 || end > size {
                    return Err(Error::InconsistentHeader(format!("marker size {msize}")));
                }
                let position = c.u32()?;
                let mpoints = c.u32()?;
                let channel = c.i32()?;
                let kind = c.cstr(end)?;
                let description = c.cstr(end)?;
                c.at = end;
                markers.push(RdaMarker { position, points: mpoints, channel, kind, description });
            }
            Ok(RdaMessage::Data(RdaData { block, points, samples, markers }))
        }
        TYPE_STOP => Ok(RdaMessage::Stop),
        other => Ok(RdaMessage::Unknown(other)),
    }
}

fn header(size: usize, kind: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(&RDA_GUID);
    out.extend_from_slice(&(size as u32).to_le_bytes());
    out.extend_from_slice(&kind.to_le_bytes());
    out
}

/// Encoders, used by simulators and test servers.
pub fn encode_start(start: &RdaStart) -> Vec<u8> {
    let names: usize = start.channel_names.iter().map(|n| n.len() + 1).sum();
    let size = HEADER_LEN + 12 + 8 * start.resolutions.len() + names;
    let mut out = header(size, TYPE_START);
    out.extend_from_slice(&(start.channel_names.len() as u32).to_le_bytes());
    out.extend_from_slice(&start.sampling_interval_us.to_le_bytes());
    for r in &start.resolutions {
        out.extend_from_slice(&r.to_le_bytes());
    }
    for n in &start.channel_names {
        out.extend_from_slice(n.as_bytes());
        out.push(0);
    }
    out
}

pub fn encode_data(data: &RdaData) -> Vec<u8> {
    let marker_len = |m: &RdaMarker| 16 + m.kind.len() + 1 + m.description.len() + 1;
    let size = HEADER_LEN + 12 + 4 * data.samples.len() + data.markers.iter().map(marker_len).sum::<usize>();
    let mut out = header(size, TYPE_DATA_FLOAT);
    out.extend_from_slice(&data.block.to_le_bytes());
    out.extend_from_slice(&(data.points as u32).to_le_bytes());
    out.extend_from_slice(&(data.markers.len() as u32).to_le_bytes());
    for v in &data.samples {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for m in &data.markers {
        out.extend_from_slice(&(marker_len(m) as u32).to_le_bytes());
        out.extend_from_slice(&m.position.to_le_bytes());
        out.extend_from_slice(&m.points.to_le_bytes());
        out.extend_from_slice(&m.channel.to_le_bytes());
        for s in [&m.kind, &m.description] {
            out.extend_from_slice(s.as_bytes());
            out.push(0);
        }
    }
    out
}

pub fn encode_stop() -> Vec<u8> {
    header(HEADER_LEN, TYPE_STOP)
}

/// Turns Data blocks of one session into chunks and markers.
#[derive(Debug, Clone)]
pub struct RdaSession {
    start: RdaStart,
    names: ChannelNames,
    origin: f64,
    offset: f64,
    samples_seen: u64,
}

impl RdaSession {
    /// `origin` is the pipeline time of the first sample; `offset` is
    /// subtracted from every timestamp.
    pub fn new(start: RdaStart, origin: f64, offset: f64) -> Self {
        let names = channel_names(start.channel_names.iter().cloned());
        RdaSession { start, names, origin, offset, samples_seen: 0 }
    }

    pub fn start(&self) -> &RdaStart {
        &self.start
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    fn time_of(&self, index: u64) -> f64 {
        self.origin + index as f64 / self.start.fs() - self.offset
    }

    pub fn convert(&mut self, data: &RdaData) -> Result<(Chunk, Vec<MarkerEvent>)> {
        let ch = self.start.channel_count();
        if data.samples.len() != data.points * ch {
            return Err(Error::InconsistentHeader(format!(
                "{} values for {} points × {ch} channels",
                data.samples.len(),
                data.points
            )));
        }
        let values = Array2::from_shape_fn((data.points, ch), |(r, c)| {
            data.samples[r * ch + c] as f64 * self.start.resolutions[c]
        });
        let first = self.samples_seen;
        let timestamps = (0..data.points as u64).map(|i| self.time_of(first + i)).collect();
        let chunk = Chunk::new(timestamps, self.names.clone(), values, SamplingRate::Regular(self.start.fs()))?;
        let markers = data
            .markers
            .iter()
            .filter_map(|m| {
                let label = if m.description.is_empty() { m.kind.clone() } else { m.description.clone() };
                let code = MarkerEvent::code_from_label(&label);
                MarkerEvent::new(self.time_of(first + m.position as u64), label, code).ok()
            })
            .collect();
        self.samples_seen += data.points as u64;
        Ok((chunk, markers))
    }
}

#[derive(Debug, Clone)]
pub struct RdaClientConfig {
    pub host: String,
    pub port: u16,
    pub offset: f64,
    /// Connection attempts after the first failure before giving up.
    pub max_retries: u32,
    pub backoff: Duration,
    pub queue_capacity: usize,
}

impl Default for RdaClientConfig {
    fn default() -> Self {
        RdaClientConfig {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            offset: 0.0,
            max_retries: 3,
            backoff: Duration::from_millis(100),
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RdaEvent {
    Chunk(Chunk),
    Marker(MarkerEvent),
    /// The session stopped or the server stayed unreachable.
    Ended,
    /// Malformed data; the node should fail.
    Failed(String),
}

#[derive(Debug, Default)]
pub struct RdaCounters {
    pub blocks: AtomicU64,
    pub unknown_messages: AtomicU64,
    pub connect_failures: AtomicU64,
}

/// Background reader feeding a bounded queue.
pub struct RdaClient {
    queue: Arc<DropOldestQueue<RdaEvent>>,
    stop: Arc<AtomicBool>,
    counters: Arc<RdaCounters>,
    handle: Option<JoinHandle<()>>,
}

enum ReadEnd {
    Stopped,
    Disconnected(String),
    Failed(String),
    Interrupted,
}

fn read_full(stream: &mut TcpStream, buf: &mut [u8], stop: &AtomicBool) -> std::result::Result<(), ReadEnd> {
    let mut got = 0;
    while got < buf.len() {
        if stop.load(Ordering::Relaxed) {
            return Err(ReadEnd::Interrupted);
        }
        match stream.read(&mut buf[got..]) {
            Ok(0) => return Err(ReadEnd::Disconnected("connection closed by server".into())),
            Ok(n) => got += n,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {}
            Err(e) => return Err(ReadEnd::Disconnected(e.to_string())),
        }
    }
    Ok(())
}

impl RdaClient {
    pub fn spawn(config: RdaClientConfig, clock: Arc<PipelineClock>) -> RdaClient {
        let queue = DropOldestQueue::new(config.queue_capacity);
        let stop = Arc::new(AtomicBool::new(false));
        let counters = Arc::new(RdaCounters::default());
        let (q, s, k) = (queue.clone(), stop.clone(), counters.clone());
        let handle = std::thread::Builder::new()
            .name("rda-client".into())
            .spawn(move || client_loop(config, clock, &q, &s, &k))
            .expect("spawn RDA client thread");
        RdaClient { queue, stop, counters, handle: Some(handle) }
    }

    pub fn queue(&self) -> &Arc<DropOldestQueue<RdaEvent>> {
        &self.queue
    }

    pub fn counters(&self) -> &RdaCounters {
        &self.counters
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for RdaClient {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn connect(config: &RdaClientConfig) -> std::io::Result<TcpStream> {
    let addr = (config.host.as_str(), config.port)
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| std::io::Error::new(ErrorKind::NotFound, "host did not resolve"))?;
    let stream = TcpStream::connect_timeout(&addr, Duration::from_secs(1))?;
    stream.set_read_timeout(Some(Duration::from_millis(100)))?;
    Ok(stream)
}

fn client_loop(
    config: RdaClientConfig,
    clock: Arc<PipelineClock>,
    queue: &DropOldestQueue<RdaEvent>,
    stop: &AtomicBool,
    counters: &RdaCounters,
) {
    let mut failures = 0u32;
    loop {
        if stop.load(Ordering::Relaxed) {
            return;
        }
        let mut stream = match connect(&config) {
            Ok(s) => s,
            Err(e) => {
                counters.connect_failures.fetch_add(1, Ordering::Relaxed);
                if failures >= config.max_retries {
                    log::warn!("RDA {}:{} unreachable ({e}); stopping", config.host, config.port);
                    queue.push(RdaEvent::Ended);
                    return;
                }
                std::thread::sleep(config.backoff * 2u32.pow(failures.min(16)));
                failures += 1;
                continue;
            }
        };
        match session(&mut stream, &config, &clock, queue, stop, counters) {
            ReadEnd::Stopped => {
                queue.push(RdaEvent::Ended);
                return;
            }
            ReadEnd::Interrupted => return,
            ReadEnd::Failed(msg) => {
                queue.push(RdaEvent::Failed(msg));
                return;
            }
            ReadEnd::Disconnected(msg) => {
                log::warn!("RDA connection lost: {msg}; reconnecting");
                counters.connect_failures.fetch_add(1, Ordering::Relaxed);
                if failures >= config.max_retries {
                    queue.push(RdaEvent::Ended);
                    return;
                }
                std::thread::sleep(config.backoff * 2u32.pow(failures.min(16)));
                failures += 1;
            }
        }
    }
}

fn session(
    stream: &mut TcpStream,
    config: &RdaClientConfig,
    clock: &PipelineClock,
    queue: &DropOldestQueue<RdaEvent>,
    stop: &AtomicBool,
    counters: &RdaCounters,
) -> ReadEnd {
    let mut state: Option<RdaSession> = None;
    let mut buf = vec![0u8; HEADER_LEN];
    loop {
        buf.resize(HEADER_LEN, 0);
        if let Err(end) = read_full(stream, &mut buf, stop) {
            return end;
        }
        let size = match decode_header(&buf) {
            Ok((size, _)) => size,
            Err(e) => return ReadEnd::Failed(e.to_string()),
        };
        buf.resize(size, 0);
        if let Err(end) = read_full(stream, &mut buf[HEADER_LEN..], stop) {
            return end;
        }
        let channels = state.as_ref().map(|s| s.start().channel_count());
        match rda_decode(&buf, channels) {
            Ok(RdaMessage::Start(start)) => {
                state = Some(RdaSession::new(start, clock.now(), config.offset));
            }
            Ok(RdaMessage::Data(data)) => {
                let Some(s) = state.as_mut() else {
                    return ReadEnd::Failed("data before start".into());
                };
                match s.convert(&data) {
                    Ok((chunk, markers)) => {
                        counters.blocks.fetch_add(1, Ordering::Relaxed);
                        queue.push(RdaEvent::Chunk(chunk));
                        markers.into_iter().for_each(|m| queue.push(RdaEvent::Marker(m)));
                    }
                    Err(e) => return ReadEnd::Failed(e.to_string()),
                }
            }
            Ok(RdaMessage::Stop) => return ReadEnd::Stopped,
            Ok(RdaMessage::Unknown(kind)) => {
                log::debug!("skipping RDA message type {kind}");
                counters.unknown_messages.fetch_add(1, Ordering::Relaxed);
            }
            Err(e) => return ReadEnd::Failed(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_guid_and_truncation() {
        let mut stop = encode_stop();
        assert_eq!(rda_decode(&stop, None).unwrap(), RdaMessage::Stop);
        let start = encode_start(&RdaStart {
            sampling_interval_us: 2000.0,
            resolutions: vec![0.1],
            channel_names: vec!["C3".into()],
        });
        assert!(matches!(rda_decode(&start[..30], None), Err(Error::Truncated { .. })));
        stop[0] ^= 0xFF;
        assert!(matches!(rda_decode(&stop, None), Err(Error::BadGuid)));
    }
}
