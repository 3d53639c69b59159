//! NxFrame senders and receivers over UDP and TCP.

use std::collections::HashMap;
use std::io::{ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs, UdpSocket};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::net::frame::{frame_decode, frame_encode, frame_len, split_chunk, Frame, StreamId, WireItem, MAX_UDP_PAYLOAD};
use crate::net::queue::DropOldestQueue;
use crate::types::{Chunk, MarkerEvent};

const POLL: Duration = Duration::from_millis(50);
/// Largest TCP frame: u16 sample count is the only limit, keep frames modest.
const MAX_TCP_FRAME: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Udp,
    Tcp,
}

impl FromStr for Transport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "udp" => Ok(Transport::Udp),
            "tcp" => Ok(Transport::Tcp),
            other => Err(Error::Schema(format!("unknown transport '{other}' (udp|tcp)"))),
        }
    }
}

fn resolve(address: &str) -> Result<SocketAddr> {
    address
        .to_socket_addrs()
        .map_err(|e| Error::ConnectFailed(format!("{address}: {e}")))?
        .next()
        .ok_or_else(|| Error::ConnectFailed(format!("{address} did not resolve")))
}

enum Link {
    Udp(UdpSocket),
    Tcp { stream: Option<TcpStream>, last_attempt: Option<Instant> },
}

/// Best-effort synchronous sender. Send failures are counted, not raised.
pub struct FrameSender {
    link: Link,
    target: SocketAddr,
    stream_id: StreamId,
    seq: u64,
    sent: u64,
    errors: u64,
}

impl FrameSender {
    pub fn connect(transport: Transport, address: &str, stream_id: StreamId) -> Result<Self> {
        let target = resolve(address)?;
        let link = match transport {
            Transport::Udp => {
                let local: SocketAddr = if target.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().unwrap();
                let sock = UdpSocket::bind(local)?;
                sock.set_nonblocking(true)?;
                Link::Udp(sock)
            }
            Transport::Tcp => Link::Tcp { stream: None, last_attempt: None },
        };
        Ok(FrameSender { link, target, stream_id, seq: 0, sent: 0, errors: 0 })
    }

    pub fn frames_sent(&self) -> u64 {
        self.sent
    }

    pub fn send_errors(&self) -> u64 {
        self.errors
    }

    fn write(&mut self, bytes: &[u8]) {
        let ok = match &mut self.link {
            Link::Udp(sock) => sock.send_to(bytes, self.target).is_ok(),
            Link::Tcp { stream, last_attempt } => {
                if stream.is_none() && last_attempt.is_none_or(|t| t.elapsed() > Duration::from_secs(1)) {
                    *last_attempt = Some(Instant::now());
                    *stream = TcpStream::connect_timeout(&self.target, Duration::from_millis(200)).ok();
                    if let Some(s) = stream.as_ref() {
                        let _ = s.set_nodelay(true);
                    }
                }
                match stream.as_mut().map(|s| s.write_all(bytes)) {
                    Some(Ok(())) => true,
                    Some(Err(_)) => {
                        *stream = None;
                        false
                    }
                    None => false,
                }
            }
        };
        if ok {
            self.sent += 1;
        } else {
            self.errors += 1;
        }
    }

    pub fn send(&mut self, item: &WireItem) -> Result<()> {
        let bytes = frame_encode(item, &self.stream_id, self.seq)?;
        self.seq += 1;
        self.write(&bytes);
        Ok(())
    }

    /// Splits as needed so UDP datagrams stay within [`MAX_UDP_PAYLOAD`].
    pub fn send_chunk(&mut self, chunk: &Chunk) -> Result<()> {
        if chunk.is_empty() {
            return Ok(());
        }
        let limit = match self.link {
            Link::Udp(_) => MAX_UDP_PAYLOAD,
            Link::Tcp { .. } => MAX_TCP_FRAME,
        };
        for block in split_chunk(chunk, limit)? {
            self.send(&WireItem::Signal(block))?;
        }
        Ok(())
    }

    pub fn send_marker(&mut self, marker: &MarkerEvent) -> Result<()> {
        self.send(&WireItem::Marker(marker.clone()))
    }
}

#[derive(Debug, Default)]
pub struct ReceiverStats {
    pub received: AtomicU64,
    /// Frames missing according to sequence gaps.
    pub dropped: AtomicU64,
    pub decode_errors: AtomicU64,
}

/// Tracks the last sequence number per stream and counts gaps.
#[derive(Debug, Default)]
pub struct GapTracker {
    last: HashMap<StreamId, u64>,
}

impl GapTracker {
    /// Returns how many frames are missing before `frame`.
    pub fn observe(&mut self, frame: &Frame) -> u64 {
        let gap = match self.last.get(&frame.stream_id) {
            Some(&prev) if frame.seq > prev + 1 => frame.seq - prev - 1,
            _ => 0,
        };
        let entry = self.last.entry(frame.stream_id).or_insert(frame.seq);
        *entry = (*entry).max(frame.seq);
        gap
    }
}

/// Background listener decoding frames into a bounded queue.
pub struct FrameReceiver {
    queue: Arc<DropOldestQueue<Frame>>,
    stats: Arc<ReceiverStats>,
    stop: Arc<AtomicBool>,
    local_addr: SocketAddr,
    handle: Option<JoinHandle<()>>,
}

impl FrameReceiver {
    pub fn bind(transport: Transport, address: &str, capacity: usize) -> Result<Self> {
        let addr = resolve(address)?;
        let queue = DropOldestQueue::new(capacity);
        let stats = Arc::new(ReceiverStats::default());
        let stop = Arc::new(AtomicBool::new(false));
        let (q, st, sp) = (queue.clone(), stats.clone(), stop.clone());
        let (local_addr, handle) = match transport {
            Transport::Udp => {
                let sock = UdpSocket::bind(addr)?;
                sock.set_read_timeout(Some(POLL))?;
                let local = sock.local_addr()?;
                (local, std::thread::Builder::new().name("nxs-udp-rx".into()).spawn(move || udp_loop(sock, &q, &st, &sp))?)
            }
            Transport::Tcp => {
                let listener = TcpListener::bind(addr)?;
                listener.set_nonblocking(true)?;
                let local = listener.local_addr()?;
                (
                    local,
                    std::thread::Builder::new()
                        .name("nxs-tcp-rx".into())
                        .spawn(move || tcp_loop(listener, &q, &st, &sp))?,
                )
            }
        };
        Ok(FrameReceiver { queue, stats, stop, local_addr, handle: Some(handle) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn queue(&self) -> &Arc<DropOldestQueue<Frame>> {
        &self.queue
    }

    pub fn stats(&self) -> &ReceiverStats {
        &self.stats
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for FrameReceiver {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn deliver(frame: Frame, gaps: &mut GapTracker, queue: &DropOldestQueue<Frame>, stats: &ReceiverStats) {
    stats.dropped.fetch_add(gaps.observe(&frame), Ordering::Relaxed);
    stats.received.fetch_add(1, Ordering::Relaxed);
    queue.push(frame);
}

fn udp_loop(sock: UdpSocket, queue: &DropOldestQueue<Frame>, stats: &ReceiverStats, stop: &AtomicBool) {
    let mut buf = vec![0u8; 65536];
    let mut gaps = GapTracker::default();
    while !stop.load(Ordering::Relaxed) {
        match sock.recv(&mut buf) {
            Ok(n) => match frame_decode(&buf[..n]) {
                Ok(frame) => deliver(frame, &mut gaps, queue, stats),
                Err(e) => {
                    log::debug!("dropping undecodable datagram: {e}");
                    stats.decode_errors.fetch_add(1, Ordering::Relaxed);
                }
            },
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {}
            Err(e) => {
                log::warn!("UDP receive failed: {e}");
                std::thread::sleep(POLL);
            }
        }
    }
}

fn tcp_loop(listener: TcpListener, queue: &DropOldestQueue<Frame>, stats: &ReceiverStats, stop: &AtomicBool) {
    let mut gaps = GapTracker::default();
    while !stop.load(Ordering::Relaxed) {
        let mut stream = match listener.accept() {
            Ok((s, _)) => s,
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                std::thread::sleep(POLL);
                continue;
            }
            Err(e) => {
                log::warn!("TCP accept failed: {e}");
                std::thread::sleep(POLL);
                continue;
            }
        };
        let _ = stream.set_nonblocking(false);
        let _ = stream.set_read_timeout(Some(POLL));
        let mut pending: Vec<u8> = Vec::new();
        let mut buf = vec![0u8; 65536];
        'conn: while !stop.load(Ordering::Relaxed) {
            match stream.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => pending.extend_from_slice(&buf[..n]),
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {
                    continue
                }
                Err(_) => break,
            }
            loop {
                match frame_len(&pending) {
                    Ok(Some(len)) if pending.len() >= len => {
                        match frame_decode(&pending[..len]) {
                            Ok(frame) => deliver(frame, &mut gaps, queue, stats),
                            Err(_) => {
                                stats.decode_errors.fetch_add(1, Ordering::Relaxed);
                            }
                        }
                        pending.drain(..len);
                    }
                    Ok(_) => break,
                    Err(e) => {
                        log::warn!("closing TCP stream after bad frame: {e}");
                        stats.decode_errors.fetch_add(1, Ordering::Relaxed);
                        break 'conn;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::channel_names;
    use ndarray::Array2;

    fn wait_for(q: &DropOldestQueue<Frame>, n: usize) -> Vec<Frame> {
        let deadline = Instant::now() + Duration::from_secs(5);
        let mut out = Vec::new();
        while out.len() < n && Instant::now() < deadline {
            out.extend(q.drain());
            std::thread::sleep(Duration::from_millis(5));
        }
        out
    }

    #[test]
    fn udp_and_tcp_loopback() {
        for transport in [Transport::Udp, Transport::Tcp] {
            let rx = FrameReceiver::bind(transport, "127.0.0.1:0", 1024).unwrap();
            let mut tx = FrameSender::connect(transport, &rx.local_addr().to_string(), [1; 16]).unwrap();
            let data = Array2::from_shape_fn((100, 8), |(r, c)| (r * 8 + c) as f64);
            let chunk = Chunk::regular(0.0, 100.0, channel_names((0..8).map(|i| format!("c{i}"))), data).unwrap();
            tx.send_chunk(&chunk).unwrap();
            tx.send_marker(&MarkerEvent::new(0.5, "left", Some(769)).unwrap()).unwrap();
            let frames = wait_for(rx.queue(), tx.frames_sent() as usize);
            assert_eq!(frames.len() as u64, tx.frames_sent(), "{transport:?}");
            let samples: usize = frames
                .iter()
                .map(|f| match &f.item {
                    WireItem::Signal(b) => b.samples(),
                    _ => 0,
                })
                .sum();
            assert_eq!(samples, 100);
            assert_eq!(rx.stats().dropped.load(Ordering::Relaxed), 0);
        }
    }

    #[test]
    fn gaps_counted() {
        let mut g = GapTracker::default();
        let f = |seq| Frame { stream_id: [0; 16], seq, item: WireItem::Marker(MarkerEvent::new(0.0, "a", None).unwrap()) };
        assert_eq!(g.observe(&f(0)), 0);
        assert_eq!(g.observe(&f(1)), 0);
        assert_eq!(g.observe(&f(5)), 3);
        assert_eq!(g.observe(&f(6)), 0);
    }
}
