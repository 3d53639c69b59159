use std::sync::atomic::Ordering;

use crate::error::{Error, Result};
use crate::graph::{InitContext, InputDecl, Inputs, Node, OutputDecl, Outputs, PortType, StepContext};
use crate::net::{FrameReceiver, FrameSender, GapTracker, RdaClient, RdaClientConfig, RdaEvent, Transport, WireItem};
use crate::nodes::sinks::data_then_markers;
use crate::nodes::transform::vector_as_chunk;
use crate::registry::Params;
use crate::types::{channel_names, ChannelNames};

/// Publishes signals, feature vectors (as one-sample signal frames) and
/// markers as NxFrames. Send failures are counted, never raised.
pub struct NetSendNode {
    transport: Transport,
    address: String,
    sender: Option<FrameSender>,
}

impl NetSendNode {
    pub fn new(transport: Transport, address: impl Into<String>) -> Self {
        NetSendNode { transport, address: address.into(), sender: None }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let transport = p.str("transport")?.parse().map_err(|e: Error| p.error(e.to_string()))?;
        Ok(NetSendNode::new(transport, p.str("address")?))
    }
}

impl Node for NetSendNode {
    fn kind(&self) -> &'static str {
        "NetSend"
    }
    fn inputs(&self) -> InputDecl {
        data_then_markers()
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        Vec::new()
    }
    fn init(&mut self, _: &InitContext<'_>) -> Result<()> {
        self.sender = Some(FrameSender::connect(self.transport, &self.address, rand::random())?);
        Ok(())
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, _: &mut Outputs<'_>) -> Result<()> {
        let s = self.sender.as_mut().expect("initialized");
        for c in inputs.chunks(0) {
            s.send_chunk(c)?;
        }
        for v in inputs.vectors(0) {
            s.send_chunk(&vector_as_chunk(v)?)?;
        }
        for slot in 0..inputs.len() {
            for m in inputs.markers(slot) {
                s.send(&WireItem::Marker(m.clone()))?;
            }
        }
        Ok(())
    }
    fn terminate(&mut self) -> Result<()> {
        self.sender = None;
        Ok(())
    }
    fn counters(&self) -> Vec<(&'static str, u64)> {
        let (sent, errors) = self.sender.as_ref().map_or((0, 0), |s| (s.frames_sent(), s.send_errors()));
        vec![("frames_sent", sent), ("send_errors", errors)]
    }
}

/// Receives NxFrames on a background thread. Frames carry no channel
/// metadata, so the sampling rate and channel layout are configured here.
pub struct NetReceiveNode {
    transport: Transport,
    address: String,
    fs: f64,
    names: ChannelNames,
    capacity: usize,
    receiver: Option<FrameReceiver>,
    gaps: GapTracker,
    gap_frames: u64,
    mismatched: u64,
}

impl NetReceiveNode {
    pub fn new(transport: Transport, address: impl Into<String>, fs: f64, names: ChannelNames, capacity: usize) -> Self {
        NetReceiveNode {
            transport,
            address: address.into(),
            fs,
            names,
            capacity,
            receiver: None,
            gaps: GapTracker::default(),
            gap_frames: 0,
            mismatched: 0,
        }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let transport = p.str("transport")?.parse().map_err(|e: Error| p.error(e.to_string()))?;
        let names = match p.raw("channels")? {
            Some(toml::Value::Integer(n)) if n > 0 => channel_names((0..n).map(|i| format!("ch{i}"))),
            Some(v @ toml::Value::Array(_)) => {
                channel_names(v.as_array().unwrap().iter().filter_map(|e| e.as_str().map(str::to_string)))
            }
            _ => return Err(p.error("channels must be a positive count or a list of names")),
        };
        if names.is_empty() {
            return Err(p.error("channels must not be empty"));
        }
        let fs = p.f64("fs")?;
        if !(fs > 0.0) {
            return Err(p.error("fs must be positive"));
        }
        let capacity = p.usize("queue")?.max(1);
        Ok(NetReceiveNode::new(transport, p.str("address")?, fs, names, capacity))
    }

    pub fn local_addr(&self) -> Option<std::net::SocketAddr> {
        self.receiver.as_ref().map(FrameReceiver::local_addr)
    }
}

impl Node for NetReceiveNode {
    fn kind(&self) -> &'static str {
        "NetReceive"
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("signal", PortType::Signal), OutputDecl::new("marker", PortType::Marker)]
    }
    fn init(&mut self, _: &InitContext<'_>) -> Result<()> {
        self.receiver = Some(FrameReceiver::bind(self.transport, &self.address, self.capacity)?);
        Ok(())
    }
    fn update(&mut self, _: &StepContext, _: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        let rx = self.receiver.as_ref().expect("initialized");
        for frame in rx.queue().drain() {
            self.gap_frames += self.gaps.observe(&frame);
            match frame.item {
                WireItem::Signal(block) if block.channels == self.names.len() => {
                    out.push_chunk(0, block.to_chunk(self.fs, self.names.clone())?)
                }
                WireItem::Signal(_) => self.mismatched += 1,
                WireItem::Marker(m) => out.push_marker(1, m),
            }
        }
        Ok(())
    }
    fn terminate(&mut self) -> Result<()> {
        if let Some(rx) = self.receiver.as_mut() {
            rx.shutdown();
        }
        Ok(())
    }
    fn counters(&self) -> Vec<(&'static str, u64)> {
        let mut v = vec![("gap_frames", self.gap_frames), ("channel_mismatch", self.mismatched)];
        if let Some(rx) = &self.receiver {
            let s = rx.stats();
            v.push(("received", s.received.load(Ordering::Relaxed)));
            v.push(("decode_errors", s.decode_errors.load(Ordering::Relaxed)));
            v.push(("queue_dropped", rx.queue().dropped()));
        }
        v
    }
}

/// Brain Products RDA client.
pub struct RdaReceiveNode {
    config: RdaClientConfig,
    client: Option<RdaClient>,
    ended: bool,
}

impl RdaReceiveNode {
    pub fn new(config: RdaClientConfig) -> Self {
        RdaReceiveNode { config, client: None, ended: false }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let port = p.usize("port")?;
        let config = RdaClientConfig {
            host: p.str("host")?,
            port: u16::try_from(port).map_err(|_| p.error(format!("port {port} out of range")))?,
            offset: p.f64("offset")?,
            max_retries: p.usize("retries")? as u32,
            ..RdaClientConfig::default()
        };
        Ok(RdaReceiveNode::new(config))
    }
}

impl Node for RdaReceiveNode {
    fn kind(&self) -> &'static str {
        "RdaReceive"
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("signal", PortType::Signal), OutputDecl::new("marker", PortType::Marker)]
    }
    fn init(&mut self, ctx: &InitContext<'_>) -> Result<()> {
        self.ended = false;
        self.client = Some(RdaClient::spawn(self.config.clone(), ctx.clock.clone()));
        Ok(())
    }
    fn update(&mut self, _: &StepContext, _: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        let client = self.client.as_ref().expect("initialized");
        for ev in client.queue().drain() {
            match ev {
                RdaEvent::Chunk(c) => out.push_chunk(0, c),
                RdaEvent::Marker(m) => out.push_marker(1, m),
                RdaEvent::Ended => self.ended = true,
                RdaEvent::Failed(msg) => return Err(Error::Protocol(msg)),
            }
        }
        Ok(())
    }
    fn terminate(&mut self) -> Result<()> {
        if let Some(c) = self.client.as_mut() {
            c.shutdown();
        }
        Ok(())
    }
    fn is_finished(&self) -> bool {
        self.ended
    }
    fn counters(&self) -> Vec<(&'static str, u64)> {
        let Some(c) = &self.client else { return Vec::new() };
        let k = c.counters();
        vec![
            ("blocks", k.blocks.load(Ordering::Relaxed)),
            ("unknown_messages", k.unknown_messages.load(Ordering::Relaxed)),
            ("connect_failures", k.connect_failures.load(Ordering::Relaxed)),
            ("queue_dropped", c.queue().dropped()),
        ]
    }
}
