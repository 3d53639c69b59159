//! Cutting continuous signal into fixed-length epochs.
//!
//! An epoch starts at the first buffered sample whose timestamp is at or
//! after the requested onset (no interpolation) and is emitted as soon as
//! `round(duration * fs)` samples from that point are available.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::{ChannelNames, Chunk, Epoch, MarkerEvent};

/// Tolerance when comparing sample timestamps against onsets.
const ONSET_EPS: f64 = 1e-9;

/// Marker selector for stimulation-based epoching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StimCode {
    Label(String),
    Code(i32),
}

impl StimCode {
    pub fn matches(&self, marker: &MarkerEvent) -> bool {
        match self {
            StimCode::Label(l) => &marker.label == l,
            StimCode::Code(c) => {
                marker.code == Some(*c) || (marker.code.is_none() && MarkerEvent::code_from_label(&marker.label) == Some(*c))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpochMode {
    /// Onsets at `t0, t0 + interval, ...` where `t0` is the first sample time.
    Time { duration: f64, interval: f64 },
    /// One epoch per marker, starting at the marker.
    Marker { duration: f64 },
    /// One epoch per matching marker, starting `offset` seconds after it.
    Stimulation { code: StimCode, duration: f64, offset: f64 },
}

impl EpochMode {
    fn duration(&self) -> f64 {
        match self {
            EpochMode::Time { duration, .. }
            | EpochMode::Marker { duration }
            | EpochMode::Stimulation { duration, .. } => *duration,
        }
    }

    fn offset(&self) -> f64 {
        match self {
            EpochMode::Stimulation { offset, .. } => *offset,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Pending {
    onset: f64,
    trigger: MarkerEvent,
}

/// Buffered epoching state for one signal stream.
#[derive(Debug, Clone)]
pub struct Epocher {
    mode: EpochMode,
    fs: Option<f64>,
    names: Option<ChannelNames>,
    epoch_len: usize,
    capacity: usize,
    rows: VecDeque<f64>,
    stamps: VecDeque<f64>,
    /// Global index of `stamps[0]`.
    first_index: u64,
    t0: Option<f64>,
    next_k: u64,
    pending: Vec<Pending>,
    skipped_markers: u64,
    dropped_triggers: u64,
}

impl Epocher {
    pub fn new(mode: EpochMode) -> Result<Self> {
        let d = mode.duration();
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidDuration(format!("epoch duration must be positive, got {d}")));
        }
        match &mode {
            EpochMode::Time { interval, .. } if !(*interval > 0.0 && interval.is_finite()) => {
                return Err(Error::InvalidDuration(format!("interval must be positive, got {interval}")));
            }
            EpochMode::Stimulation { offset, .. } if !(*offset >= 0.0 && offset.is_finite()) => {
                return Err(Error::InvalidDuration(format!("offset must be >= 0, got {offset}")));
            }
            _ => {}
        }
        Ok(Epocher {
            mode,
            fs: None,
            names: None,
            epoch_len: 0,
            capacity: 0,
            rows: VecDeque::new(),
            stamps: VecDeque::new(),
            first_index: 0,
            t0: None,
            next_k: 0,
            pending: Vec::new(),
            skipped_markers: 0,
            dropped_triggers: 0,
        })
    }

    pub fn time_based(duration: f64, interval: f64) -> Result<Self> {
        Epocher::new(EpochMode::Time { duration, interval })
    }

    pub fn marker_based(duration: f64) -> Result<Self> {
        Epocher::new(EpochMode::Marker { duration })
    }

    pub fn stimulation_based(code: StimCode, duration: f64, offset: f64) -> Result<Self> {
        Epocher::new(EpochMode::Stimulation { code, duration, offset })
    }

    pub fn mode(&self) -> &EpochMode {
        &self.mode
    }

    /// Samples per epoch, known once the first chunk has arrived.
    pub fn epoch_len(&self) -> Option<usize> {
        self.fs.map(|_| self.epoch_len)
    }

    /// Markers skipped because their window had already left the buffer.
    pub fn skipped_markers(&self) -> u64 {
        self.skipped_markers
    }

    pub fn dropped_triggers(&self) -> u64 {
        self.dropped_triggers
    }

    pub fn pending_triggers(&self) -> usize {
        self.pending.len()
    }

    /// Buffers `chunk` and `markers` and returns every epoch that became
    /// complete, in onset order.
    pub fn push(&mut self, chunk: Option<&Chunk>, markers: &[MarkerEvent]) -> Result<Vec<Epoch>> {
        if let Some(chunk) = chunk.filter(|c| !c.is_empty()) {
            self.append(chunk)?;
        }
        for m in markers {
            let onset = match &self.mode {
                EpochMode::Time { .. } => continue,
                EpochMode::Marker { .. } => m.timestamp,
                EpochMode::Stimulation { code, offset, .. } => {
                    if !code.matches(m) {
                        continue;
                    }
                    m.timestamp + offset
                }
            };
            let at = self.pending.partition_point(|p| p.onset <= onset);
            self.pending.insert(at, Pending { onset, trigger: m.clone() });
        }
        let epochs = self.extract();
        self.trim();
        Ok(epochs)
    }

    fn append(&mut self, chunk: &Chunk) -> Result<()> {
        let fs = chunk
            .sampling_rate()
            .hz()
            .ok_or_else(|| Error::InvalidChunk("epoching needs a regular sampling rate".into()))?;
        match &self.names {
            None => {
                self.names = Some(chunk.channel_names().clone());
                self.fs = Some(fs);
                self.epoch_len = (self.mode.duration() * fs).round().max(1.0) as usize;
                let span = 2.0 * (self.mode.duration() + self.mode.offset()) * fs;
                self.capacity = (span.ceil() as usize).max(fs.ceil() as usize).max(2 * self.epoch_len);
                self.t0 = Some(chunk.timestamps()[0]);
            }
            Some(names) if names.len() != chunk.channel_count() => {
                return Err(Error::ChannelCountChanged { expected: names.len(), got: chunk.channel_count() });
            }
            _ => {}
        }
        self.stamps.extend(chunk.timestamps());
        match chunk.data().as_slice() {
            Some(flat) => self.rows.extend(flat),
            None => self.rows.extend(chunk.data().iter()),
        }
        Ok(())
    }

    /// Buffer position of the first sample at or after `onset`.
    fn start_of(&self, onset: f64) -> Option<usize> {
        let i = self.stamps.partition_point(|&t| t < onset - ONSET_EPS);
        (i < self.stamps.len()).then_some(i)
    }

    fn slice(&self, start: usize) -> Array2<f64> {
        let ch = self.names.as_ref().map_or(0, |n| n.len());
        let (a, b) = (start * ch, (start + self.epoch_len) * ch);
        let flat: Vec<f64> = self.rows.range(a..b).copied().collect();
        Array2::from_shape_vec((self.epoch_len, ch), flat).expect("buffer shape")
    }

    fn make_epoch(&self, onset: f64, start: usize, trigger: Option<MarkerEvent>) -> Epoch {
        Epoch {
            onset,
            trigger,
            data: self.slice(start),
            channel_names: self.names.clone().expect("names set"),
            sampling_rate: self.fs.expect("fs set"),
        }
    }

    fn extract(&mut self) -> Vec<Epoch> {
        let mut out = Vec::new();
        let Some(_) = self.fs else { return out };
        match self.mode.clone() {
            EpochMode::Time { interval, .. } => {
                let t0 = self.t0.expect("t0 set with fs");
                loop {
                    let onset = t0 + self.next_k as f64 * interval;
                    let Some(start) = self.start_of(onset) else { break };
                    if start + self.epoch_len > self.stamps.len() {
                        break;
                    }
                    out.push(self.make_epoch(onset, start, None));
                    self.next_k += 1;
                }
            }
            EpochMode::Marker { .. } | EpochMode::Stimulation { .. } => {
                while let Some(p) = self.pending.first() {
                    let oldest = self.stamps.front().copied();
                    if self.first_index > 0 && oldest.is_some_and(|t| p.onset < t - ONSET_EPS) {
                        log::warn!(
                            "marker '{}' at {:.3} s is older than the retained signal; epoch skipped",
                            p.trigger.label,
                            p.trigger.timestamp
                        );
                        self.skipped_markers += 1;
                        self.pending.remove(0);
                        continue;
                    }
                    let Some(start) = self.start_of(p.onset) else { break };
                    if start + self.epoch_len > self.stamps.len() {
                        break;
                    }
                    let p = self.pending.remove(0);
                    out.push(self.make_epoch(p.onset, start, Some(p.trigger)));
                }
            }
        }
        out
    }

    fn trim(&mut self) {
        let excess = self.stamps.len().saturating_sub(self.capacity);
        if excess == 0 {
            return;
        }
        let new_front = self.stamps[excess];
        while let Some(p) = self.pending.first() {
            let started = self.stamps.front().is_some_and(|&t| p.onset >= t - ONSET_EPS);
            if started && p.onset < new_front - ONSET_EPS {
                log::warn!("epoch buffer overflow; dropping pending trigger '{}'", p.trigger.label);
                self.dropped_triggers += 1;
                self.pending.remove(0);
            } else {
                break;
            }
        }
        let ch = self.names.as_ref().map_or(0, |n| n.len());
        self.stamps.drain(..excess);
        self.rows.drain(..excess * ch);
        self.first_index += excess as u64;
    }
}
