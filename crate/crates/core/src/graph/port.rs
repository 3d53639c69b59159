use std::fmt;

use crate::types::{Chunk, Epoch, FeatureVector, MarkerEvent, SpectrumFrame};

/// What one iteration of a port carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortType {
    /// one chunk of the continuous signal
    Signal,
    /// one epoch
    Epoch,
    /// one marker event
    Marker,
    /// one spectrum
    Spectrum,
    /// one feature vector
    Vector,
}

impl PortType {
    pub fn name(self) -> &'static str {
        match self {
            PortType::Signal => "signal",
            PortType::Epoch => "epoch",
            PortType::Marker => "marker",
            PortType::Spectrum => "spectrum",
            PortType::Vector => "vector",
        }
    }
}

impl fmt::Display for PortType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The items written to one output port during a single step.
#[derive(Debug, Clone, PartialEq)]
pub enum PortData {
    Signal(Vec<Chunk>),
    Epoch(Vec<Epoch>),
    Marker(Vec<MarkerEvent>),
    Spectrum(Vec<SpectrumFrame>),
    Vector(Vec<FeatureVector>),
}

impl PortData {
    pub fn empty(ty: PortType) -> Self {
        match ty {
            PortType::Signal => PortData::Signal(Vec::new()),
            PortType::Epoch => PortData::Epoch(Vec::new()),
            PortType::Marker => PortData::Marker(Vec::new()),
            PortType::Spectrum => PortData::Spectrum(Vec::new()),
            PortType::Vector => PortData::Vector(Vec::new()),
        }
    }

    pub fn port_type(&self) -> PortType {
        match self {
            PortData::Signal(_) => PortType::Signal,
            PortData::Epoch(_) => PortType::Epoch,
            PortData::Marker(_) => PortType::Marker,
            PortData::Spectrum(_) => PortType::Spectrum,
            PortData::Vector(_) => PortType::Vector,
        }
    }

    pub fn clear(&mut self) {
        match self {
            PortData::Signal(v) => v.clear(),
            PortData::Epoch(v) => v.clear(),
            PortData::Marker(v) => v.clear(),
            PortData::Spectrum(v) => v.clear(),
            PortData::Vector(v) => v.clear(),
        }
    }

    /// Number of items (chunks, epochs, ...) currently held.
    pub fn len(&self) -> usize {
        match self {
            PortData::Signal(v) => v.len(),
            PortData::Epoch(v) => v.len(),
            PortData::Marker(v) => v.len(),
            PortData::Spectrum(v) => v.len(),
            PortData::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn chunks(&self) -> &[Chunk] {
        match self {
            PortData::Signal(v) => v,
            _ => &[],
        }
    }

    pub fn epochs(&self) -> &[Epoch] {
        match self {
            PortData::Epoch(v) => v,
            _ => &[],
        }
    }

    pub fn markers(&self) -> &[MarkerEvent] {
        match self {
            PortData::Marker(v) => v,
            _ => &[],
        }
    }

    pub fn spectra(&self) -> &[SpectrumFrame] {
        match self {
            PortData::Spectrum(v) => v,
            _ => &[],
        }
    }

    pub fn vectors(&self) -> &[FeatureVector] {
        match self {
            PortData::Vector(v) => v,
            _ => &[],
        }
    }
}

/// One input slot of a node and the port types it accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSlot {
    pub name: &'static str,
    pub accepts: &'static [PortType],
}

impl InputSlot {
    pub const fn new(name: &'static str, accepts: &'static [PortType]) -> Self {
        InputSlot { name, accepts }
    }
}

/// Declared inputs: fixed slots, optionally followed by any number of
/// repetitions of a variadic slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InputDecl {
    pub slots: Vec<InputSlot>,
    pub variadic: Option<InputSlot>,
}

impl InputDecl {
    pub fn none() -> Self {
        InputDecl::default()
    }

    pub fn one(name: &'static str, accepts: &'static [PortType]) -> Self {
        InputDecl { slots: vec![InputSlot::new(name, accepts)], variadic: None }
    }

    pub fn slot(&self, index: usize) -> Option<&InputSlot> {
        self.slots.get(index).or(self.variadic.as_ref())
    }

    pub fn is_source(&self) -> bool {
        self.slots.is_empty() && self.variadic.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputDecl {
    pub name: String,
    pub port_type: PortType,
}

impl OutputDecl {
    pub fn new(name: impl Into<String>, port_type: PortType) -> Self {
        OutputDecl { name: name.into(), port_type }
    }
}

/// Read-only view of the ports feeding a node during one step.
pub struct Inputs<'a> {
    ports: Vec<&'a PortData>,
}

impl<'a> Inputs<'a> {
    pub(crate) fn new(ports: Vec<&'a PortData>) -> Self {
        Inputs { ports }
    }

    pub fn len(&self) -> usize {
        self.ports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ports.is_empty()
    }

    pub fn port(&self, slot: usize) -> &'a PortData {
        self.ports[slot]
    }

    pub fn chunks(&self, slot: usize) -> &'a [Chunk] {
        self.ports[slot].chunks()
    }

    pub fn epochs(&self, slot: usize) -> &'a [Epoch] {
        self.ports[slot].epochs()
    }

    pub fn markers(&self, slot: usize) -> &'a [MarkerEvent] {
        self.ports[slot].markers()
    }

    pub fn spectra(&self, slot: usize) -> &'a [SpectrumFrame] {
        self.ports[slot].spectra()
    }

    pub fn vectors(&self, slot: usize) -> &'a [FeatureVector] {
        self.ports[slot].vectors()
    }
}

/// Write access to a node's own output ports during one step.
pub struct Outputs<'a> {
    ports: &'a mut [PortData],
}

impl<'a> Outputs<'a> {
    pub(crate) fn new(ports: &'a mut [PortData]) -> Self {
        Outputs { ports }
    }

    pub fn len(&self) -> usize {
        self.ports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ports.is_empty()
    }

    pub fn push_chunk(&mut self, port: usize, chunk: Chunk) {
        match &mut self.ports[port] {
            PortData::Signal(v) => v.push(chunk),
            other => panic!("port {port} carries {}, not signal", other.port_type()),
        }
    }

    pub fn push_epoch(&mut self, port: usize, epoch: Epoch) {
        match &mut self.ports[port] {
            PortData::Epoch(v) => v.push(epoch),
            other => panic!("port {port} carries {}, not epoch", other.port_type()),
        }
    }

    pub fn push_marker(&mut self, port: usize, marker: MarkerEvent) {
        match &mut self.ports[port] {
            PortData::Marker(v) => v.push(marker),
            other => panic!("port {port} carries {}, not marker", other.port_type()),
        }
    }

    pub fn push_spectrum(&mut self, port: usize, frame: SpectrumFrame) {
        match &mut self.ports[port] {
            PortData::Spectrum(v) => v.push(frame),
            other => panic!("port {port} carries {}, not spectrum", other.port_type()),
        }
    }

    pub fn push_vector(&mut self, port: usize, vector: FeatureVector) {
        match &mut self.ports[port] {
            PortData::Vector(v) => v.push(vector),
            other => panic!("port {port} carries {}, not vector", other.port_type()),
        }
    }
}
