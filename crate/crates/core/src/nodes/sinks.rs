use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::fileio::{BinLogWriter, CsvSink};
use crate::graph::{InitContext, InputDecl, InputSlot, Inputs, Node, OutputDecl, Outputs, PortType, StepContext};
use crate::registry::Params;
use crate::types::{Chunk, Epoch, FeatureVector, MarkerEvent, SpectrumFrame};

pub(crate) const LOGGABLE: &[PortType] = &[PortType::Signal, PortType::Vector, PortType::Marker];
pub(crate) const MARKER: &[PortType] = &[PortType::Marker];

/// Data slot followed by any number of marker slots.
pub(crate) fn data_then_markers() -> InputDecl {
    InputDecl { slots: vec![InputSlot::new("in", LOGGABLE)], variadic: Some(InputSlot::new("marker", MARKER)) }
}

/// Logs signals or feature vectors to CSV, markers to the sibling file.
pub struct CsvSinkNode {
    path: PathBuf,
    sink: Option<CsvSink>,
}

impl CsvSinkNode {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        CsvSinkNode { path: path.into(), sink: None }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        Ok(CsvSinkNode::new(p.path("file")?))
    }
}

impl Node for CsvSinkNode {
    fn kind(&self) -> &'static str {
        "ToCsv"
    }
    fn inputs(&self) -> InputDecl {
        data_then_markers()
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        Vec::new()
    }
    fn init(&mut self, _: &InitContext<'_>) -> Result<()> {
        self.sink = Some(CsvSink::new(&self.path));
        Ok(())
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, _: &mut Outputs<'_>) -> Result<()> {
        let sink = self.sink.as_mut().expect("initialized");
        for c in inputs.chunks(0) {
            sink.append_chunk(c)?;
        }
        for v in inputs.vectors(0) {
            sink.append_vector(v)?;
        }
        for slot in 0..inputs.len() {
            for m in inputs.markers(slot) {
                sink.append_marker(m)?;
            }
        }
        Ok(())
    }
    fn terminate(&mut self) -> Result<()> {
        if let Some(s) = self.sink.as_mut() {
            s.flush()?;
        }
        Ok(())
    }
    fn counters(&self) -> Vec<(&'static str, u64)> {
        let (rows, markers) = self.sink.as_ref().map_or((0, 0), |s| (s.rows_written(), s.markers_written()));
        vec![("rows", rows), ("markers", markers)]
    }
}

pub struct BinLogNode {
    path: PathBuf,
    writer: Option<BinLogWriter>,
}

impl BinLogNode {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        BinLogNode { path: path.into(), writer: None }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        Ok(BinLogNode::new(p.path("file")?))
    }
}

impl Node for BinLogNode {
    fn kind(&self) -> &'static str {
        "BinLog"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("signal", &[PortType::Signal])
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        Vec::new()
    }
    fn init(&mut self, _: &InitContext<'_>) -> Result<()> {
        self.writer = Some(BinLogWriter::new(&self.path));
        Ok(())
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, _: &mut Outputs<'_>) -> Result<()> {
        let w = self.writer.as_mut().expect("initialized");
        for c in inputs.chunks(0) {
            w.append(c)?;
        }
        Ok(())
    }
    fn terminate(&mut self) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![("records", self.writer.as_ref().map_or(0, BinLogWriter::records))]
    }
}

/// Everything a [`Collector`] has received, in arrival order.
#[derive(Debug, Default, Clone)]
pub struct Collected {
    pub chunks: Vec<Chunk>,
    pub epochs: Vec<Epoch>,
    pub markers: Vec<MarkerEvent>,
    pub spectra: Vec<SpectrumFrame>,
    pub vectors: Vec<FeatureVector>,
}

/// In-memory sink for embedding and tests. Accepts any port type on any
/// number of inputs; the shared handle stays readable after the run.
pub struct Collector {
    store: Arc<Mutex<Collected>>,
}

impl Collector {
    pub fn new() -> (Self, Arc<Mutex<Collected>>) {
        let store = Arc::new(Mutex::new(Collected::default()));
        (Collector { store: store.clone() }, store)
    }
}

const ANY: &[PortType] = &[PortType::Signal, PortType::Epoch, PortType::Marker, PortType::Spectrum, PortType::Vector];

impl Node for Collector {
    fn kind(&self) -> &'static str {
        "Collector"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl { slots: vec![InputSlot::new("in", ANY)], variadic: Some(InputSlot::new("in", ANY)) }
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        Vec::new()
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, _: &mut Outputs<'_>) -> Result<()> {
        let mut s = self.store.lock().unwrap();
        for i in 0..inputs.len() {
            s.chunks.extend_from_slice(inputs.chunks(i));
            s.epochs.extend_from_slice(inputs.epochs(i));
            s.markers.extend_from_slice(inputs.markers(i));
            s.spectra.extend_from_slice(inputs.spectra(i));
            s.vectors.extend_from_slice(inputs.vectors(i));
        }
        Ok(())
    }
}
