use ndarray::Array2;

use crate::types::{channel_names, ChannelNames, Chunk, MarkerEvent, SamplingRate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Signal,
    Marker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Xdf,
    BrainVision,
}

/// One stream of a recording. Marker streams keep their events in
/// `markers` and have an empty sample table.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedStream {
    pub name: String,
    pub kind: StreamKind,
    pub channel_names: Vec<String>,
    pub fs: f64,
    pub samples: Array2<f64>,
    pub timestamps: Vec<f64>,
    pub markers: Vec<MarkerEvent>,
}

impl RecordedStream {
    pub fn signal(name: impl Into<String>, channel_names: Vec<String>, fs: f64, samples: Array2<f64>, timestamps: Vec<f64>) -> Self {
        RecordedStream {
            name: name.into(),
            kind: StreamKind::Signal,
            channel_names,
            fs,
            samples,
            timestamps,
            markers: Vec::new(),
        }
    }

    pub fn markers(name: impl Into<String>, markers: Vec<MarkerEvent>) -> Self {
        RecordedStream {
            name: name.into(),
            kind: StreamKind::Marker,
            channel_names: Vec::new(),
            fs: 0.0,
            samples: Array2::zeros((0, 0)),
            timestamps: markers.iter().map(|m| m.timestamp).collect(),
            markers,
        }
    }

    /// Whole signal stream as one chunk, with its own timestamps.
    pub fn to_chunk(&self) -> crate::Result<Chunk> {
        Chunk::new(
            self.timestamps.clone(),
            self.names(),
            self.samples.clone(),
            SamplingRate::Regular(self.fs),
        )
    }

    pub fn names(&self) -> ChannelNames {
        channel_names(self.channel_names.iter().cloned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub streams: Vec<RecordedStream>,
    pub format: SourceFormat,
}

impl Recording {
    pub fn signal_streams(&self) -> impl Iterator<Item = &RecordedStream> {
        self.streams.iter().filter(|s| s.kind == StreamKind::Signal)
    }

    pub fn marker_streams(&self) -> impl Iterator<Item = &RecordedStream> {
        self.streams.iter().filter(|s| s.kind == StreamKind::Marker)
    }

    /// Earliest timestamp over all streams.
    pub fn start_time(&self) -> Option<f64> {
        self.streams.iter().filter_map(|s| s.timestamps.first().copied()).reduce(f64::min)
    }
}
