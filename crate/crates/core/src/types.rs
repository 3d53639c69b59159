//! Data items that flow between nodes.

use std::fmt;
use std::sync::Arc;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Ordered channel labels, shared between the chunks of one stream.
pub type ChannelNames = Arc<[String]>;

pub fn channel_names<I, S>(names: I) -> ChannelNames
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    names.into_iter().map(Into::into).collect::<Vec<_>>().into()
}

/// Sampling rate of a stream. Marker-derived streams have no regular rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingRate {
    Regular(f64),
    Irregular,
}

impl SamplingRate {
    pub fn hz(self) -> Option<f64> {
        match self {
            SamplingRate::Regular(fs) => Some(fs),
            SamplingRate::Irregular => None,
        }
    }

    pub fn is_regular(self) -> bool {
        matches!(self, SamplingRate::Regular(_))
    }
}

impl fmt::Display for SamplingRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingRate::Regular(fs) => write!(f, "{fs} Hz"),
            SamplingRate::Irregular => f.write_str("irregular"),
        }
    }
}

/// A timestamped block of multichannel samples. Rows are samples, columns
/// are channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    timestamps: Vec<f64>,
    channel_names: ChannelNames,
    data: Array2<f64>,
    sampling_rate: SamplingRate,
}

impl Chunk {
    pub fn new(
        timestamps: Vec<f64>,
        channel_names: ChannelNames,
        data: Array2<f64>,
        sampling_rate: SamplingRate,
    ) -> Result<Self> {
        if data.nrows() != timestamps.len() {
            return Err(Error::InvalidChunk(format!(
                "{} rows but {} timestamps",
                data.nrows(),
                timestamps.len()
            )));
        }
        if data.ncols() != channel_names.len() {
            return Err(Error::InvalidChunk(format!(
                "{} columns but {} channel names",
                data.ncols(),
                channel_names.len()
            )));
        }
        if let SamplingRate::Regular(fs) = sampling_rate {
            if !(fs > 0.0 && fs.is_finite()) {
                return Err(Error::InvalidChunk(format!("sampling rate {fs} must be positive")));
            }
            if timestamps.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidChunk("timestamps not strictly increasing".into()));
            }
        } else if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidChunk("timestamps decreasing".into()));
        }
        for (i, name) in channel_names.iter().enumerate() {
            if channel_names[..i].contains(name) {
                return Err(Error::InvalidChunk(format!("duplicate channel name '{name}'")));
            }
        }
        Ok(Chunk { timestamps, channel_names, data, sampling_rate })
    }

    /// Builds a regular chunk whose sample `i` is stamped `start + i / fs`.
    pub fn regular(start: f64, fs: f64, channel_names: ChannelNames, data: Array2<f64>) -> Result<Self> {
        let timestamps = (0..data.nrows()).map(|i| start + i as f64 / fs).collect();
        Chunk::new(timestamps, channel_names, data, SamplingRate::Regular(fs))
    }

    /// Internal constructor for callers that already uphold the invariants.
    pub(crate) fn from_parts(
        timestamps: Vec<f64>,
        channel_names: ChannelNames,
        data: Array2<f64>,
        sampling_rate: SamplingRate,
    ) -> Self {
        debug_assert_eq!(data.nrows(), timestamps.len());
        debug_assert_eq!(data.ncols(), channel_names.len());
        Chunk { timestamps, channel_names, data, sampling_rate }
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn channel_names(&self) -> &ChannelNames {
        &self.channel_names
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<f64> {
        &mut self.data
    }

    pub fn sampling_rate(&self) -> SamplingRate {
        self.sampling_rate
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.channel_names.len()
    }

    /// Replaces the sample table, keeping timestamps. Shape must match.
    pub fn with_data(&self, data: Array2<f64>) -> Chunk {
        assert_eq!(data.dim(), self.data.dim(), "replacement data shape");
        Chunk { data, ..self.clone_meta() }
    }

    /// Same timestamps and rate, new channel set.
    pub fn with_channels(&self, channel_names: ChannelNames, data: Array2<f64>) -> Chunk {
        assert_eq!(data.nrows(), self.len());
        assert_eq!(data.ncols(), channel_names.len());
        Chunk {
            timestamps: self.timestamps.clone(),
            channel_names,
            data,
            sampling_rate: self.sampling_rate,
        }
    }

    fn clone_meta(&self) -> Chunk {
        Chunk {
            timestamps: self.timestamps.clone(),
            channel_names: self.channel_names.clone(),
            data: Array2::zeros((0, 0)),
            sampling_rate: self.sampling_rate,
        }
    }

    /// Rows `[start, end)` as a new chunk.
    pub fn slice(&self, start: usize, end: usize) -> Chunk {
        Chunk {
            timestamps: self.timestamps[start..end].to_vec(),
            channel_names: self.channel_names.clone(),
            data: self.data.slice(s![start..end, ..]).to_owned(),
            sampling_rate: self.sampling_rate,
        }
    }

    /// Concatenates chunks of one stream along time.
    pub fn concat(chunks: &[Chunk]) -> Result<Chunk> {
        let first = chunks.first().ok_or_else(|| Error::InvalidChunk("nothing to concatenate".into()))?;
        if chunks.iter().any(|c| c.channel_names != first.channel_names) {
            return Err(Error::InvalidChunk("channel sets differ".into()));
        }
        let views: Vec<ArrayView2<f64>> = chunks.iter().map(|c| c.data.view()).collect();
        let data = concatenate(Axis(0), &views).map_err(|e| Error::InvalidChunk(e.to_string()))?;
        let timestamps = chunks.iter().flat_map(|c| c.timestamps.iter().copied()).collect();
        Chunk::new(timestamps, first.channel_names.clone(), data, first.sampling_rate)
    }
}

/// A timestamped event label on a marker stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerEvent {
    pub timestamp: f64,
    pub label: String,
    pub code: Option<i32>,
}

impl MarkerEvent {
    pub fn new(timestamp: f64, label: impl Into<String>, code: Option<i32>) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::InvalidChunk("marker label must be non-empty".into()));
        }
        Ok(MarkerEvent { timestamp, label, code })
    }

    /// Integer code carried by the label itself, e.g. "769" or "S  1".
    pub fn code_from_label(label: &str) -> Option<i32> {
        let trimmed = label.trim();
        if let Ok(v) = trimmed.parse::<i32>() {
            return Some(v);
        }
        let rest = trimmed.strip_prefix('S').or_else(|| trimmed.strip_prefix('R'))?;
        rest.trim().parse::<i32>().ok()
    }
}

/// A fixed-length window cut from the continuous signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub onset: f64,
    pub trigger: Option<MarkerEvent>,
    pub data: Array2<f64>,
    pub channel_names: ChannelNames,
    pub sampling_rate: f64,
}

impl Epoch {
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn with_data(&self, data: Array2<f64>) -> Epoch {
        Epoch {
            onset: self.onset,
            trigger: self.trigger.clone(),
            data,
            channel_names: self.channel_names.clone(),
            sampling_rate: self.sampling_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumScaling {
    /// units² / Hz
    Density,
    Magnitude,
}

/// Per-channel spectrum at one timestamp. `values` is channels × bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFrame {
    pub timestamp: f64,
    pub frequencies: Vec<f64>,
    pub values: Array2<f64>,
    pub channel_names: ChannelNames,
    pub scaling: SpectrumScaling,
}

impl SpectrumFrame {
    pub fn bin_width(&self) -> f64 {
        match self.frequencies.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }
}

/// A flat feature row. `names` records the feature ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub timestamp: f64,
    pub values: Vec<f64>,
    pub names: Vec<String>,
    pub label: Option<String>,
}

impl FeatureVector {
    pub fn new(timestamp: f64, values: Vec<f64>, names: Vec<String>, label: Option<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidChunk("feature vector must be non-empty".into()));
        }
        if names.len() != values.len() {
            return Err(Error::InvalidChunk(format!(
                "{} feature names for {} values",
                names.len(),
                values.len()
            )));
        }
        Ok(FeatureVector { timestamp, values, names, label })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
