//! Channel selection and linear re-referencing. Indices are zero-based.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::types::{channel_names, Chunk};

/// A channel identified by name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelSelector {
    Name(String),
    Index(usize),
}

impl ChannelSelector {
    pub fn resolve(&self, names: &[String]) -> Result<usize> {
        match self {
            ChannelSelector::Name(n) => {
                names.iter().position(|c| c == n).ok_or_else(|| Error::UnknownChannel(n.clone()))
            }
            ChannelSelector::Index(i) if *i < names.len() => Ok(*i),
            ChannelSelector::Index(i) => Err(Error::IndexOutOfRange { index: *i, count: names.len() }),
        }
    }
}

impl From<&str> for ChannelSelector {
    fn from(s: &str) -> Self {
        ChannelSelector::Name(s.to_string())
    }
}

impl From<usize> for ChannelSelector {
    fn from(i: usize) -> Self {
        ChannelSelector::Index(i)
    }
}

/// Ordered list of selectors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChannelSpec(pub Vec<ChannelSelector>);

impl ChannelSpec {
    pub fn resolve(&self, names: &[String]) -> Result<Vec<usize>> {
        let idx: Vec<usize> = self.0.iter().map(|s| s.resolve(names)).collect::<Result<_>>()?;
        for (i, a) in idx.iter().enumerate() {
            if idx[..i].contains(a) {
                return Err(Error::Schema(format!("channel '{}' selected twice", names[*a])));
            }
        }
        Ok(idx)
    }
}

impl<S: Into<ChannelSelector>> FromIterator<S> for ChannelSpec {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        ChannelSpec(iter.into_iter().map(Into::into).collect())
    }
}

/// Columns in spec order; timestamps unchanged.
pub fn select_channels(chunk: &Chunk, spec: &ChannelSpec) -> Result<Chunk> {
    let idx = spec.resolve(chunk.channel_names())?;
    let names = channel_names(idx.iter().map(|&i| chunk.channel_names()[i].clone()));
    let data = chunk.data().select(Axis(1), &idx);
    Ok(chunk.with_channels(names, data))
}

/// Linear map from N_in input channels to named output channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMatrix {
    coefficients: Array2<f64>,
    names: Vec<String>,
}

impl SpatialMatrix {
    pub fn new(coefficients: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if coefficients.nrows() != names.len() {
            return Err(Error::DimensionMismatch { expected: coefficients.nrows(), got: names.len() });
        }
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("spatial filter coefficients must be finite".into()));
        }
        Ok(SpatialMatrix { coefficients, names })
    }

    /// Row vectors given as nested lists; outputs named `names` or `s0..`.
    pub fn from_rows(rows: &[Vec<f64>], names: Option<Vec<String>>) -> Result<Self> {
        let n_in = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n_in == 0 {
            return Err(Error::Schema("spatial filter matrix is empty".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n_in) {
            return Err(Error::DimensionMismatch { expected: n_in, got: bad.len() });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let coefficients = Array2::from_shape_vec((rows.len(), n_in), flat).expect("shape checked");
        let names = names.unwrap_or_else(|| (0..rows.len()).map(|i| format!("s{i}")).collect());
        SpatialMatrix::new(coefficients, names)
    }

    pub fn inputs(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coefficients
    }
}

/// Each sample row `v` becomes `m · v`.
pub fn spatial_filter(chunk: &Chunk, m: &SpatialMatrix) -> Result<Chunk> {
    if m.inputs() != chunk.channel_count() {
        return Err(Error::DimensionMismatch { expected: m.inputs(), got: chunk.channel_count() });
    }
    let data = chunk.data().dot(&m.coefficients.t());
    Ok(chunk.with_channels(channel_names(m.names.iter().cloned()), data))
}

/// Subtracts the reference channel from every channel, itself included.
pub fn rereference(chunk: &Chunk, reference: &ChannelSelector) -> Result<Chunk> {
    let r = reference.resolve(chunk.channel_names())?;
    let mut data = chunk.data().clone();
    for mut row in data.rows_mut() {
        let rv = row[r];
        row.mapv_inplace(|v| v - rv);
    }
    Ok(chunk.with_data(data))
}

/// Subtracts the instantaneous cross-channel mean.
pub fn common_average(chunk: &Chunk) -> Result<Chunk> {
    let n = chunk.channel_count();
    if n < 2 {
        return Err(Error::TooFewChannels(n));
    }
    let means: Array1<f64> = chunk.data().mean_axis(Axis(1)).unwrap_or_else(|| Array1::zeros(chunk.len()));
    let mut data = chunk.data().clone();
    for (mut row, m) in data.rows_mut().into_iter().zip(means.iter()) {
        row.mapv_inplace(|v| v - m);
    }
    Ok(chunk.with_data(data))
}
