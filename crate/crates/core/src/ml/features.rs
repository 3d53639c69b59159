use crate::error::{Error, Result};
use crate::types::FeatureVector;

/// Default timestamp tolerance between aggregated inputs, in seconds.
pub const DEFAULT_ALIGN_TOLERANCE: f64 = 0.004;

/// Concatenates `inputs` in order. The first input's timestamp is kept and
/// the first non-empty label wins.
pub fn aggregate_features(inputs: &[&FeatureVector], tolerance: f64) -> Result<FeatureVector> {
    let first = inputs.first().ok_or_else(|| Error::InvalidChunk("no feature inputs".into()))?;
    let mut values = Vec::new();
    let mut names = Vec::new();
    let mut label = None;
    for (i, v) in inputs.iter().enumerate() {
        if (v.timestamp - first.timestamp).abs() > tolerance {
            return Err(Error::MisalignedInputs(first.timestamp, v.timestamp));
        }
        values.extend_from_slice(&v.values);
        if v.names.len() == v.values.len() {
            names.extend(v.names.iter().cloned());
        } else {
            names.extend((0..v.values.len()).map(|k| format!("in{i}_{k}")));
        }
        if label.is_none() {
            label = v.label.clone();
        }
    }
    FeatureVector::new(first.timestamp, values, names, label)
}
