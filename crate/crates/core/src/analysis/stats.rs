use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::types::{Epoch, FeatureVector};

/// Per-channel statistic over the time axis of an epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatKind {
    Mean,
    Median,
    Min,
    Max,
    Range,
    /// Population standard deviation (divides by N).
    Std,
    /// Linear interpolation between order statistics, `p` in [0, 1].
    Quantile(f64),
    Iqr,
}

impl StatKind {
    pub fn parse(name: &str, p: Option<f64>) -> Result<Self> {
        let kind = match name {
            "mean" => StatKind::Mean,
            "median" => StatKind::Median,
            "min" => StatKind::Min,
            "max" => StatKind::Max,
            "range" => StatKind::Range,
            "std" => StatKind::Std,
            "iqr" => StatKind::Iqr,
            "quantile" => {
                let p = p.ok_or_else(|| Error::Schema("quantile needs parameter p".into()))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Schema(format!("quantile p must be in [0, 1], got {p}")));
                }
                StatKind::Quantile(p)
            }
            other => return Err(Error::Schema(format!("unknown statistic '{other}'"))),
        };
        Ok(kind)
    }

    pub fn name(self) -> &'static str {
        match self {
            StatKind::Mean => "mean",
            StatKind::Median => "median",
            StatKind::Min => "min",
            StatKind::Max => "max",
            StatKind::Range => "range",
            StatKind::Std => "std",
            StatKind::Quantile(_) => "quantile",
            StatKind::Iqr => "iqr",
        }
    }

    /// Statistic of one sequence. Returns NaN on empty input.
    pub fn compute(self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return f64::NAN;
        }
        let n = values.len() as f64;
        match self {
            StatKind::Mean => values.iter().sum::<f64>() / n,
            StatKind::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            StatKind::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            StatKind::Range => StatKind::Max.compute(values) - StatKind::Min.compute(values),
            StatKind::Std => {
                let mean = values.iter().sum::<f64>() / n;
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
            }
            StatKind::Median => quantile(&sorted(values), 0.5),
            StatKind::Quantile(p) => quantile(&sorted(values), p),
            StatKind::Iqr => {
                let s = sorted(values);
                quantile(&s, 0.75) - quantile(&s, 0.25)
            }
        }
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatKind::Quantile(p) => write!(f, "quantile{p}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for StatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StatKind::parse(s, None)
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile of sorted data, interpolating at position `p * (n - 1)`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One value per channel, stamped with the epoch onset and labelled with the
/// epoch's trigger label.
pub fn univariate_stat(epoch: &Epoch, stat: StatKind) -> Result<FeatureVector> {
    univariate_stat_with(epoch, stat, ExecMode::default())
}

pub fn univariate_stat_with(epoch: &Epoch, stat: StatKind, mode: ExecMode) -> Result<FeatureVector> {
    if epoch.is_empty() {
        return Err(Error::EmptyEpoch);
    }
    let values = exec::map_columns(mode, &epoch.data, |col| match col.as_slice() {
        Some(s) => stat.compute(s),
        None => stat.compute(&col.to_vec()),
    });
    let names = epoch.channel_names.iter().map(|c| format!("{stat}_{c}")).collect();
    FeatureVector::new(epoch.onset, values, names, epoch.trigger.as_ref().map(|t| t.label.clone()))
}
