use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::types::Epoch;

/// Symmetric tapering windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowKind {
    Blackman,
    #[default]
    Hanning,
    Hamming,
    Triangular,
}

impl WindowKind {
    pub const ALL: [WindowKind; 4] =
        [WindowKind::Blackman, WindowKind::Hanning, WindowKind::Hamming, WindowKind::Triangular];

    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Blackman => "blackman",
            WindowKind::Hanning => "hanning",
            WindowKind::Hamming => "hamming",
            WindowKind::Triangular => "triangular",
        }
    }

    /// Window weights of length `n`.
    pub fn weights(self, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![1.0];
        }
        let m = (n - 1) as f64;
        (0..n)
            .map(|i| {
                let x = i as f64;
                match self {
                    WindowKind::Hanning => 0.5 - 0.5 * (2.0 * PI * x / m).cos(),
                    WindowKind::Hamming => 0.54 - 0.46 * (2.0 * PI * x / m).cos(),
                    WindowKind::Blackman => {
                        0.42 - 0.5 * (2.0 * PI * x / m).cos() + 0.08 * (4.0 * PI * x / m).cos()
                    }
                    // non-zero endpoints: 1 - |2i - (n-1)| / L with L = n+1 (odd) or n (even)
                    WindowKind::Triangular => {
                        let l = if n % 2 == 1 { (n + 1) as f64 } else { n as f64 };
                        1.0 - (2.0 * x - m).abs() / l
                    }
                }
            })
            .collect()
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blackman" => Ok(WindowKind::Blackman),
            "hanning" | "hann" => Ok(WindowKind::Hanning),
            "hamming" => Ok(WindowKind::Hamming),
            "triangular" | "triang" => Ok(WindowKind::Triangular),
            other => Err(Error::Schema(format!("unknown window '{other}'"))),
        }
    }
}

/// Multiplies every channel of the epoch by the window.
pub fn apply_window(epoch: &Epoch, kind: WindowKind) -> Result<Epoch> {
    if epoch.is_empty() {
        return Err(Error::EmptyEpoch);
    }
    let w = kind.weights(epoch.len());
    let mut data = epoch.data.clone();
    for (mut row, wi) in data.rows_mut().into_iter().zip(&w) {
        row.mapv_inplace(|v| v * wi);
    }
    Ok(epoch.with_data(data))
}
