//! Spectral estimates, analytic signal, tapering windows and per-epoch
//! statistics.

mod spectral;
mod stats;
mod window;

pub use spectral::{
    analytic_signal, fft_magnitude, fft_magnitude_with, hilbert_analytic, welch_psd, welch_psd_block,
    HilbertOutput, WelchAccumulator, WelchParams, ACCUMULATION_SEGMENTS, DEFAULT_OVERLAP, DEFAULT_SEGMENT_LENGTH,
};
pub use stats::{univariate_stat, univariate_stat_with, StatKind};
pub use window::{apply_window, WindowKind};
