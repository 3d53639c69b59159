use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::analysis::window::WindowKind;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::types::{ChannelNames, Chunk, Epoch, SpectrumFrame, SpectrumScaling};

pub const DEFAULT_SEGMENT_LENGTH: usize = 256;
pub const DEFAULT_OVERLAP: f64 = 0.5;
/// Continuous input is analysed over this many segment lengths.
pub const ACCUMULATION_SEGMENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchParams {
    pub segment_length: usize,
    pub overlap: f64,
    pub window: WindowKind,
}

impl Default for WelchParams {
    fn default() -> Self {
        WelchParams { segment_length: DEFAULT_SEGMENT_LENGTH, overlap: DEFAULT_OVERLAP, window: WindowKind::Hanning }
    }
}

impl WelchParams {
    pub fn validate(&self) -> Result<()> {
        if self.segment_length < 8 {
            return Err(Error::Schema(format!("segment_length must be >= 8, got {}", self.segment_length)));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Schema(format!("overlap must be in [0, 1), got {}", self.overlap)));
        }
        Ok(())
    }

    /// Samples between consecutive segment starts.
    pub fn step(&self) -> usize {
        let overlap = (self.overlap * self.segment_length as f64).floor() as usize;
        (self.segment_length - overlap).max(1)
    }
}

fn forward_fft(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// Magnitude of the DFT at bins `0..=n/2` for every channel.
pub fn fft_magnitude(epoch: &Epoch) -> Result<SpectrumFrame> {
    fft_magnitude_with(epoch, ExecMode::default())
}

pub fn fft_magnitude_with(epoch: &Epoch, mode: ExecMode) -> Result<SpectrumFrame> {
    let n = epoch.len();
    if n < 2 {
        return Err(Error::EmptyEpoch);
    }
    let fft = forward_fft(n);
    let bins = n / 2 + 1;
    let rows = exec::map_columns(mode, &epoch.data, |col| {
        let mut buf: Vec<Complex64> = col.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.process(&mut buf);
        buf[..bins].iter().map(|c| c.norm()).collect::<Vec<f64>>()
    });
    Ok(SpectrumFrame {
        timestamp: epoch.onset,
        frequencies: (0..bins).map(|k| k as f64 * epoch.sampling_rate / n as f64).collect(),
        values: stack_rows(&rows, bins),
        channel_names: epoch.channel_names.clone(),
        scaling: SpectrumScaling::Magnitude,
    })
}

fn stack_rows(rows: &[Vec<f64>], bins: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), bins), |(c, k)| rows[c][k])
}

/// Welch estimate for one channel: mean-removed, windowed segments,
/// averaged one-sided periodograms in units²/Hz.
fn welch_channel(x: ArrayView1<'_, f64>, fs: f64, params: &WelchParams, window: &[f64], fft: &dyn Fft<f64>) -> Vec<f64> {
    let l = params.segment_length;
    let step = params.step();
    let bins = l / 2 + 1;
    let n_seg = (x.len() - l) / step + 1;
    let norm: f64 = window.iter().map(|w| w * w).sum::<f64>() * fs;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for s in 0..n_seg {
        let seg = x.slice(ndarray::s![s * step..s * step + l]);
        let mean = seg.sum() / l as f64;
        for ((b, &v), &w) in buf.iter_mut().zip(seg.iter()).zip(window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf[..bins]) {
            *a += c.norm_sqr();
        }
    }
    let nyquist_bin = if l.is_multiple_of(2) { Some(l / 2) } else { None };
    for (k, a) in acc.iter_mut().enumerate() {
        *a /= norm * n_seg as f64;
        if k != 0 && Some(k) != nyquist_bin {
            *a *= 2.0;
        }
    }
    acc
}

/// Welch PSD of a samples × channels block.
pub fn welch_psd_block(
    data: ArrayView2<'_, f64>,
    fs: f64,
    params: &WelchParams,
    mode: ExecMode,
) -> Result<(Vec<f64>, Array2<f64>)> {
    params.validate()?;
    if data.nrows() < params.segment_length {
        return Err(Error::TooShort { len: data.nrows(), segment: params.segment_length });
    }
    let l = params.segment_length;
    let window = params.window.weights(l);
    let fft = forward_fft(l);
    let bins = l / 2 + 1;
    let owned = data.to_owned();
    let rows = exec::map_columns(mode, &owned, |col| welch_channel(col, fs, params, &window, fft.as_ref()));
    let freqs = (0..bins).map(|k| k as f64 * fs / l as f64).collect();
    Ok((freqs, stack_rows(&rows, bins)))
}

/// Welch PSD of an epoch; the frame is stamped with the epoch onset.
pub fn welch_psd(epoch: &Epoch, params: &WelchParams) -> Result<SpectrumFrame> {
    let (frequencies, values) = welch_psd_block(epoch.data.view(), epoch.sampling_rate, params, ExecMode::default())?;
    Ok(SpectrumFrame {
        timestamp: epoch.onset,
        frequencies,
        values,
        channel_names: epoch.channel_names.clone(),
        scaling: SpectrumScaling::Density,
    })
}

/// Sliding-window Welch estimator for continuous signal. A frame covering
/// the latest `window_len` samples is produced every `hop` samples, so the
/// frames depend only on the sample sequence, not on how it was chunked.
#[derive(Debug, Clone)]
pub struct WelchAccumulator {
    params: WelchParams,
    window_len: usize,
    hop: usize,
    rows: VecDeque<Vec<f64>>,
    stamps: VecDeque<f64>,
    seen: u64,
    channels: Option<ChannelNames>,
    mode: ExecMode,
}

impl WelchAccumulator {
    pub fn new(params: WelchParams, hop: Option<usize>) -> Result<Self> {
        params.validate()?;
        let window_len = ACCUMULATION_SEGMENTS * params.segment_length;
        let hop = hop.unwrap_or(params.segment_length);
        if hop == 0 {
            return Err(Error::Schema("hop must be positive".into()));
        }
        Ok(WelchAccumulator {
            params,
            window_len,
            hop,
            rows: VecDeque::with_capacity(window_len),
            stamps: VecDeque::with_capacity(window_len),
            seen: 0,
            channels: None,
            mode: ExecMode::default(),
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn set_exec_mode(&mut self, mode: ExecMode) {
        self.mode = mode;
    }

    pub fn push(&mut self, chunk: &Chunk) -> Result<Vec<SpectrumFrame>> {
        let fs = chunk
            .sampling_rate()
            .hz()
            .ok_or_else(|| Error::InvalidChunk("PSD needs a regular sampling rate".into()))?;
        match &self.channels {
            None => self.channels = Some(chunk.channel_names().clone()),
            Some(names) if names.len() != chunk.channel_count() => {
                return Err(Error::ChannelCountChanged { expected: names.len(), got: chunk.channel_count() })
            }
            _ => {}
        }
        let mut frames = Vec::new();
        for (row, &t) in chunk.data().rows().into_iter().zip(chunk.timestamps()) {
            if self.rows.len() == self.window_len {
                self.rows.pop_front();
                self.stamps.pop_front();
            }
            self.rows.push_back(row.to_vec());
            self.stamps.push_back(t);
            self.seen += 1;
            let w = self.window_len as u64;
            if self.seen >= w && (self.seen - w).is_multiple_of(self.hop as u64) {
                frames.push(self.frame(fs)?);
            }
        }
        Ok(frames)
    }

    fn frame(&self, fs: f64) -> Result<SpectrumFrame> {
        let names = self.channels.clone().expect("channels set");
        let block = Array2::from_shape_fn((self.rows.len(), names.len()), |(r, c)| self.rows[r][c]);
        let (frequencies, values) = welch_psd_block(block.view(), fs, &self.params, self.mode)?;
        Ok(SpectrumFrame {
            timestamp: *self.stamps.back().expect("non-empty"),
            frequencies,
            values,
            channel_names: names,
            scaling: SpectrumScaling::Density,
        })
    }
}

/// Which part of the analytic signal to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HilbertOutput {
    #[default]
    Envelope,
    Phase,
}

/// Analytic signal by the frequency-domain method. Returns the envelope
/// and the instantaneous phase (radians, wrapped to (-π, π]).
pub fn hilbert_analytic(epoch: &Epoch) -> Result<(Epoch, Epoch)> {
    let n = epoch.len();
    if n < 8 {
        return Err(Error::EmptyEpoch);
    }
    let analytic = analytic_signal(epoch.data.view());
    let envelope = analytic.mapv(|c| c.norm());
    let phase = analytic.mapv(|c| c.arg());
    Ok((epoch.with_data(envelope), epoch.with_data(phase)))
}

/// Complex analytic signal, samples × channels. The real part is the input.
pub fn analytic_signal(data: ArrayView2<'_, f64>) -> Array2<Complex64> {
    let n = data.nrows();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut out = Array2::from_elem(data.dim(), Complex64::new(0.0, 0.0));
    for (c, col) in data.columns().into_iter().enumerate() {
        let mut buf: Vec<Complex64> = col.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fwd.process(&mut buf);
        for (k, b) in buf.iter_mut().enumerate() {
            let h = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                1.0
            } else if k < n.div_ceil(2) {
                2.0
            } else {
                0.0
            };
            *b *= h;
        }
        inv.process(&mut buf);
        for (r, b) in buf.iter().enumerate() {
            out[[r, c]] = Complex64::new(col[r], b.im / n as f64);
        }
    }
    out
}
