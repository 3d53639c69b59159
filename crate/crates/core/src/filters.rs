//! Causal IIR filters applied chunk by chunk.
//!
//! Designs are cascades of second-order sections evaluated in transposed
//! direct form II with 64-bit state. State starts at zero and carries across
//! chunks, so a signal filtered in pieces matches the same signal filtered
//! in one pass.

use std::f64::consts::PI;

use ndarray::ArrayViewMut1;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::types::{Chunk, SamplingRate};

pub const MAX_ORDER: usize = 16;
pub const DEFAULT_NOTCH_Q: f64 = 30.0;
pub const DECIMATOR_ORDER: usize = 8;
/// Anti-alias cutoff as a fraction of the post-decimation Nyquist frequency.
pub const DECIMATOR_CUTOFF_RATIO: f64 = 0.8;

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (self.a[0] + z_inv * self.a[1] + z2 * self.a[2])
    }

    /// Pole magnitudes of `1 + a1 z^-1 + a2 z^-2`.
    pub fn pole_radii(&self) -> [f64; 2] {
        let (a1, a2) = (self.a[1], self.a[2]);
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        let p1 = (-a1 + disc) / 2.0;
        let p2 = (-a1 - disc) / 2.0;
        [p1.norm(), p2.norm()]
    }

    #[inline]
    fn tick(&self, x: f64, z: &mut [f64; 2]) -> f64 {
        let y = self.b[0] * x + z[0];
        z[0] = self.b[1] * x - self.a[1] * y + z[1];
        z[1] = self.b[2] * x - self.a[2] * y;
        y
    }
}

/// A biquad cascade with per-channel delay state.
#[derive(Debug, Clone)]
pub struct SosCascade {
    sections: Vec<Biquad>,
    state: Vec<Vec<[f64; 2]>>,
    mode: ExecMode,
}

impl SosCascade {
    pub fn new(sections: Vec<Biquad>) -> Result<Self> {
        for (i, s) in sections.iter().enumerate() {
            let r = s.pole_radii();
            if !(r[0] < 1.0 && r[1] < 1.0) || !s.b.iter().chain(&s.a).all(|v| v.is_finite()) {
                return Err(Error::UnstableDesign(format!("section {i} has pole radii {:?}", r)));
            }
        }
        Ok(SosCascade { sections, state: Vec::new(), mode: ExecMode::default() })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn set_exec_mode(&mut self, mode: ExecMode) {
        self.mode = mode;
    }

    /// Number of channels the state was initialized for, if any.
    pub fn channels(&self) -> Option<usize> {
        if self.state.is_empty() {
            None
        } else {
            Some(self.state.len())
        }
    }

    pub fn reset(&mut self) {
        self.state.clear();
    }

    /// Complex gain at `freq` Hz for sampling rate `fs`.
    pub fn response(&self, freq: f64, fs: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / fs);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn gain(&self, freq: f64, fs: f64) -> f64 {
        self.response(freq, fs).norm()
    }

    fn ensure_state(&mut self, channels: usize) -> Result<()> {
        if self.state.is_empty() {
            self.state = vec![vec![[0.0; 2]; self.sections.len()]; channels];
        } else if self.state.len() != channels {
            return Err(Error::ChannelCountChanged { expected: self.state.len(), got: channels });
        }
        Ok(())
    }

    /// Filters one chunk, continuing from the state left by the previous one.
    pub fn apply(&mut self, chunk: &Chunk) -> Result<Chunk> {
        self.ensure_state(chunk.channel_count())?;
        let mut data = chunk.data().clone();
        let sections = &self.sections;
        exec::for_each_column_mut(self.mode, &mut data, &mut self.state, |col, st| {
            run_sections(sections, col, st)
        });
        Ok(chunk.with_data(data))
    }

    /// Filters a single-channel sequence using channel 0's state.
    pub fn apply_slice(&mut self, samples: &mut [f64]) -> Result<()> {
        self.ensure_state(1)?;
        run_sections(&self.sections, ArrayViewMut1::from(samples), &mut self.state[0]);
        Ok(())
    }
}

fn run_sections(sections: &[Biquad], mut col: ArrayViewMut1<'_, f64>, state: &mut [[f64; 2]]) {
    for v in col.iter_mut() {
        let mut x = *v;
        for (s, z) in sections.iter().zip(state.iter_mut()) {
            x = s.tick(x, z);
        }
        *v = x;
    }
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let k = Complex64::new(2.0 * fs, 0.0);
    (k + s) / (k - s)
}

fn prewarp(freq: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * freq / fs).tan()
}

/// Left-half-plane poles of the normalized analog Butterworth prototype.
fn prototype_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

/// Groups digital poles into denominator sections: conjugate pairs first,
/// remaining real poles two at a time (a lone real pole gets a first-order
/// section). Sections are ordered by increasing pole radius.
fn pole_sections(poles: &[Complex64]) -> Vec<[f64; 3]> {
    let scale = poles.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > tol).collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= tol).map(|p| p.re).collect();
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut out: Vec<(f64, [f64; 3])> = complex
        .iter()
        .map(|p| (p.norm(), [1.0, -2.0 * p.re, p.norm_sqr()]))
        .collect();
    for pair in real.chunks(2) {
        match pair {
            [p1, p2] => out.push((p1.abs().max(p2.abs()), [1.0, -(p1 + p2), p1 * p2])),
            [p] => out.push((p.abs(), [1.0, -p, 0.0])),
            _ => unreachable!(),
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.into_iter().map(|(_, a)| a).collect()
}

/// Scales the cascade so that `|H(freq)| == 1`, spreading the factor evenly
/// over the sections.
fn normalize_gain(sections: &mut [Biquad], freq: f64, fs: f64) {
    let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / fs);
    let g: f64 = sections.iter().map(|s| s.response(z_inv)).product::<Complex64>().norm();
    let per = g.powf(-1.0 / sections.len() as f64);
    for s in sections {
        for b in s.b.iter_mut() {
            *b *= per;
        }
    }
}

/// Butterworth band-pass of the given prototype order: analog prototype,
/// low-pass to band-pass transform on pre-warped edges, bilinear transform.
/// The cascade has `order` sections and -3 dB points at the two cutoffs.
pub fn design_butter_bandpass(lowcut: f64, highcut: f64, order: usize, fs: f64) -> Result<SosCascade> {
    if !(fs > 0.0 && lowcut > 0.0 && lowcut < highcut && highcut < fs / 2.0) {
        return Err(Error::InvalidBand(format!(
            "need 0 < lowcut < highcut < fs/2, got lowcut={lowcut}, highcut={highcut}, fs={fs}"
        )));
    }
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidBand(format!("order {order} outside 1..={MAX_ORDER}")));
    }
    let w1 = prewarp(lowcut, fs);
    let w2 = prewarp(highcut, fs);
    let bw = w2 - w1;
    let w0_sq = w1 * w2;
    let mut digital = Vec::with_capacity(2 * order);
    for p in prototype_poles(order) {
        let a = p * (bw / 2.0);
        let d = (a * a - w0_sq).sqrt();
        digital.push(bilinear(a + d, fs));
        digital.push(bilinear(a - d, fs));
    }
    let mut sections: Vec<Biquad> = pole_sections(&digital)
        .into_iter()
        .map(|a| Biquad { b: [1.0, 0.0, -1.0], a })
        .collect();
    // passband peak sits at the digital image of the analog centre frequency
    let center = fs / PI * (w0_sq.sqrt() / (2.0 * fs)).atan();
    normalize_gain(&mut sections, center, fs);
    SosCascade::new(sections)
}

/// Butterworth low-pass with unity DC gain.
pub fn design_butter_lowpass(cutoff: f64, order: usize, fs: f64) -> Result<SosCascade> {
    if !(fs > 0.0 && cutoff > 0.0 && cutoff < fs / 2.0) {
        return Err(Error::InvalidBand(format!("need 0 < cutoff < fs/2, got cutoff={cutoff}, fs={fs}")));
    }
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidBand(format!("order {order} outside 1..={MAX_ORDER}")));
    }
    let wc = prewarp(cutoff, fs);
    let digital: Vec<Complex64> = prototype_poles(order).into_iter().map(|p| bilinear(p * wc, fs)).collect();
    let mut sections: Vec<Biquad> = pole_sections(&digital)
        .into_iter()
        .map(|a| {
            let b = if a[2] == 0.0 { [1.0, 1.0, 0.0] } else { [1.0, 2.0, 1.0] };
            Biquad { b, a }
        })
        .collect();
    normalize_gain(&mut sections, 0.0, fs);
    SosCascade::new(sections)
}

/// Single-biquad notch at `freq` with quality factor `q`; unity gain at DC
/// and Nyquist.
pub fn design_notch(freq: f64, q: f64, fs: f64) -> Result<SosCascade> {
    if !(fs > 0.0 && freq > 0.0 && freq < fs / 2.0) {
        return Err(Error::InvalidBand(format!("need 0 < freq < fs/2, got freq={freq}, fs={fs}")));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidBand(format!("quality factor must be positive, got {q}")));
    }
    let w0 = 2.0 * PI * freq / fs;
    let beta = (w0 / q / 2.0).tan();
    let gain = 1.0 / (1.0 + beta);
    let c = w0.cos();
    let section = Biquad {
        b: [gain, -2.0 * gain * c, gain],
        a: [1.0, -2.0 * gain * c, 2.0 * gain - 1.0],
    };
    SosCascade::new(vec![section])
}

/// Anti-aliased integer-factor downsampler.
#[derive(Debug, Clone)]
pub struct Decimator {
    factor: usize,
    fs: f64,
    filter: SosCascade,
    /// Input samples seen so far, modulo `factor`.
    phase: usize,
}

impl Decimator {
    pub fn new(factor: usize, fs: f64) -> Result<Self> {
        if factor < 2 {
            return Err(Error::InvalidBand(format!("decimation factor must be >= 2, got {factor}")));
        }
        let cutoff = DECIMATOR_CUTOFF_RATIO * fs / (2.0 * factor as f64);
        let filter = design_butter_lowpass(cutoff, DECIMATOR_ORDER, fs)?;
        Ok(Decimator { factor, fs, filter, phase: 0 })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn output_rate(&self) -> f64 {
        self.fs / self.factor as f64
    }

    pub fn filter(&self) -> &SosCascade {
        &self.filter
    }

    pub fn set_exec_mode(&mut self, mode: ExecMode) {
        self.filter.set_exec_mode(mode);
    }

    /// Low-pass filters the chunk and keeps every `factor`-th sample,
    /// counting from the first sample ever seen. May return an empty chunk.
    pub fn process(&mut self, chunk: &Chunk) -> Result<Chunk> {
        let filtered = self.filter.apply(chunk)?;
        let first = (self.factor - self.phase) % self.factor;
        let keep: Vec<usize> = (first..chunk.len()).step_by(self.factor).collect();
        self.phase = (self.phase + chunk.len()) % self.factor;
        let data = filtered.data().select(ndarray::Axis(0), &keep);
        let timestamps = keep.iter().map(|&i| chunk.timestamps()[i]).collect();
        Ok(Chunk::from_parts(
            timestamps,
            chunk.channel_names().clone(),
            data,
            SamplingRate::Regular(self.output_rate()),
        ))
    }
}
