use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{channel_names, ChannelNames, Chunk, SamplingRate};

/// Pink-noise shaping filter (-10 dB/decade over roughly 0.001-0.47 fs),
/// applied to seeded white noise.
pub const PINK_B: [f64; 4] = [0.049922035, -0.095993537, 0.050612699, -0.004408786];
pub const PINK_A: [f64; 4] = [1.0, -2.494956002, 2.017265875, -0.522189400];
/// Simulated alpha rhythm frequency.
pub const ALPHA_HZ: f64 = 10.0;
/// Alpha sinusoid RMS relative to the pink-noise RMS.
pub const DEFAULT_ALPHA_RATIO: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorMode {
    Random,
    Oscillator,
    Simulation,
}

impl FromStr for GeneratorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(GeneratorMode::Random),
            "oscillator" => Ok(GeneratorMode::Oscillator),
            "simulation" => Ok(GeneratorMode::Simulation),
            other => Err(Error::Schema(format!("unknown generator mode '{other}'"))),
        }
    }
}

impl fmt::Display for GeneratorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorMode::Random => "random",
            GeneratorMode::Oscillator => "oscillator",
            GeneratorMode::Simulation => "simulation",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub mode: GeneratorMode,
    pub channels: usize,
    pub fs: f64,
    pub seed: u64,
    /// Oscillator frequency in Hz.
    pub frequency: f64,
    /// Oscillator amplitude; overall scale for the other modes.
    pub amplitude: f64,
    pub alpha_ratio: f64,
}

impl GeneratorConfig {
    pub fn new(mode: GeneratorMode, channels: usize, fs: f64) -> Self {
        GeneratorConfig {
            mode,
            channels,
            fs,
            seed: 0,
            frequency: ALPHA_HZ,
            amplitude: 1.0,
            alpha_ratio: DEFAULT_ALPHA_RATIO,
        }
    }

    pub fn oscillator(channels: usize, fs: f64, frequency: f64, amplitude: f64) -> Self {
        GeneratorConfig { frequency, amplitude, ..GeneratorConfig::new(GeneratorMode::Oscillator, channels, fs) }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Standard normal via Box-Muller from two 53-bit uniforms.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Sample source on the global grid `t = n / fs`. Random values are a pure
/// function of `(seed, n, channel)`, so any split of `[0, T)` into calls
/// yields the same samples.
#[derive(Debug, Clone)]
pub struct SignalGenerator {
    config: GeneratorConfig,
    names: ChannelNames,
    rng: ChaCha8Rng,
    pink_state: Vec<[f64; 3]>,
    pink_cursor: u64,
    pink_scale: f64,
    alpha_phase: Vec<f64>,
}

impl SignalGenerator {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        let names = channel_names((0..config.channels).map(|i| format!("ch{i}")));
        SignalGenerator::with_names(config, names)
    }

    pub fn with_names(config: GeneratorConfig, names: ChannelNames) -> Result<Self> {
        if !(config.fs > 0.0 && config.fs.is_finite()) {
            return Err(Error::Schema(format!("generator fs must be positive, got {}", config.fs)));
        }
        if config.channels == 0 || names.len() != config.channels {
            return Err(Error::Schema("generator needs at least one channel and one name per channel".into()));
        }
        let mut phase_rng = ChaCha8Rng::seed_from_u64(config.seed);
        phase_rng.set_stream(1);
        let alpha_phase = (0..config.channels)
            .map(|_| 2.0 * PI * (phase_rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
            .collect();
        Ok(SignalGenerator {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            pink_state: vec![[0.0; 3]; config.channels],
            pink_cursor: 0,
            pink_scale: 1.0 / pink_rms(),
            alpha_phase,
            names,
            config,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn channel_names(&self) -> &ChannelNames {
        &self.names
    }

    /// Oscillator value at time `t`.
    pub fn oscillator_value(&self, t: f64) -> f64 {
        self.config.amplitude * (2.0 * PI * self.config.frequency * t).sin()
    }

    /// First grid index with `n / fs >= t`.
    pub fn grid_index(&self, t: f64) -> u64 {
        let x = t * self.config.fs;
        let n = x.ceil().max(0.0) as u64;
        // guard against x landing a hair above an integer
        if n > 0 && ((n - 1) as f64 / self.config.fs) >= t {
            n - 1
        } else {
            n
        }
    }

    fn white_row(&mut self, n: u64, out: &mut [f64]) {
        // two words of 64 bits per value, four 32-bit words each
        self.rng.set_word_pos(n as u128 * self.config.channels as u128 * 4);
        for v in out.iter_mut() {
            *v = standard_normal(&mut self.rng);
        }
    }

    fn pink_row(&mut self, white: &mut [f64]) {
        for (x, z) in white.iter_mut().zip(self.pink_state.iter_mut()) {
            // transposed direct form II, third order
            let y = PINK_B[0] * *x + z[0];
            z[0] = PINK_B[1] * *x - PINK_A[1] * y + z[1];
            z[1] = PINK_B[2] * *x - PINK_A[2] * y + z[2];
            z[2] = PINK_B[3] * *x - PINK_A[3] * y;
            *x = y;
        }
    }

    fn seek_pink(&mut self, n: u64) {
        if n < self.pink_cursor {
            self.pink_state.iter_mut().for_each(|z| *z = [0.0; 3]);
            self.pink_cursor = 0;
        }
        let mut row = vec![0.0; self.config.channels];
        while self.pink_cursor < n {
            self.white_row(self.pink_cursor, &mut row);
            self.pink_row(&mut row);
            self.pink_cursor += 1;
        }
    }

    /// Samples at grid points in `[from_t, to_t)`.
    pub fn generate(&mut self, from_t: f64, to_t: f64) -> Chunk {
        let start = self.grid_index(from_t);
        let end = self.grid_index(to_t).max(start);
        self.generate_indices(start, end)
    }

    /// Samples `start..end` of the grid.
    pub fn generate_indices(&mut self, start: u64, end: u64) -> Chunk {
        let fs = self.config.fs;
        let ch = self.config.channels;
        let rows = (end - start) as usize;
        let mut data = Array2::zeros((rows, ch));
        let mut row = vec![0.0; ch];
        if self.config.mode == GeneratorMode::Simulation {
            self.seek_pink(start);
        }
        for (r, n) in (start..end).enumerate() {
            let t = n as f64 / fs;
            match self.config.mode {
                GeneratorMode::Oscillator => row.iter_mut().for_each(|v| *v = self.oscillator_value(t)),
                GeneratorMode::Random => {
                    self.white_row(n, &mut row);
                    row.iter_mut().for_each(|v| *v *= self.config.amplitude);
                }
                GeneratorMode::Simulation => {
                    self.white_row(n, &mut row);
                    self.pink_row(&mut row);
                    self.pink_cursor = n + 1;
                    let alpha_amp = self.config.alpha_ratio * std::f64::consts::SQRT_2;
                    for (c, v) in row.iter_mut().enumerate() {
                        let alpha = alpha_amp * (2.0 * PI * ALPHA_HZ * t + self.alpha_phase[c]).sin();
                        *v = self.config.amplitude * (*v * self.pink_scale + alpha);
                    }
                }
            }
            data.row_mut(r).assign(&ndarray::ArrayView1::from(&row[..]));
        }
        let timestamps = (start..end).map(|n| n as f64 / fs).collect();
        Chunk::from_parts(timestamps, self.names.clone(), data, SamplingRate::Regular(fs))
    }
}

/// RMS of the pink filter output for unit-variance white input, from the
/// energy of its impulse response.
fn pink_rms() -> f64 {
    let mut z = [0.0; 3];
    let mut energy = 0.0;
    for i in 0..200_000 {
        let x = if i == 0 { 1.0 } else { 0.0 };
        let y = PINK_B[0] * x + z[0];
        z[0] = PINK_B[1] * x - PINK_A[1] * y + z[1];
        z[1] = PINK_B[2] * x - PINK_A[2] * y + z[2];
        z[2] = PINK_B[3] * x - PINK_A[3] * y;
        energy += y * y;
    }
    energy.sqrt()
}
