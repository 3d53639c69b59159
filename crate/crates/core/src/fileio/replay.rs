use crate::error::{Error, Result};
use crate::fileio::recording::{Recording, StreamKind};
use crate::types::{ChannelNames, Chunk, MarkerEvent, SamplingRate};

/// Longest span of samples emitted as one chunk, in recording seconds.
pub const MAX_REPLAY_CHUNK: f64 = 0.032;

#[derive(Debug)]
struct SignalCursor {
    names: ChannelNames,
    fs: f64,
    data: ndarray::Array2<f64>,
    /// Rebased, rate-scaled timestamps.
    times: Vec<f64>,
    pos: usize,
    max_rows: usize,
}

/// Output of one [`Replayer::poll`]: per signal stream, the chunks that
/// became due; plus due markers from all marker streams merged by time.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ReplayBatch {
    pub chunks: Vec<Vec<Chunk>>,
    pub markers: Vec<MarkerEvent>,
}

/// Paced playback of a loaded recording. Timestamps are rebased so the
/// earliest item is at 0, then divided by `rate`. A sample is due once its
/// sample period has elapsed on the pipeline clock, a marker once its
/// timestamp has.
#[derive(Debug)]
pub struct Replayer {
    signals: Vec<SignalCursor>,
    markers: Vec<MarkerEvent>,
    marker_pos: usize,
    rate: f64,
}

impl Replayer {
    pub fn new(recording: &Recording, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Schema(format!("replay rate must be positive, got {rate}")));
        }
        let origin = recording.start_time().unwrap_or(0.0);
        let rebase = |t: f64| (t - origin) / rate;
        let signals = recording
            .streams
            .iter()
            .filter(|s| s.kind == StreamKind::Signal)
            .map(|s| SignalCursor {
                names: s.names(),
                fs: s.fs * rate,
                data: s.samples.clone(),
                times: s.timestamps.iter().map(|&t| rebase(t)).collect(),
                pos: 0,
                max_rows: ((MAX_REPLAY_CHUNK * s.fs).floor() as usize).max(1),
            })
            .collect();
        let mut markers: Vec<MarkerEvent> = recording
            .streams
            .iter()
            .filter(|s| s.kind == StreamKind::Marker)
            .flat_map(|s| s.markers.iter())
            .map(|m| MarkerEvent { timestamp: rebase(m.timestamp), ..m.clone() })
            .collect();
        markers.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Ok(Replayer { signals, markers, marker_pos: 0, rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn signal_count(&self) -> usize {
        self.signals.len()
    }

    pub fn channel_names(&self, stream: usize) -> &ChannelNames {
        &self.signals[stream].names
    }

    /// Pipeline time at which everything has been emitted.
    pub fn end_time(&self) -> f64 {
        let s = self.signals.iter().filter_map(|c| c.times.last().map(|t| t + 1.0 / c.fs));
        let m = self.markers.last().map(|m| m.timestamp);
        s.chain(m).fold(0.0, f64::max)
    }

    pub fn is_finished(&self) -> bool {
        self.marker_pos == self.markers.len() && self.signals.iter().all(|c| c.pos == c.times.len())
    }

    pub fn poll(&mut self, clock: f64) -> Result<ReplayBatch> {
        let mut batch = ReplayBatch::default();
        for c in &mut self.signals {
            let period = 1.0 / c.fs;
            let start = c.pos;
            let end = start + c.times[start..].partition_point(|&t| t + period <= clock + 1e-12);
            let mut out = Vec::new();
            let mut a = start;
            while a < end {
                let b = (a + c.max_rows).min(end);
                out.push(Chunk::new(
                    c.times[a..b].to_vec(),
                    c.names.clone(),
                    c.data.slice(ndarray::s![a..b, ..]).to_owned(),
                    SamplingRate::Regular(c.fs),
                )?);
                a = b;
            }
            c.pos = end;
            batch.chunks.push(out);
        }
        let due = self.markers[self.marker_pos..].partition_point(|m| m.timestamp <= clock + 1e-12);
        batch.markers = self.markers[self.marker_pos..self.marker_pos + due].to_vec();
        self.marker_pos += due;
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fileio::recording::{RecordedStream, SourceFormat};
    use ndarray::Array2;

    fn rec(n: usize, fs: f64) -> Recording {
        let data = Array2::from_shape_fn((n, 2), |(r, c)| (r * 2 + c) as f64);
        let times = (0..n).map(|i| 10.0 + i as f64 / fs).collect();
        Recording {
            streams: vec![
                RecordedStream::signal("s", vec!["a".into(), "b".into()], fs, data, times),
                RecordedStream::markers("m", vec![MarkerEvent::new(11.0, "x", None).unwrap()]),
            ],
            format: SourceFormat::Xdf,
        }
    }

    #[test]
    fn pacing_bounds() {
        for (rate, end) in [(1.0, 2.0), (2.0, 1.0)] {
            let mut r = Replayer::new(&rec(500, 250.0), rate).unwrap();
            assert!((r.end_time() - end).abs() < 1e-9);
            let before = r.poll(end - 0.001).unwrap();
            assert!(!r.is_finished());
            let n: usize = before.chunks[0].iter().map(Chunk::len).sum();
            assert!(n < 500);
            r.poll(end).unwrap();
            assert!(r.is_finished());
        }
    }

    #[test]
    fn chunk_cap_and_values() {
        let recording = rec(500, 250.0);
        let mut r = Replayer::new(&recording, 1.0).unwrap();
        let b = r.poll(10.0).unwrap();
        assert!(b.chunks[0].iter().all(|c| c.len() <= 8));
        let all = Chunk::concat(&b.chunks[0]).unwrap();
        assert_eq!(all.data(), &recording.streams[0].samples);
        assert_eq!(b.markers.len(), 1);
        assert_eq!(b.markers[0].timestamp, 1.0);
    }
}
