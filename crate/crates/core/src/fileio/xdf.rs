//! XDF reader: float32, double64 and string-marker streams.

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fileio::recording::{RecordedStream, Recording, SourceFormat};
use crate::types::MarkerEvent;

pub const TAG_FILE_HEADER: u16 = 1;
pub const TAG_STREAM_HEADER: u16 = 2;
pub const TAG_SAMPLES: u16 = 3;
pub const TAG_CLOCK_OFFSET: u16 = 4;
pub const TAG_BOUNDARY: u16 = 5;
pub const TAG_STREAM_FOOTER: u16 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Float32,
    Double64,
    Text,
}

#[derive(Debug)]
struct StreamState {
    name: String,
    channels: usize,
    srate: f64,
    format: Format,
    labels: Vec<String>,
    values: Vec<f64>,
    texts: Vec<String>,
    stamps: Vec<f64>,
    offsets: Vec<(f64, f64)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    /// Start of the chunk being parsed, for error reports.
    chunk_start: usize,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, message: impl Into<String>) -> Error {
        Error::CorruptChunk { offset: self.chunk_start as u64, message: message.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(self.corrupt(format!("needs {n} bytes at offset {}, file ends at {}", self.at, self.bytes.len())));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn varlen(&mut self) -> Result<u64> {
        let n = self.u8()?;
        let raw = self.take(match n {
            1 | 4 | 8 => n as usize,
            other => return Err(self.corrupt(format!("length field of {other} bytes"))),
        })?;
        let mut buf = [0u8; 8];
        buf[..raw.len()].copy_from_slice(raw);
        Ok(u64::from_le_bytes(buf))
    }
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b[..4].try_into().unwrap())
}

fn le_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b[..8].try_into().unwrap())
}

fn parse_header(xml: &str, offset: usize) -> Result<StreamState> {
    let corrupt = |m: String| Error::CorruptChunk { offset: offset as u64, message: m };
    let doc = roxmltree::Document::parse(xml).map_err(|e| corrupt(format!("stream header XML: {e}")))?;
    let info = doc.root_element();
    let text = |name: &str| {
        info.children()
            .find(|n| n.has_tag_name(name))
            .and_then(|n| n.text())
            .map(|s| s.trim().to_string())
    };
    let channels: usize = text("channel_count")
        .and_then(|s| s.parse().ok())
        .filter(|&c| c > 0)
        .ok_or_else(|| corrupt("stream header lacks a positive channel_count".into()))?;
    let srate: f64 = text("nominal_srate").and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let format = match text("channel_format").as_deref().unwrap_or("float32") {
        "float32" => Format::Float32,
        "double64" => Format::Double64,
        "string" => Format::Text,
        other => return Err(Error::UnsupportedSampleFormat(other.to_string())),
    };
    if format != Format::Text && !(srate > 0.0) {
        return Err(Error::UnsupportedSampleFormat("numeric stream with irregular rate".into()));
    }
    let mut labels: Vec<String> = info
        .descendants()
        .filter(|n| n.has_tag_name("channel"))
        .map(|c| {
            c.children()
                .find(|n| n.has_tag_name("label"))
                .and_then(|n| n.text())
                .unwrap_or("")
                .trim()
                .to_string()
        })
        .collect();
    if labels.len() != channels || labels.iter().any(String::is_empty) {
        labels = (0..channels).map(|i| format!("ch{i}")).collect();
    }
    Ok(StreamState {
        name: text("name").unwrap_or_default(),
        channels,
        srate,
        format,
        labels,
        values: Vec::new(),
        texts: Vec::new(),
        stamps: Vec::new(),
        offsets: Vec::new(),
    })
}

/// Offset at time `t`: piecewise-linear between measurements, constant
/// outside them.
fn offset_at(offsets: &[(f64, f64)], t: f64) -> f64 {
    match offsets {
        [] => 0.0,
        [only] => only.1,
        _ => {
            if t <= offsets[0].0 {
                return offsets[0].1;
            }
            let last = offsets[offsets.len() - 1];
            if t >= last.0 {
                return last.1;
            }
            let k = offsets.partition_point(|o| o.0 <= t);
            let (a, b) = (offsets[k - 1], offsets[k]);
            if b.0 == a.0 {
                b.1
            } else {
                a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
            }
        }
    }
}

pub fn parse_xdf(bytes: &[u8]) -> Result<Recording> {
    if bytes.len() < 4 || &bytes[..4] != b"XDF:" {
        return Err(Error::BadMagic { expected: "XDF:" });
    }
    let mut r = Reader { bytes, at: 4, chunk_start: 4 };
    let mut order: Vec<u32> = Vec::new();
    let mut streams: HashMap<u32, StreamState> = HashMap::new();
    while r.at < bytes.len() {
        r.chunk_start = r.at;
        let len = r.varlen()? as usize;
        if len < 2 {
            return Err(r.corrupt(format!("chunk length {len}")));
        }
        let body = r.take(len)?;
        let tag = u16::from_le_bytes([body[0], body[1]]);
        let content = &body[2..];
        let need = |n: usize| {
            if content.len() < n {
                Err(Error::CorruptChunk {
                    offset: r.chunk_start as u64,
                    message: format!("tag {tag} content shorter than {n} bytes"),
                })
            } else {
                Ok(())
            }
        };
        match tag {
            TAG_FILE_HEADER | TAG_BOUNDARY => {}
            TAG_STREAM_HEADER => {
                need(4)?;
                let id = le_u32(content);
                let xml = std::str::from_utf8(&content[4..]).map_err(|_| r.corrupt("stream header is not UTF-8"))?;
                let state = parse_header(xml, r.chunk_start)?;
                if streams.insert(id, state).is_some() {
                    return Err(r.corrupt(format!("stream {id} declared twice")));
                }
                order.push(id);
            }
            TAG_SAMPLES => {
                need(4)?;
                let id = le_u32(content);
                let Some(s) = streams.get_mut(&id) else {
                    return Err(r.corrupt(format!("samples for undeclared stream {id}")));
                };
                let mut sub = Reader { bytes: content, at: 4, chunk_start: r.chunk_start };
                let n = sub.varlen()?;
                for _ in 0..n {
                    let stamp = match sub.u8()? {
                        0 => None,
                        8 => Some(le_f64(sub.take(8)?)),
                        other => return Err(sub.corrupt(format!("timestamp field of {other} bytes"))),
                    };
                    let t = match (stamp, s.stamps.last()) {
                        (Some(t), _) => t,
                        (None, Some(prev)) if s.srate > 0.0 => prev + 1.0 / s.srate,
                        (None, Some(prev)) => *prev,
                        (None, None) => 0.0,
                    };
                    s.stamps.push(t);
                    match s.format {
                        Format::Float32 => {
                            let raw = sub.take(4 * s.channels)?;
                            s.values.extend(raw.chunks_exact(4).map(|w| f32::from_le_bytes(w.try_into().unwrap()) as f64));
                        }
                        Format::Double64 => {
                            let raw = sub.take(8 * s.channels)?;
                            s.values.extend(raw.chunks_exact(8).map(le_f64));
                        }
                        Format::Text => {
                            for c in 0..s.channels {
                                let len = sub.varlen()? as usize;
                                let text = String::from_utf8_lossy(sub.take(len)?).into_owned();
                                if c == 0 {
                                    s.texts.push(text);
                                }
                            }
                        }
                    }
                }
                if sub.at != content.len() {
                    return Err(r.corrupt(format!("{} unread bytes in samples chunk", content.len() - sub.at)));
                }
            }
            TAG_CLOCK_OFFSET => {
                need(20)?;
                let id = le_u32(content);
                let s = streams.get_mut(&id).ok_or_else(|| r.corrupt(format!("clock offset for undeclared stream {id}")))?;
                s.offsets.push((le_f64(&content[4..]), le_f64(&content[12..])));
            }
            TAG_STREAM_FOOTER => {}
            other => return Err(r.corrupt(format!("unknown tag {other}"))),
        }
    }

    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut s = streams.remove(&id).expect("declared");
        s.offsets.sort_by(|a, b| a.0.total_cmp(&b.0));
        let stamps: Vec<f64> = s.stamps.iter().map(|&t| t + offset_at(&s.offsets, t)).collect();
        match s.format {
            Format::Text => {
                let markers = stamps
                    .iter()
                    .zip(&s.texts)
                    .filter(|(_, l)| !l.is_empty())
                    .map(|(&t, l)| MarkerEvent::new(t, l.clone(), MarkerEvent::code_from_label(l)))
                    .collect::<Result<_>>()?;
                out.push(RecordedStream::markers(s.name, markers));
            }
            _ => {
                let rows = stamps.len();
                let samples = Array2::from_shape_vec((rows, s.channels), s.values).expect("row-major samples");
                out.push(RecordedStream::signal(s.name, s.labels, s.srate, samples, stamps));
            }
        }
    }
    Ok(Recording { streams: out, format: SourceFormat::Xdf })
}

pub fn read_xdf(path: &Path) -> Result<Recording> {
    parse_xdf(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_interpolation() {
        let o = [(0.0, 1.0), (10.0, 2.0)];
        assert_eq!(offset_at(&o, -5.0), 1.0);
        assert_eq!(offset_at(&o, 5.0), 1.5);
        assert_eq!(offset_at(&o, 50.0), 2.0);
        assert_eq!(offset_at(&[(3.0, 0.5)], 100.0), 0.5);
    }

    #[test]
    fn magic() {
        assert!(matches!(parse_xdf(b"ABCD"), Err(Error::BadMagic { .. })));
        assert!(parse_xdf(b"XDF:").unwrap().streams.is_empty());
    }
}
