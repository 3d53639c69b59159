//! NXL1 chunked binary log.
//!
//! Header: `"NXL1"`, u16 channel count, per channel a u16 byte length and
//! UTF-8 name, f64 sampling rate (0 if irregular), f64 start time. Then
//! fixed-size records of one f64 timestamp and one f32 per channel. All
//! little-endian.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::Chunk;

pub const BINLOG_MAGIC: &[u8; 4] = b"NXL1";
const FLUSH_EVERY: Duration = Duration::from_secs(1);

pub fn record_size(channels: usize) -> usize {
    8 + 4 * channels
}

pub struct BinLogWriter {
    path: PathBuf,
    out: Option<(BufWriter<File>, Vec<String>)>,
    records: u64,
    last_flush: Instant,
}

impl BinLogWriter {
    /// The file is created when the first chunk arrives; that chunk fixes
    /// the header.
    pub fn new(path: impl Into<PathBuf>) -> Self {
        BinLogWriter { path: path.into(), out: None, records: 0, last_flush: Instant::now() }
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn append(&mut self, chunk: &Chunk) -> Result<()> {
        if chunk.is_empty() {
            return Ok(());
        }
        if self.out.is_none() {
            if chunk.channel_count() > u16::MAX as usize {
                return Err(Error::Oversize(format!("{} channels", chunk.channel_count())));
            }
            let mut w = BufWriter::new(File::create(&self.path)?);
            w.write_all(BINLOG_MAGIC)?;
            w.write_all(&(chunk.channel_count() as u16).to_le_bytes())?;
            for name in chunk.channel_names().iter() {
                w.write_all(&(name.len() as u16).to_le_bytes())?;
                w.write_all(name.as_bytes())?;
            }
            w.write_all(&chunk.sampling_rate().hz().unwrap_or(0.0).to_le_bytes())?;
            w.write_all(&chunk.timestamps()[0].to_le_bytes())?;
            self.out = Some((w, chunk.channel_names().to_vec()));
        }
        let (w, names) = self.out.as_mut().unwrap();
        if names.as_slice() != &chunk.channel_names()[..] {
            return Err(Error::SchemaChanged { expected: names.clone(), got: chunk.channel_names().to_vec() });
        }
        for (t, row) in chunk.timestamps().iter().zip(chunk.data().rows()) {
            w.write_all(&t.to_le_bytes())?;
            for v in row {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        self.records += chunk.len() as u64;
        if self.last_flush.elapsed() >= FLUSH_EVERY {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some((w, _)) = self.out.as_mut() {
            w.flush()?;
        }
        self.last_flush = Instant::now();
        Ok(())
    }
}

impl Drop for BinLogWriter {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinLog {
    pub channel_names: Vec<String>,
    pub fs: f64,
    pub start_time: f64,
    pub timestamps: Vec<f64>,
    pub data: Array2<f32>,
}

pub fn parse_binlog(bytes: &[u8]) -> Result<BinLog> {
    let truncated = |need: usize| Error::Truncated { expected: need, got: bytes.len() };
    if bytes.len() < 6 {
        return Err(truncated(6));
    }
    if &bytes[..4] != BINLOG_MAGIC {
        return Err(Error::BadMagic { expected: "NXL1" });
    }
    let ch = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let mut at = 6;
    let mut names = Vec::with_capacity(ch);
    for _ in 0..ch {
        if bytes.len() < at + 2 {
            return Err(truncated(at + 2));
        }
        let len = u16::from_le_bytes([bytes[at], bytes[at + 1]]) as usize;
        at += 2;
        let raw = bytes.get(at..at + len).ok_or_else(|| truncated(at + len))?;
        names.push(String::from_utf8_lossy(raw).into_owned());
        at += len;
    }
    let tail = bytes.get(at..at + 16).ok_or_else(|| truncated(at + 16))?;
    let fs = f64::from_le_bytes(tail[..8].try_into().unwrap());
    let start_time = f64::from_le_bytes(tail[8..].try_into().unwrap());
    at += 16;
    let body = &bytes[at..];
    let size = record_size(ch);
    if !body.len().is_multiple_of(size) {
        return Err(Error::FileSizeMismatch { expected: body.len() / size + 1, got: body.len() / size });
    }
    let n = body.len() / size;
    let mut timestamps = Vec::with_capacity(n);
    let mut flat = Vec::with_capacity(n * ch);
    for rec in body.chunks_exact(size) {
        timestamps.push(f64::from_le_bytes(rec[..8].try_into().unwrap()));
        flat.extend(rec[8..].chunks_exact(4).map(|w| f32::from_le_bytes(w.try_into().unwrap())));
    }
    Ok(BinLog {
        channel_names: names,
        fs,
        start_time,
        timestamps,
        data: Array2::from_shape_vec((n, ch), flat).expect("rectangular"),
    })
}

pub fn read_binlog(path: &Path) -> Result<BinLog> {
    parse_binlog(&std::fs::read(path)?)
}
