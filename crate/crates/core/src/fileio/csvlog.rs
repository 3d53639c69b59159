//! CSV logging. Signal files have the header `time,<ch1>,<ch2>,...`, one row
//! per sample; feature files `time,<feature names>,label`. Markers go to a
//! sibling `<stem>_markers.csv` with `time,label,code`. Numbers are written
//! in shortest round-trip form.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::{Chunk, FeatureVector, MarkerEvent};

const FLUSH_EVERY: Duration = Duration::from_secs(1);

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Path of the marker file that accompanies `path`.
pub fn markers_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("log");
    path.with_file_name(format!("{stem}_markers.csv"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Signal,
    Vector,
}

pub struct CsvSink {
    path: PathBuf,
    data: Option<(csv::Writer<File>, Layout, Vec<String>)>,
    markers: Option<csv::Writer<File>>,
    rows: u64,
    marker_rows: u64,
    last_flush: Instant,
}

impl CsvSink {
    /// Files are created lazily by the first item of each kind.
    pub fn new(path: impl Into<PathBuf>) -> Self {
        CsvSink { path: path.into(), data: None, markers: None, rows: 0, marker_rows: 0, last_flush: Instant::now() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn rows_written(&self) -> u64 {
        self.rows
    }

    pub fn markers_written(&self) -> u64 {
        self.marker_rows
    }

    fn writer(&mut self, layout: Layout, columns: &[String]) -> Result<&mut csv::Writer<File>> {
        match &self.data {
            None => {
                let mut w = csv::Writer::from_path(&self.path).map_err(csv_err)?;
                let mut header = vec!["time".to_string()];
                header.extend(columns.iter().cloned());
                if layout == Layout::Vector {
                    header.push("label".into());
                }
                w.write_record(&header).map_err(csv_err)?;
                self.data = Some((w, layout, columns.to_vec()));
            }
            Some((_, l, cols)) if *l != layout || cols.as_slice() != columns => {
                return Err(Error::SchemaChanged { expected: cols.clone(), got: columns.to_vec() });
            }
            Some(_) => {}
        }
        Ok(&mut self.data.as_mut().unwrap().0)
    }

    pub fn append_chunk(&mut self, chunk: &Chunk) -> Result<()> {
        let w = self.writer(Layout::Signal, chunk.channel_names())?;
        let mut rec = Vec::with_capacity(chunk.channel_count() + 1);
        for (t, row) in chunk.timestamps().iter().zip(chunk.data().rows()) {
            rec.clear();
            rec.push(t.to_string());
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec).map_err(csv_err)?;
        }
        self.rows += chunk.len() as u64;
        self.maybe_flush()
    }

    pub fn append_vector(&mut self, v: &FeatureVector) -> Result<()> {
        let w = self.writer(Layout::Vector, &v.names)?;
        let mut rec = vec![v.timestamp.to_string()];
        rec.extend(v.values.iter().map(f64::to_string));
        rec.push(v.label.clone().unwrap_or_default());
        w.write_record(&rec).map_err(csv_err)?;
        self.rows += 1;
        self.maybe_flush()
    }

    pub fn append_marker(&mut self, m: &MarkerEvent) -> Result<()> {
        if self.markers.is_none() {
            let mut w = csv::Writer::from_path(markers_path(&self.path)).map_err(csv_err)?;
            w.write_record(["time", "label", "code"]).map_err(csv_err)?;
            self.markers = Some(w);
        }
        let code = m.code.map(|c| c.to_string()).unwrap_or_default();
        self.markers
            .as_mut()
            .unwrap()
            .write_record([m.timestamp.to_string(), m.label.clone(), code])
            .map_err(csv_err)?;
        self.marker_rows += 1;
        self.maybe_flush()
    }

    fn maybe_flush(&mut self) -> Result<()> {
        if self.last_flush.elapsed() >= FLUSH_EVERY {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some((w, ..)) = self.data.as_mut() {
            w.flush()?;
        }
        if let Some(w) = self.markers.as_mut() {
            w.flush()?;
        }
        self.last_flush = Instant::now();
        Ok(())
    }
}

impl Drop for CsvSink {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

/// A signal CSV read back: channel names, times and samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTable {
    pub channel_names: Vec<String>,
    pub timestamps: Vec<f64>,
    pub data: Array2<f64>,
}

pub fn read_signal_csv(path: &Path) -> Result<SignalTable> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("time") {
        return Err(Error::Schema(format!("{}: first column must be 'time'", path.display())));
    }
    let names = header[1..].to_vec();
    let mut timestamps = Vec::new();
    let mut flat = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let mut fields = rec.iter().map(|f| {
            f.parse::<f64>().map_err(|_| Error::Schema(format!("non-numeric field '{f}' in {}", path.display())))
        });
        timestamps.push(fields.next().transpose()?.unwrap_or(f64::NAN));
        let before = flat.len();
        for f in fields {
            flat.push(f?);
        }
        if flat.len() - before != names.len() {
            return Err(Error::Schema(format!("row with {} values for {} channels", flat.len() - before, names.len())));
        }
    }
    let data = Array2::from_shape_vec((timestamps.len(), names.len()), flat).expect("rectangular");
    Ok(SignalTable { channel_names: names, timestamps, data })
}
