//! Recording readers, paced replay and logging sinks.

pub mod binlog;
pub mod brainvision;
pub mod csvlog;
mod recording;
pub mod replay;
pub mod xdf;

pub use binlog::{read_binlog, BinLog, BinLogWriter};
pub use brainvision::read_brainvision;
pub use csvlog::{markers_path, read_signal_csv, CsvSink, SignalTable};
pub use recording::{RecordedStream, Recording, SourceFormat, StreamKind};
pub use replay::{ReplayBatch, Replayer};
pub use xdf::{parse_xdf, read_xdf};

use std::path::Path;

/// Loads a recording, choosing the reader by file extension.
pub fn read_recording(path: &Path) -> crate::Result<Recording> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("xdf") => read_xdf(path),
        Some("vhdr") => read_brainvision(path),
        _ => Err(crate::Error::Schema(format!("{}: expected a .xdf or .vhdr file", path.display()))),
    }
}
