//! BrainVision reader (.vhdr header, .vmrk markers, multiplexed .eeg data).

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fileio::recording::{RecordedStream, Recording, SourceFormat};
use crate::types::MarkerEvent;

/// Section name → key → value, keys in file order.
type Ini = HashMap<String, Vec<(String, String)>>;

fn parse_ini(text: &str) -> Ini {
    let mut out: Ini = HashMap::new();
    let mut section = String::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            out.entry(section.clone()).or_default();
        } else if let Some((k, v)) = line.split_once('=') {
            out.entry(section.clone()).or_default().push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    out
}

fn section<'a>(ini: &'a Ini, name: &str) -> Result<&'a [(String, String)]> {
    ini.get(name).map(Vec::as_slice).ok_or_else(|| Error::MissingSection(name.to_string()))
}

fn get<'a>(entries: &'a [(String, String)], key: &str) -> Option<&'a str> {
    entries.iter().find(|(k, _)| k.eq_ignore_ascii_case(key)).map(|(_, v)| v.as_str())
}

/// Indexed entries `<prefix><n>=...` sorted by n.
fn numbered<'a>(entries: &'a [(String, String)], prefix: &str) -> Vec<(usize, &'a str)> {
    let mut out: Vec<(usize, &str)> = entries
        .iter()
        .filter_map(|(k, v)| {
            let idx = k.strip_prefix(prefix)?.parse().ok()?;
            Some((idx, v.as_str()))
        })
        .collect();
    out.sort_by_key(|e| e.0);
    out
}

/// Commas inside names are written as `\1`.
fn unescape(s: &str) -> String {
    s.replace("\\1", ",")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinaryFormat {
    Float32,
    Int16,
}

pub fn read_brainvision(vhdr: &Path) -> Result<Recording> {
    let text = std::fs::read_to_string(vhdr)?;
    let dir = vhdr.parent().unwrap_or(Path::new("."));
    let ini = parse_ini(&text);
    let common = section(&ini, "Common Infos")?;
    let channels: usize = get(common, "NumberOfChannels")
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Schema("NumberOfChannels missing or invalid".into()))?;
    let interval: f64 = get(common, "SamplingInterval")
        .and_then(|v| v.parse().ok())
        .filter(|&v: &f64| v > 0.0)
        .ok_or_else(|| Error::Schema("SamplingInterval missing or invalid".into()))?;
    let fs = 1e6 / interval;
    if let Some(o) = get(common, "DataOrientation") {
        if !o.eq_ignore_ascii_case("MULTIPLEXED") {
            return Err(Error::UnsupportedBinaryFormat(format!("orientation {o}")));
        }
    }
    let format = match ini.get("Binary Infos").and_then(|b| get(b, "BinaryFormat")).unwrap_or("IEEE_FLOAT_32") {
        "IEEE_FLOAT_32" => BinaryFormat::Float32,
        "INT_16" => BinaryFormat::Int16,
        other => return Err(Error::UnsupportedBinaryFormat(other.to_string())),
    };

    let infos = numbered(section(&ini, "Channel Infos")?, "Ch");
    if infos.len() != channels {
        return Err(Error::Schema(format!("{} channel entries for {channels} channels", infos.len())));
    }
    let mut names = Vec::with_capacity(channels);
    let mut resolutions = Vec::with_capacity(channels);
    for (_, v) in &infos {
        let fields: Vec<&str> = v.split(',').collect();
        names.push(unescape(fields[0].trim()));
        let res = fields.get(2).map(|s| s.trim()).filter(|s| !s.is_empty()).unwrap_or("1");
        resolutions.push(res.parse::<f64>().map_err(|_| Error::Schema(format!("bad resolution '{res}'")))?);
    }

    let data_file = get(common, "DataFile").ok_or_else(|| Error::Schema("DataFile missing".into()))?;
    let raw = std::fs::read(dir.join(data_file))?;
    let width = match format {
        BinaryFormat::Float32 => 4,
        BinaryFormat::Int16 => 2,
    };
    let frame = width * channels;
    if raw.len() % frame != 0 {
        return Err(Error::FileSizeMismatch { expected: raw.len() / frame + 1, got: raw.len() / frame });
    }
    let rows = raw.len() / frame;
    let samples = Array2::from_shape_fn((rows, channels), |(r, c)| {
        let at = r * frame + c * width;
        let v = match format {
            BinaryFormat::Float32 => f32::from_le_bytes(raw[at..at + 4].try_into().unwrap()) as f64,
            BinaryFormat::Int16 => i16::from_le_bytes([raw[at], raw[at + 1]]) as f64,
        };
        v * resolutions[c]
    });
    let timestamps = (0..rows).map(|i| i as f64 / fs).collect();
    let mut streams = vec![RecordedStream::signal("eeg", names, fs, samples, timestamps)];

    if let Some(mrk) = get(common, "MarkerFile") {
        let text = std::fs::read_to_string(dir.join(mrk))?;
        streams.push(RecordedStream::markers("markers", parse_vmrk(&text, fs)?));
    }
    Ok(Recording { streams, format: SourceFormat::BrainVision })
}

/// `Mk<n>=<type>,<description>,<position>,<size>,<channel>[,<date>]`;
/// the event time is `position / fs`. Segment boundaries are skipped.
pub fn parse_vmrk(text: &str, fs: f64) -> Result<Vec<MarkerEvent>> {
    let ini = parse_ini(text);
    let entries = section(&ini, "Marker Infos")?;
    let mut out = Vec::new();
    for (n, v) in numbered(entries, "Mk") {
        let fields: Vec<&str> = v.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::Schema(format!("Mk{n} has {} fields", fields.len())));
        }
        let kind = fields[0].trim();
        if kind.eq_ignore_ascii_case("New Segment") {
            continue;
        }
        let description = unescape(fields[1]);
        let label = if description.trim().is_empty() { kind.to_string() } else { description };
        let position: u64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::Schema(format!("Mk{n} position '{}'", fields[2])))?;
        let code = MarkerEvent::code_from_label(&label);
        out.push(MarkerEvent::new(position as f64 / fs, label, code)?);
    }
    out.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers() {
        let text = "[Marker Infos]\nMk1=New Segment,,1,1,0,20240101\nMk2=Stimulus,S  1,1000,1,0\n";
        let m = parse_vmrk(text, 500.0).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].timestamp, 2.0);
        assert_eq!(m[0].label, "S  1");
        assert_eq!(m[0].code, Some(1));
        assert!(matches!(parse_vmrk("", 500.0), Err(Error::MissingSection(_))));
    }
}
