//! Fixtures and helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use nxs_core::types::{channel_names, Chunk};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum of a few sines plus uniform noise, samples × channels.
pub fn seeded_signal(seconds: f64, fs: f64, channels: usize, seed: u64) -> Chunk {
    let mut r = rng(seed);
    let n = (seconds * fs).round() as usize;
    let comps: Vec<(f64, f64, f64)> =
        (0..4).map(|_| (r.gen_range(0.5..fs / 2.5), r.gen_range(0.2..2.0), r.gen_range(0.0..2.0 * PI))).collect();
    let data = Array2::from_shape_fn((n, channels), |(i, c)| {
        let t = i as f64 / fs;
        comps.iter().map(|(f, a, p)| a * (2.0 * PI * f * t + p + c as f64).sin()).sum::<f64>()
    });
    let noise = Array2::from_shape_fn((n, channels), |_| r.gen_range(-0.5..0.5));
    let names = channel_names((0..channels).map(|c| format!("ch{c}")));
    Chunk::regular(0.0, fs, names, data + noise).unwrap()
}

/// Random split of `0..n` into contiguous pieces of 1..=max rows; some
/// pieces are empty to exercise zero-length chunks.
pub fn random_chunking(n: usize, max: usize, r: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut a = 0;
    while a < n {
        let len = if r.gen_bool(0.05) { 0 } else { r.gen_range(1..=max) };
        let b = (a + len).min(n);
        out.push((a, b));
        a = b;
    }
    out
}

pub fn rms(data: &Array2<f64>) -> f64 {
    (data.iter().map(|v| v * v).sum::<f64>() / data.len().max(1) as f64).sqrt()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---- XDF ----

pub fn xdf_chunk(tag: u16, content: &[u8]) -> Vec<u8> {
    let len = content.len() + 2;
    let mut out = Vec::new();
    if len < 256 {
        out.push(1);
        out.push(len as u8);
    } else {
        out.push(4);
        out.extend_from_slice(&(len as u32).to_le_bytes());
    }
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(content);
    out
}

fn stream_header(id: u32, xml: &str) -> Vec<u8> {
    let mut c = id.to_le_bytes().to_vec();
    c.extend_from_slice(xml.as_bytes());
    xdf_chunk(2, &c)
}

/// Expected content of [`xdf_minimal`].
pub struct XdfExpected {
    pub labels: [&'static str; 2],
    pub fs: f64,
    pub timestamps: [f64; 4],
    pub values: [[f64; 2]; 4],
    pub marker_time: f64,
    pub marker_label: &'static str,
}

pub const XDF_EXPECTED: XdfExpected = XdfExpected {
    labels: ["C3", "C4"],
    fs: 100.0,
    // samples 3 and 4 carry no stamp and are deduced at 1/fs spacing
    timestamps: [5.0, 5.01, 5.02, 5.03],
    values: [[1.5, -2.0], [0.25, 4.0], [-1.0, 8.5], [3.0, 0.0]],
    marker_time: 5.02,
    marker_label: "S  7",
};

/// Float32 EEG stream with two labelled channels and a string marker stream.
pub fn xdf_minimal() -> Vec<u8> {
    let e = &XDF_EXPECTED;
    let mut out = b"XDF:".to_vec();
    out.extend(xdf_chunk(1, b"<?xml version=\"1.0\"?><info><version>1.0</version></info>"));
    out.extend(stream_header(
        1,
        "<?xml version=\"1.0\"?><info><name>EEG</name><type>EEG</type><channel_count>2</channel_count>\
         <nominal_srate>100</nominal_srate><channel_format>float32</channel_format>\
         <desc><channels><channel><label>C3</label></channel><channel><label>C4</label></channel></channels></desc></info>",
    ));
    out.extend(stream_header(
        2,
        "<?xml version=\"1.0\"?><info><name>Markers</name><channel_count>1</channel_count>\
         <nominal_srate>0</nominal_srate><channel_format>string</channel_format></info>",
    ));
    let mut s = 1u32.to_le_bytes().to_vec();
    s.extend_from_slice(&[1, 4]);
    for (i, row) in e.values.iter().enumerate() {
        if i < 2 {
            s.push(8);
            s.extend_from_slice(&e.timestamps[i].to_le_bytes());
        } else {
            s.push(0);
        }
        for v in row {
            s.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out.extend(xdf_chunk(3, &s));
    let mut m = 2u32.to_le_bytes().to_vec();
    m.extend_from_slice(&[1, 1, 8]);
    m.extend_from_slice(&e.marker_time.to_le_bytes());
    m.extend_from_slice(&[1, e.marker_label.len() as u8]);
    m.extend_from_slice(e.marker_label.as_bytes());
    out.extend(xdf_chunk(3, &m));
    out.extend(xdf_chunk(6, &1u32.to_le_bytes()));
    out
}

// ---- BrainVision ----

pub const BV_RAW: [[i16; 2]; 3] = [[100, -20], [-3, 7], [0, 32767]];
pub const BV_RES: [f64; 2] = [0.1, 0.5];

/// Writes header, marker and INT_16 data files; returns the `.vhdr` path.
/// Raw samples repeat [`BV_RAW`] to fill 1500 rows (3 s at 500 Hz).
pub fn write_brainvision(dir: &Path, stem: &str) -> PathBuf {
    let vhdr = format!(
        "Brain Vision Data Exchange Header File Version 1.0\n\
         ; comment line\n\n\
         [Common Infos]\nCodepage=UTF-8\nDataFile={stem}.eeg\nMarkerFile={stem}.vmrk\nDataFormat=BINARY\n\
         DataOrientation=MULTIPLEXED\nNumberOfChannels=2\nSamplingInterval=2000\n\n\
         [Binary Infos]\nBinaryFormat=INT_16\n\n\
         [Channel Infos]\nCh1=Fp1,,0.1,µV\nCh2=Fp2,,0.5,µV\n"
    );
    let vmrk = "Brain Vision Data Exchange Marker File, Version 1.0\n\n[Common Infos]\nCodepage=UTF-8\n\n\
                [Marker Infos]\nMk1=New Segment,,1,1,0,20240101120000000000\nMk2=Stimulus,S  1,1000,1,0\n\
                Mk3=Response,,1250,1,0\n";
    let mut eeg = Vec::new();
    for i in 0..1500 {
        for v in BV_RAW[i % 3] {
            eeg.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(dir.join(format!("{stem}.vhdr")), vhdr).unwrap();
    std::fs::write(dir.join(format!("{stem}.vmrk")), vmrk).unwrap();
    std::fs::write(dir.join(format!("{stem}.eeg")), eeg).unwrap();
    dir.join(format!("{stem}.vhdr"))
}

// ---- RDA ----

pub const RDA_GUID_BYTES: [u8; 16] =
    [0x8E, 0x45, 0x58, 0x43, 0x96, 0xC9, 0x86, 0x4C, 0xAF, 0x4A, 0x98, 0xBB, 0xF6, 0xC9, 0x14, 0x50];

fn rda_msg(kind: u32, body: &[u8]) -> Vec<u8> {
    let mut out = RDA_GUID_BYTES.to_vec();
    out.extend_from_slice(&((24 + body.len()) as u32).to_le_bytes());
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(body);
    out
}

/// Start message: 2 channels "Cz", "Pz", 2000 µs interval, resolutions 0.1 and 1.0.
pub fn rda_start_bytes() -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&2u32.to_le_bytes());
    b.extend_from_slice(&2000f64.to_le_bytes());
    b.extend_from_slice(&0.1f64.to_le_bytes());
    b.extend_from_slice(&1.0f64.to_le_bytes());
    b.extend_from_slice(b"Cz\0Pz\0");
    rda_msg(1, &b)
}

/// Float data message: block `block`, `points` points of 2 channels with
/// values `block*100 + point*2 + channel`, one marker at position 1 on
/// the first block.
pub fn rda_data_bytes(block: u32, points: u32) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&block.to_le_bytes());
    b.extend_from_slice(&points.to_le_bytes());
    let markers = u32::from(block == 0);
    b.extend_from_slice(&markers.to_le_bytes());
    for p in 0..points {
        for c in 0..2 {
            b.extend_from_slice(&((block * 100 + p * 2 + c) as f32).to_le_bytes());
        }
    }
    if markers == 1 {
        let kind = b"Stimulus\0";
        let desc = b"S  3\0";
        let size = 16 + kind.len() + desc.len();
        b.extend_from_slice(&(size as u32).to_le_bytes());
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&(-1i32).to_le_bytes());
        b.extend_from_slice(kind);
        b.extend_from_slice(desc);
    }
    rda_msg(4, &b)
}

pub fn rda_stop_bytes() -> Vec<u8> {
    rda_msg(3, &[])
}
