//! Acceptance suite. Runs every criterion in sequence, prints one
//! PASS/FAIL line each and exits non-zero if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::net::TcpListener;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{s, Array2};
use nxs_core::analysis::{fft_magnitude, welch_psd, WelchAccumulator, WelchParams, WindowKind};
use nxs_core::dsl::{build_pipeline, load_pipeline, parse_pipeline};
use nxs_core::epoching::{Epocher, StimCode};
use nxs_core::fileio::{parse_xdf, read_brainvision, RecordedStream, Recording, SourceFormat};
use nxs_core::filters::{design_butter_bandpass, design_notch, Decimator};
use nxs_core::graph::{Pacing, Pipeline, PipelineClock, Termination};
use nxs_core::ml::lda_fit;
use nxs_core::net::{frame_decode, frame_encode, rda_decode, RdaClient, RdaClientConfig, RdaEvent, RdaMessage, SignalBlock, WireItem};
use nxs_core::nodes::{Collector, ReaderNode};
use nxs_core::types::{channel_names, Chunk, Epoch, FeatureVector, MarkerEvent};
use nxs_core::Error;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1. Oscillator power chain written to CSV.
fn oscillator_feedback_chain() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let text = r#"
[node.osc]
kind = "Generator"
mode = "oscillator"
channels = 1
fs = 250.0
freq = 10.0
amplitude = 1.0

[node.alpha]
kind = "ButterFilter"
input = "osc"
lowcut = 8
highcut = 12
order = 4

[node.square]
kind = "ApplyFunction"
input = "alpha"
expr = "x^2"

[node.epochs]
kind = "TimeBasedEpoching"
input = "square"
duration = 1.0
interval = 0.5

[node.power]
kind = "UnivariateStat"
input = "epochs"
stat = "mean"

[node.log]
kind = "ToCsv"
input = "power"
file = "power.csv"
"#;
    let mut p = build_pipeline(&parse_pipeline(text).map_err(err)?, dir.path()).map_err(err)?;
    let t0 = Instant::now();
    p.run(&Termination::duration(20.0), Pacing::Accelerated).into_result().map_err(err)?;
    let runtime = t0.elapsed().as_secs_f64();
    let mut reader = csv::Reader::from_path(dir.path().join("power.csv")).map_err(err)?;
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(err)?;
        values.push(rec[1].parse::<f64>().map_err(err)?);
    }
    ensure!(values.len() >= 38, "only {} epochs logged", values.len());
    let worst = values[2..].iter().map(|v| (v - 0.5).abs() / 0.5).fold(0.0, f64::max);
    ensure!(worst <= 0.10, "worst relative deviation {worst:.4}");
    ensure!(runtime < 5.0, "runtime {runtime:.2} s");
    Ok(format!("{} epochs, worst deviation {:.2}%, runtime {runtime:.3} s", values.len(), worst * 100.0))
}

/// Cuts `sig` into the contiguous pieces given by `bounds`.
fn cut(sig: &Chunk, bounds: &[(usize, usize)]) -> Vec<Chunk> {
    bounds.iter().map(|&(a, b)| sig.slice(a, b)).collect()
}

fn epochs_streamed(mut e: Epocher, parts: &[Chunk], markers: &[MarkerEvent]) -> Result<Vec<Epoch>, Error> {
    let mut next = 0;
    let mut out = Vec::new();
    for p in parts {
        let end = p.timestamps().last().copied().unwrap_or(f64::NEG_INFINITY);
        let due = markers[next..].partition_point(|m| m.timestamp <= end);
        out.extend(e.push(Some(p), &markers[next..next + due])?);
        next += due;
    }
    out.extend(e.push(None, &markers[next..])?);
    Ok(out)
}

// 2. Chunk-size invariance for every stateful processor.
fn chunking_invariance() -> Outcome {
    let fs = 250.0;
    let sig = common::seeded_signal(30.0, fs, 4, 2024);
    let tol = 1e-9 * common::rms(sig.data());
    let markers: Vec<MarkerEvent> = (0..40)
        .map(|i| {
            let t = 0.35 + i as f64 * 0.71;
            let code = 1 + (i % 3);
            MarkerEvent::new(t, format!("S  {code}"), Some(code)).unwrap()
        })
        .collect();
    let welch = WelchParams { segment_length: 128, overlap: 0.5, window: WindowKind::Hanning };
    let epochers: [fn() -> Epocher; 3] = [
        || Epocher::time_based(1.0, 0.3).unwrap(),
        || Epocher::marker_based(0.8).unwrap(),
        || Epocher::stimulation_based(StimCode::Code(2), 0.6, 0.1).unwrap(),
    ];

    let ref_butter = design_butter_bandpass(8.0, 12.0, 4, fs).map_err(err)?.apply(&sig).map_err(err)?;
    let ref_notch = design_notch(50.0, 30.0, fs).map_err(err)?.apply(&sig).map_err(err)?;
    let ref_dec = Decimator::new(3, fs).map_err(err)?.process(&sig).map_err(err)?;
    let ref_epochs: Vec<Vec<Epoch>> = epochers
        .iter()
        .map(|m| epochs_streamed(m(), std::slice::from_ref(&sig), &markers))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let ref_psd = WelchAccumulator::new(welch, Some(125)).map_err(err)?.push(&sig).map_err(err)?;
    ensure!(ref_epochs.iter().all(|e| !e.is_empty()) && !ref_psd.is_empty(), "empty reference output");

    let mut r = common::rng(77);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let max = [1, 7, 64, 300, 2000][trial % 5];
        let parts = cut(&sig, &common::random_chunking(sig.len(), max, &mut r));

        let mut f = design_butter_bandpass(8.0, 12.0, 4, fs).map_err(err)?;
        let out: Vec<Chunk> = parts.iter().map(|p| f.apply(p)).collect::<Result<_, _>>().map_err(err)?;
        worst = worst.max(common::max_abs_diff(Chunk::concat(&out).map_err(err)?.data(), ref_butter.data()));

        let mut f = design_notch(50.0, 30.0, fs).map_err(err)?;
        let out: Vec<Chunk> = parts.iter().map(|p| f.apply(p)).collect::<Result<_, _>>().map_err(err)?;
        worst = worst.max(common::max_abs_diff(Chunk::concat(&out).map_err(err)?.data(), ref_notch.data()));

        let mut d = Decimator::new(3, fs).map_err(err)?;
        let out: Vec<Chunk> = parts.iter().map(|p| d.process(p)).collect::<Result<_, _>>().map_err(err)?;
        let joined = Chunk::concat(&out).map_err(err)?;
        ensure!(joined.timestamps() == ref_dec.timestamps(), "decimator timestamps differ (trial {trial})");
        worst = worst.max(common::max_abs_diff(joined.data(), ref_dec.data()));

        for (k, make) in epochers.iter().enumerate() {
            let got = epochs_streamed(make(), &parts, &markers).map_err(err)?;
            ensure!(got.len() == ref_epochs[k].len(), "epocher {k}: {} vs {} epochs", got.len(), ref_epochs[k].len());
            for (g, e) in got.iter().zip(&ref_epochs[k]) {
                ensure!(g.onset == e.onset && g.trigger == e.trigger, "epocher {k}: onset or trigger differs");
                worst = worst.max(common::max_abs_diff(&g.data, &e.data));
            }
        }

        let mut acc = WelchAccumulator::new(welch, Some(125)).map_err(err)?;
        let mut frames = Vec::new();
        for p in &parts {
            frames.extend(acc.push(p).map_err(err)?);
        }
        ensure!(frames.len() == ref_psd.len(), "psd: {} vs {} frames", frames.len(), ref_psd.len());
        for (g, e) in frames.iter().zip(&ref_psd) {
            ensure!(g.timestamp == e.timestamp, "psd frame timestamp differs");
            worst = worst.max(common::max_abs_diff(&g.values, &e.values));
        }
        ensure!(worst <= tol, "max error {worst:e} exceeds {tol:e} (trial {trial})");
    }
    Ok(format!("50 chunkings x 7 processors, max error {worst:.2e} (limit {tol:.2e})"))
}

/// Steady-state amplitude ratio of a filtered sine, measured after the transient.
fn measured_gain(mut f: nxs_core::filters::SosCascade, freq: f64, fs: f64) -> Result<f64, String> {
    let n = (40.0 * fs) as usize;
    let x = Array2::from_shape_fn((n, 1), |(i, _)| (2.0 * PI * freq * i as f64 / fs).sin());
    let chunk = Chunk::regular(0.0, fs, channel_names(["x"]), x).map_err(err)?;
    let y = f.apply(&chunk).map_err(err)?;
    let tail = y.data().slice(s![n / 2.., ..]).to_owned();
    Ok(common::rms(&tail) * 2f64.sqrt())
}

// 3. Filter magnitude responses.
fn filter_responses() -> Outcome {
    let fs = 512.0;
    let bp = design_butter_bandpass(8.0, 12.0, 4, fs).map_err(err)?;
    let notch = design_notch(50.0, 30.0, fs).map_err(err)?;
    let (g98, g1, g50) = (
        measured_gain(bp.clone(), 9.8, fs)?,
        measured_gain(bp.clone(), 1.0, fs)?,
        measured_gain(bp.clone(), 50.0, fs)?,
    );
    for (f, m) in [(9.8, g98), (1.0, g1), (50.0, g50)] {
        ensure!((bp.gain(f, fs) - m).abs() < 1e-3, "measured {m} vs analytic {} at {f} Hz", bp.gain(f, fs));
    }
    ensure!(g98 >= 0.95, "gain at 9.8 Hz {g98}");
    ensure!(g1 <= 0.01 && g50 <= 0.01, "stopband gains {g1} / {g50}");
    let att_db = -20.0 * notch.gain(50.0, fs).log10();
    let measured_db = -20.0 * measured_gain(notch.clone(), 50.0, fs)?.max(1e-300).log10();
    let dc = notch.gain(0.0, fs);
    ensure!(att_db >= 20.0 && measured_db >= 20.0, "notch attenuation {att_db} dB (measured {measured_db} dB)");
    ensure!((dc - 1.0).abs() <= 1e-6, "notch DC gain {dc}");
    Ok(format!(
        "bandpass |H| 9.8 Hz {g98:.4}, 1 Hz {g1:.2e}, 50 Hz {g50:.2e}; notch {:.1} dB at 50 Hz, DC {dc:.9}",
        att_db.min(999.0)
    ))
}

fn epoch_of(data: Array2<f64>, fs: f64) -> Epoch {
    let names = channel_names((0..data.ncols()).map(|c| format!("c{c}")));
    Epoch { onset: 0.0, trigger: None, data, channel_names: names, sampling_rate: fs }
}

// 4. FFT, Parseval and Welch.
fn spectral_suite() -> Outcome {
    let mut r = common::rng(4);
    let mut worst_dft = 0.0f64;
    let mut worst_parseval = 0.0f64;
    for case in 0..1000 {
        let n = r.gen_range(2..=64usize);
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
        let frame = fft_magnitude(&epoch_of(Array2::from_shape_vec((n, 1), x.clone()).map_err(err)?, 100.0))
            .map_err(err)?;
        let mags = frame.values.row(0);
        for k in 0..=n / 2 {
            let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, v)| {
                let a = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                (re + v * a.cos(), im + v * a.sin())
            });
            let m = (re * re + im * im).sqrt();
            let rel = (mags[k] - m).abs() / m.max(1e-12);
            worst_dft = worst_dft.max(if m < 1e-9 { (mags[k] - m).abs() } else { rel });
        }
        let time_energy: f64 = x.iter().map(|v| v * v).sum();
        let freq_energy: f64 = (0..=n / 2)
            .map(|k| {
                let twice = k != 0 && !(n % 2 == 0 && k == n / 2);
                mags[k] * mags[k] * if twice { 2.0 } else { 1.0 }
            })
            .sum::<f64>()
            / n as f64;
        worst_parseval = worst_parseval.max((time_energy - freq_energy).abs() / time_energy);
        ensure!(worst_dft <= 1e-9, "DFT mismatch {worst_dft:e} at case {case} (n={n})");
        ensure!(worst_parseval <= 1e-9, "Parseval error {worst_parseval:e} at case {case}");
    }

    let fs = 250.0;
    let x = Array2::from_shape_fn((2500, 1), |(i, _)| (2.0 * PI * 10.0 * i as f64 / fs).sin());
    let params = WelchParams { segment_length: 250, overlap: 0.5, window: WindowKind::Hanning };
    let psd = welch_psd(&epoch_of(x, fs), &params).map_err(err)?;
    let row = psd.values.row(0);
    let peak = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
    let df = psd.frequencies[1] - psd.frequencies[0];
    let power: f64 = row.sum() * df;
    ensure!(psd.frequencies[peak] == 10.0, "peak at {} Hz", psd.frequencies[peak]);
    ensure!((power - 0.5).abs() <= 0.025, "integrated power {power}");
    Ok(format!(
        "DFT rel err {worst_dft:.1e}, Parseval {worst_parseval:.1e}, Welch peak {} Hz, power {power:.4}",
        psd.frequencies[peak]
    ))
}

// 5. Epoch counting against direct slices.
fn epoch_counting() -> Outcome {
    let sig = common::seeded_signal(10.0, 250.0, 3, 5);
    let mut e = Epocher::time_based(1.0, 0.5).map_err(err)?;
    let epochs = e.push(Some(&sig), &[]).map_err(err)?;
    ensure!(epochs.len() == 19, "{} epochs", epochs.len());
    for (k, ep) in epochs.iter().enumerate() {
        ensure!(ep.len() == 250, "epoch {k} has {} samples", ep.len());
        let direct = sig.data().slice(s![k * 125..k * 125 + 250, ..]).to_owned();
        let same = ep.data.iter().zip(direct.iter()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure!(same, "epoch {k} differs from direct slice");
        ensure!(ep.onset == sig.timestamps()[k * 125], "epoch {k} onset {}", ep.onset);
    }
    Ok("19 epochs x 250 samples, bit-identical".into())
}

fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = r.gen_range(f64::EPSILON..1.0);
    let u2: f64 = r.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

// 6. LDA on two Gaussian classes.
fn lda_two_gaussians() -> Outcome {
    let mut r = common::rng(6);
    let rows: Vec<FeatureVector> = (0..200)
        .map(|i| {
            let (label, mx) = if i % 2 == 0 { ("neg", -1.0) } else { ("pos", 1.0) };
            let v = vec![mx + 0.3 * gaussian(&mut r), 0.3 * gaussian(&mut r)];
            FeatureVector::new(i as f64, v, vec!["x".into(), "y".into()], Some(label.into())).unwrap()
        })
        .collect();
    let model = lda_fit(&rows, 1e-6).map_err(err)?;
    let mut correct = 0;
    let mut worst_sum = 0.0f64;
    for v in &rows {
        let k = model.predict_index(&v.values).map_err(err)?;
        if Some(&model.labels[k]) == v.label.as_ref() {
            correct += 1;
        }
        let p = model.probabilities(&v.values).map_err(err)?;
        worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    let accuracy = correct as f64 / rows.len() as f64;

    // closed form from sample statistics
    let class = |l: &str| rows.iter().filter(|v| v.label.as_deref() == Some(l)).collect::<Vec<_>>();
    let (a, b) = (class("neg"), class("pos"));
    let mean = |c: &[&FeatureVector]| {
        [0, 1].map(|d| c.iter().map(|v| v.values[d]).sum::<f64>() / c.len() as f64)
    };
    let (m0, m1) = (mean(&a), mean(&b));
    let mut cov = [[0.0; 2]; 2];
    for (group, mu) in [(&a, m0), (&b, m1)] {
        for v in group.iter() {
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += (v.values[i] - mu[i]) * (v.values[j] - mu[j]) / (rows.len() - 2) as f64;
                }
            }
        }
    }
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let dm = [m1[0] - m0[0], m1[1] - m0[1]];
    let expected = [(cov[1][1] * dm[0] - cov[0][1] * dm[1]) / det, (cov[0][0] * dm[1] - cov[1][0] * dm[0]) / det];
    let i_pos = model.labels.iter().position(|l| l == "pos").unwrap();
    let i_neg = 1 - i_pos;
    let w = [
        model.weights[i_pos][0] - model.weights[i_neg][0],
        model.weights[i_pos][1] - model.weights[i_neg][1],
    ];
    let cos = (w[0] * expected[0] + w[1] * expected[1]) / (w[0].hypot(w[1]) * expected[0].hypot(expected[1]));
    let angle = cos.clamp(-1.0, 1.0).acos().to_degrees();
    ensure!(accuracy >= 0.99, "accuracy {accuracy}");
    ensure!(angle <= 5.0, "weight direction off by {angle} degrees");
    ensure!(worst_sum <= 1e-12, "probability sum error {worst_sum:e}");
    Ok(format!("accuracy {accuracy:.3}, direction error {angle:.2e} deg, prob sum error {worst_sum:.1e}"))
}

// 7. File and wire parser fixtures.
fn parser_fixtures() -> Outcome {
    let e = &common::XDF_EXPECTED;
    let xdf = parse_xdf(&common::xdf_minimal()).map_err(err)?;
    let eeg = &xdf.streams[0];
    ensure!(eeg.channel_names == e.labels && eeg.fs == e.fs, "XDF header mismatch");
    for (i, t) in eeg.timestamps.iter().enumerate() {
        ensure!((t - e.timestamps[i]).abs() < 1e-12, "XDF timestamp {i}: {t}");
        for c in 0..2 {
            ensure!(eeg.samples[[i, c]] == e.values[i][c], "XDF sample [{i},{c}]");
        }
    }
    let m = &xdf.streams[1].markers;
    ensure!(m.len() == 1 && m[0].timestamp == e.marker_time && m[0].label == e.marker_label, "XDF marker");
    let mut bad = common::xdf_minimal();
    bad[1] = b'Q';
    ensure!(matches!(parse_xdf(&bad), Err(Error::BadMagic { .. })), "XDF bad magic accepted");
    let good = common::xdf_minimal();
    ensure!(parse_xdf(&good[..good.len() - 2]).is_err(), "truncated XDF accepted");

    let dir = tempfile::tempdir().map_err(err)?;
    let vhdr = common::write_brainvision(dir.path(), "fx");
    let bv = read_brainvision(&vhdr).map_err(err)?;
    ensure!(bv.format == SourceFormat::BrainVision && bv.streams[0].fs == 500.0, "BrainVision fs");
    for row in 0..bv.streams[0].samples.nrows() {
        for c in 0..2 {
            let want = common::BV_RAW[row % 3][c] as f64 * common::BV_RES[c];
            ensure!(bv.streams[0].samples[[row, c]] == want, "BrainVision sample [{row},{c}]");
        }
    }
    let marks = &bv.streams[1].markers;
    ensure!(marks[0].timestamp == 2.0 && marks[0].label == "S  1", "BrainVision marker {:?}", marks[0]);
    let header = std::fs::read_to_string(&vhdr).map_err(err)?;
    std::fs::write(&vhdr, header.replace("INT_16", "IEEE_FLOAT_64")).map_err(err)?;
    ensure!(read_brainvision(&vhdr).is_err(), "BrainVision size mismatch accepted");
    std::fs::write(&vhdr, header.replace("[Channel Infos]", "[Channels]")).map_err(err)?;
    ensure!(matches!(read_brainvision(&vhdr), Err(Error::MissingSection(_))), "missing section accepted");

    let RdaMessage::Start(start) = rda_decode(&common::rda_start_bytes(), None).map_err(err)? else {
        return Err("RDA start did not decode as Start".into());
    };
    ensure!(start.channel_names == ["Cz", "Pz"] && start.fs() == 500.0, "RDA start {start:?}");
    let RdaMessage::Data(d) = rda_decode(&common::rda_data_bytes(2, 4), Some(2)).map_err(err)? else {
        return Err("RDA data did not decode as Data".into());
    };
    let want: Vec<f32> = (0..8).map(|i| (200 + i) as f32).collect();
    ensure!(d.block == 2 && d.samples == want, "RDA data {:?}", d.samples);
    ensure!(rda_decode(&common::rda_stop_bytes(), Some(2)).map_err(err)? == RdaMessage::Stop, "RDA stop");
    let mut guid = common::rda_start_bytes();
    guid[15] ^= 1;
    ensure!(matches!(rda_decode(&guid, None), Err(Error::BadGuid)), "RDA bad GUID accepted");
    let data = common::rda_data_bytes(0, 3);
    ensure!(matches!(rda_decode(&data[..data.len() - 4], Some(2)), Err(Error::Truncated { .. })), "RDA truncation");
    Ok("XDF, BrainVision and RDA fixtures exact; corrupted variants rejected".into())
}

fn mock_rda_session() -> Result<Vec<RdaEvent>, String> {
    let listener = TcpListener::bind("127.0.0.1:0").map_err(err)?;
    let port = listener.local_addr().map_err(err)?.port();
    let server = std::thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        s.write_all(&common::rda_start_bytes()).unwrap();
        for b in 0..10 {
            s.write_all(&common::rda_data_bytes(b, 20)).unwrap();
        }
        s.write_all(&common::rda_stop_bytes()).unwrap();
        std::thread::sleep(Duration::from_millis(100));
    });
    let cfg = RdaClientConfig { port, max_retries: 0, ..RdaClientConfig::default() };
    let mut client = RdaClient::spawn(cfg, PipelineClock::simulated());
    let deadline = Instant::now() + Duration::from_secs(10);
    let mut events = Vec::new();
    while Instant::now() < deadline {
        events.extend(client.queue().drain());
        if matches!(events.last(), Some(RdaEvent::Ended | RdaEvent::Failed(_))) {
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    client.shutdown();
    server.join().map_err(|_| "mock server panicked".to_string())?;
    Ok(events)
}

// 8. NxFrame round-trips and an RDA session.
fn wire_protocol() -> Outcome {
    let mut r = common::rng(8);
    for i in 0..10_000 {
        let item = if i % 2 == 0 {
            let channels = r.gen_range(1..=16usize);
            let samples = r.gen_range(1..=32usize);
            // arbitrary finite f32 bit patterns of either sign
            let data: Vec<f32> =
                (0..channels * samples).map(|_| f32::from_bits(r.gen_range(0..0x7f7f_ffffu32) | (r.gen::<u32>() & 1 << 31))).collect();
            WireItem::Signal(SignalBlock { timestamp: r.gen_range(-1e9..1e9), channels, data })
        } else {
            let len = r.gen_range(1..24);
            let label: String = (0..len).map(|_| char::from(r.gen_range(32u8..127))).collect();
            let code = if r.gen() { Some(r.gen_range(i32::MIN + 1..=i32::MAX)) } else { None };
            WireItem::Marker(MarkerEvent::new(r.gen_range(0.0..1e6), label, code).map_err(err)?)
        };
        let id: [u8; 16] = r.gen();
        let seq: u64 = r.gen();
        let bytes = frame_encode(&item, &id, seq).map_err(err)?;
        let back = frame_decode(&bytes).map_err(err)?;
        let exact = match (&back.item, &item) {
            (WireItem::Signal(a), WireItem::Signal(b)) => {
                a.timestamp.to_bits() == b.timestamp.to_bits()
                    && a.channels == b.channels
                    && a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits())
                    && a.data.len() == b.data.len()
            }
            (WireItem::Marker(a), WireItem::Marker(b)) => a.timestamp.to_bits() == b.timestamp.to_bits() && a == b,
            _ => false,
        };
        ensure!(exact && back.seq == seq && back.stream_id == id, "round-trip {i} not exact");
    }

    let events = mock_rda_session()?;
    ensure!(matches!(events.last(), Some(RdaEvent::Ended)), "session did not end cleanly: {:?}", events.last());
    let chunks: Vec<Chunk> =
        events.iter().filter_map(|e| if let RdaEvent::Chunk(c) = e { Some(c.clone()) } else { None }).collect();
    ensure!(chunks.len() == 10, "{} chunks", chunks.len());
    let joined = Chunk::concat(&chunks).map_err(err)?;
    let t = joined.timestamps();
    let gap = t.windows(2).map(|w| (w[1] - w[0] - 0.002).abs()).fold(0.0, f64::max);
    ensure!(gap < 1e-9 && joined.len() == 200, "timestamp spacing error {gap:e}");
    Ok(format!("10000 frames bit-exact; RDA session 10 chunks, spacing error {gap:.1e}"))
}

// 9. Real-time replay.
fn replay_pacing() -> Outcome {
    let fs = 250.0;
    let n = 500;
    let samples = common::seeded_signal(2.0, fs, 3, 9).data().clone();
    let times: Vec<f64> = (0..n).map(|i| 100.0 + i as f64 / fs).collect();
    let names = vec!["a".to_string(), "b".into(), "c".into()];
    let rec = Recording {
        streams: vec![RecordedStream::signal("eeg", names, fs, samples.clone(), times)],
        format: SourceFormat::Xdf,
    };
    let mut p = Pipeline::new(0.01);
    p.add("rd", Box::new(ReaderNode::new(rec, 1.0).map_err(err)?), &[]).map_err(err)?;
    let (sink, store) = Collector::new();
    p.add("sink", Box::new(sink), &["rd.signal0"]).map_err(err)?;
    p.init().map_err(err)?;
    let term = Termination { duration: Some(10.0), until_sources_finished: true, ..Default::default() };
    let t0 = Instant::now();
    p.run(&term, Pacing::RealTime).into_result().map_err(err)?;
    let wall = t0.elapsed().as_secs_f64();
    let got = store.lock().unwrap();
    let joined = Chunk::concat(&got.chunks).map_err(err)?;
    let identical = joined.data().dim() == samples.dim()
        && joined.data().iter().zip(samples.iter()).all(|(a, b)| a.to_bits() == b.to_bits());
    ensure!(identical, "replayed samples differ");
    ensure!((2.0..=2.2).contains(&wall), "wall time {wall:.3} s");
    Ok(format!("wall time {wall:.3} s, {} samples bit-identical", joined.len()))
}

// 10. Reference load at 10 ms.
fn reference_overruns() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../pipelines/reference_64ch.toml");
    let mut p = load_pipeline(&path).map_err(err)?;
    ensure!(p.loop_period() == 0.01, "loop period {}", p.loop_period());
    let report = p.run(&Termination::duration(60.0), Pacing::Accelerated).into_result().map_err(err)?;
    let rate = report.overrun_rate();
    ensure!(report.step_count == 6000, "{} steps", report.step_count);
    ensure!(rate < 0.01, "overrun rate {:.2}%", rate * 100.0);
    Ok(format!(
        "{} steps, overrun rate {:.2}%, mean {:.3} ms, p95 {:.3} ms, max {:.3} ms",
        report.step_count,
        rate * 100.0,
        report.mean_latency.as_secs_f64() * 1e3,
        report.p95_latency.as_secs_f64() * 1e3,
        report.max_latency.as_secs_f64() * 1e3
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("oscillator feedback chain", oscillator_feedback_chain),
        ("chunk-size invariance", chunking_invariance),
        ("filter responses", filter_responses),
        ("spectral suite", spectral_suite),
        ("epoch counting", epoch_counting),
        ("LDA two gaussians", lda_two_gaussians),
        ("parser fixtures", parser_fixtures),
        ("wire protocol", wire_protocol),
        ("replay pacing", replay_pacing),
        ("reference pipeline overruns", reference_overruns),
    ];
    // cargo passes harness flags such as --list; only run for a real invocation
    if std::env::args().any(|a| a == "--list") {
        for (name, _) in &criteria {
            println!("{name}: test");
        }
        return;
    }
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
