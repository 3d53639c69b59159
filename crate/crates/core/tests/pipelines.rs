//! End-to-end pipeline behaviour: description files, graph validation,
//! playback, stimulation, classification and execution modes.

mod common;

use std::path::{Path, PathBuf};

use nxs_core::analysis::{StatKind, WelchParams, WindowKind};
use nxs_core::dsl::{build_pipeline, load_pipeline, parse_pipeline, ExprEvaluator};
use nxs_core::epoching::Epocher;
use nxs_core::exec::ExecMode;
use nxs_core::fileio::read_recording;
use nxs_core::graph::{Node, OutputDecl, Outputs, Inputs, Pacing, Pipeline, PortType, StepContext, Termination};
use nxs_core::ml::{lda_fit, PredictMode};
use nxs_core::nodes::{
    ApplyFunctionNode, ButterFilterNode, ClassifyNode, Collector, CommonAverageNode, EpochingNode,
    FeatureAggregatorNode, GeneratorNode, PsdWelchNode, ReaderNode, StimulatorNode, UnivariateStatNode,
};
use nxs_core::synth::{parse_stim_config, GeneratorConfig, GeneratorMode};
use nxs_core::types::{Chunk, FeatureVector};
use nxs_core::Error;
use rand::Rng;

fn pipelines_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../pipelines")
}

#[test]
fn shipped_pipelines_parse_and_validate() {
    for file in ["minimal.toml", "oscillator_power.toml", "reference_64ch.toml", "feedback.toml"] {
        let path = pipelines_dir().join(file);
        let p = load_pipeline(&path).unwrap_or_else(|e| panic!("{file}: {e}"));
        assert!(p.validate().is_ok(), "{file}: {}", p.validate());
    }
    let text = std::fs::read_to_string(pipelines_dir().join("oscillator_power.toml")).unwrap();
    let spec = parse_pipeline(&text).unwrap();
    let names: Vec<&str> = spec.nodes.iter().map(|n| n.name.as_str()).collect();
    assert_eq!(names, ["osc", "alpha", "square", "epochs", "power", "log"]);
    assert_eq!(spec.nodes[1].inputs, ["osc"]);
    let reference = parse_pipeline(&std::fs::read_to_string(pipelines_dir().join("reference_64ch.toml")).unwrap());
    assert_eq!(reference.unwrap().loop_period, 0.01);
}

#[test]
fn description_errors_are_reported() {
    let unknown = "[node.a]\nkind = \"ButterFiltr\"\n";
    match parse_pipeline(unknown) {
        Err(Error::UnknownNodeKind { name, hint }) => {
            assert_eq!(name, "ButterFiltr");
            assert_eq!(hint.as_deref(), Some("ButterFilter"));
        }
        other => panic!("expected unknown kind, got {other:?}"),
    }
    let dup = "[node.a]\nkind = \"Generator\"\n[node.b]\nkind = \"Generator\"\n[node.a]\nkind = \"Generator\"\n";
    assert!(matches!(parse_pipeline(dup), Err(Error::DuplicateNodeName(n)) if n == "a"));
    assert!(matches!(parse_pipeline("[node.a\nkind=1"), Err(Error::Syntax { line: 1, .. })));
}

fn validation_error(text: &str) -> String {
    let spec = parse_pipeline(text).unwrap();
    let mut p = build_pipeline(&spec, Path::new(".")).unwrap();
    match p.init() {
        Err(Error::Validation(msg)) => msg,
        other => panic!("expected validation failure, got {other:?}"),
    }
}

#[test]
fn graph_validation_catches_bad_wiring() {
    let stat_on_signal = validation_error(
        "[node.g]\nkind = \"Generator\"\n[node.s]\nkind = \"UnivariateStat\"\ninput = \"g\"\nstat = \"mean\"\n",
    );
    assert!(stat_on_signal.contains("epoch"), "{stat_on_signal}");

    let dangling = validation_error("[node.f]\nkind = \"ButterFilter\"\ninput = \"nowhere\"\nlowcut = 1\nhighcut = 2\n");
    assert!(dangling.contains("nowhere"), "{dangling}");

    let order = validation_error(
        "[node.f]\nkind = \"ButterFilter\"\ninput = \"g\"\nlowcut = 1\nhighcut = 2\n[node.g]\nkind = \"Generator\"\n",
    );
    assert!(order.contains("declared before"), "{order}");

    let bad_port = validation_error(
        "[node.g]\nkind = \"Generator\"\n[node.f]\nkind = \"ButterFilter\"\ninput = \"g.nope\"\nlowcut = 1\nhighcut = 2\n",
    );
    assert!(bad_port.contains("g.nope"), "{bad_port}");
}

#[test]
fn oscillator_power_file_logs_half_amplitude_squared() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(pipelines_dir().join("oscillator_power.toml")).unwrap();
    let mut p = build_pipeline(&parse_pipeline(&text).unwrap(), dir.path()).unwrap();
    p.run(&Termination::duration(10.0), Pacing::Accelerated).into_result().unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("oscillator_power.csv")).unwrap();
    let rows: Vec<f64> = reader.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert!(rows.len() >= 17, "{} rows", rows.len());
    for v in &rows[2..] {
        assert!((v - 0.5).abs() < 0.05, "{v}");
    }
}

#[test]
fn reader_replays_recording_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let vhdr = common::write_brainvision(dir.path(), "rec");
    let rec = read_recording(&vhdr).unwrap();
    let expected = rec.streams[0].to_chunk().unwrap();

    let mut p = Pipeline::new(0.01);
    p.add("rd", Box::new(ReaderNode::new(rec, 1.0).unwrap()), &[]).unwrap();
    let (sink, store) = Collector::new();
    p.add("sink", Box::new(sink), &["rd.signal0", "rd.marker"]).unwrap();
    let term = Termination { max_steps: Some(10_000), until_sources_finished: true, ..Default::default() };
    let report = p.run(&term, Pacing::Accelerated).into_result().unwrap();
    assert!(report.step_count <= 302, "{} steps", report.step_count);

    let got = store.lock().unwrap();
    let joined = Chunk::concat(&got.chunks).unwrap();
    assert_eq!(joined.data(), expected.data());
    assert_eq!(joined.timestamps(), expected.timestamps());
    let marks: Vec<(f64, &str)> = got.markers.iter().map(|m| (m.timestamp, m.label.as_str())).collect();
    assert_eq!(marks.len(), 2);
    assert!((marks[0].0 - 2.0).abs() < 1e-9 && marks[0].1 == "S  1");
    assert!((marks[1].0 - 2.5).abs() < 1e-9);
}

#[test]
fn reader_at_double_rate_compresses_time() {
    let dir = tempfile::tempdir().unwrap();
    let rec = read_recording(&common::write_brainvision(dir.path(), "fast")).unwrap();
    let n = rec.streams[0].samples.nrows();
    let mut p = Pipeline::new(0.01);
    p.add("rd", Box::new(ReaderNode::new(rec, 2.0).unwrap()), &[]).unwrap();
    let (sink, store) = Collector::new();
    p.add("sink", Box::new(sink), &["rd.signal0"]).unwrap();
    let term = Termination { max_steps: Some(10_000), until_sources_finished: true, ..Default::default() };
    let report = p.run(&term, Pacing::Accelerated).into_result().unwrap();
    // 3 s of data at twice real time
    assert!((150..=152).contains(&report.step_count), "{}", report.step_count);
    let joined = Chunk::concat(&store.lock().unwrap().chunks).unwrap();
    assert_eq!(joined.len(), n);
    assert!((joined.timestamps()[1] - joined.timestamps()[0] - 0.001).abs() < 1e-12);
}

#[test]
fn stimulator_emits_schedule_in_time() {
    let xml = r#"<experiment>
  <baseline duration="1"/>
  <classes><class label="left"/><class label="right"/></classes>
  <trial cue="0.5" task="2" rest="0.5" per_class="3"/>
  <seed>11</seed>
</experiment>"#;
    let schedule = parse_stim_config(xml).unwrap();
    let total = schedule.total_duration();
    assert!((total - 24.0).abs() < 1e-12);
    let mut p = Pipeline::new(0.01);
    p.add("stim", Box::new(StimulatorNode::new(schedule.clone())), &[]).unwrap();
    let (sink, store) = Collector::new();
    p.add("sink", Box::new(sink), &["stim"]).unwrap();
    let term = Termination { max_steps: Some(100_000), until_sources_finished: true, ..Default::default() };
    p.run(&term, Pacing::Accelerated).into_result().unwrap();

    let got = store.lock().unwrap();
    assert_eq!(got.markers.len(), schedule.entries().len());
    assert_eq!(got.markers.len(), 2 + 6 * 4);
    let cues = got.markers.iter().filter(|m| m.label == "left").count();
    assert_eq!(cues, 3);
    assert_eq!(got.markers.iter().filter(|m| m.label == "right").count(), 3);
    for (m, e) in got.markers.iter().zip(schedule.entries()) {
        assert_eq!(m.label, e.label);
        assert!((m.timestamp - e.time_offset).abs() < 1e-9);
    }
    assert!(got.markers.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
}

/// Emits a fixed list of vectors, one per step.
struct VectorSource {
    items: Vec<FeatureVector>,
    next: usize,
}

impl Node for VectorSource {
    fn kind(&self) -> &'static str {
        "VectorSource"
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("vector", PortType::Vector)]
    }
    fn update(&mut self, _: &StepContext, _: &Inputs<'_>, out: &mut Outputs<'_>) -> nxs_core::Result<()> {
        if let Some(v) = self.items.get(self.next) {
            out.push_vector(0, v.clone());
            self.next += 1;
        }
        Ok(())
    }
    fn is_finished(&self) -> bool {
        self.next == self.items.len()
    }
}

fn two_blobs(n: usize, seed: u64) -> Vec<FeatureVector> {
    let mut r = common::rng(seed);
    (0..n)
        .map(|i| {
            let (label, cx) = if i % 2 == 0 { ("left", -1.0) } else { ("right", 1.0) };
            let v = vec![cx + r.gen_range(-0.4..0.4), r.gen_range(-0.4..0.4)];
            FeatureVector::new(i as f64 * 0.01, v, vec!["a".into(), "b".into()], Some(label.into())).unwrap()
        })
        .collect()
}

#[test]
fn classify_node_in_both_modes() {
    let model = lda_fit(&two_blobs(200, 1), 1e-6).unwrap();
    let test = two_blobs(60, 2);
    for mode in [PredictMode::Class, PredictMode::Probability] {
        let mut p = Pipeline::new(0.01);
        p.add("src", Box::new(VectorSource { items: test.clone(), next: 0 }), &[]).unwrap();
        p.add("clf", Box::new(ClassifyNode::new(model.clone(), mode)), &["src"]).unwrap();
        let (sink, store) = Collector::new();
        p.add("sink", Box::new(sink), &["clf"]).unwrap();
        let term = Termination { max_steps: Some(1000), until_sources_finished: true, ..Default::default() };
        p.run(&term, Pacing::Accelerated).into_result().unwrap();
        let got = store.lock().unwrap();
        match mode {
            PredictMode::Class => {
                assert_eq!(got.markers.len(), test.len());
                for (m, v) in got.markers.iter().zip(&test) {
                    assert_eq!(Some(&m.label), v.label.as_ref());
                    assert_eq!(m.timestamp, v.timestamp);
                }
            }
            PredictMode::Probability => {
                assert_eq!(got.vectors.len(), test.len());
                for (pv, v) in got.vectors.iter().zip(&test) {
                    assert_eq!(pv.names, ["p_left", "p_right"]);
                    assert!((pv.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    let want = if v.label.as_deref() == Some("left") { 0 } else { 1 };
                    assert!(pv.values[want] > 0.5);
                }
            }
        }
    }
}

#[test]
fn aggregator_joins_aligned_rows_and_drops_stragglers() {
    let mk = |t: f64, name: &str, v: f64| FeatureVector::new(t, vec![v], vec![name.into()], None).unwrap();
    let a: Vec<FeatureVector> = (0..5).map(|i| mk(i as f64, "a", i as f64)).collect();
    // b skips t=2 and has an extra early row
    let b: Vec<FeatureVector> =
        [-1.0, 0.0, 1.0, 3.0, 4.0].iter().map(|&t| mk(t + 0.001, "b", 10.0 + t)).collect();
    let mut p = Pipeline::new(0.01);
    p.add("a", Box::new(VectorSource { items: a, next: 0 }), &[]).unwrap();
    p.add("b", Box::new(VectorSource { items: b, next: 0 }), &[]).unwrap();
    p.add("agg", Box::new(FeatureAggregatorNode::new(0.01)), &["a", "b"]).unwrap();
    let (sink, store) = Collector::new();
    p.add("sink", Box::new(sink), &["agg"]).unwrap();
    let term = Termination { max_steps: Some(100), until_sources_finished: true, ..Default::default() };
    let report = p.run(&term, Pacing::Accelerated).into_result().unwrap();
    let got = store.lock().unwrap();
    let rows: Vec<(f64, Vec<f64>)> = got.vectors.iter().map(|v| (v.timestamp.round(), v.values.clone())).collect();
    assert_eq!(
        rows,
        vec![(0.0, vec![0.0, 10.0]), (1.0, vec![1.0, 11.0]), (3.0, vec![3.0, 13.0]), (4.0, vec![4.0, 14.0])]
    );
    assert_eq!(got.vectors[0].names, ["a", "b"]);
    let agg = report.nodes.iter().find(|n| n.name == "agg").unwrap();
    assert_eq!(agg.counters, vec![("vectors", 4), ("misaligned", 2)]);
}

fn reference_chain(mode: ExecMode, period: f64) -> Vec<nxs_core::types::SpectrumFrame> {
    let mut p = Pipeline::new(period);
    p.set_exec_mode(mode);
    let cfg = GeneratorConfig { seed: 7, ..GeneratorConfig::new(GeneratorMode::Simulation, 64, 512.0) };
    p.add("eeg", Box::new(GeneratorNode::new(cfg).unwrap()), &[]).unwrap();
    p.add("band", Box::new(ButterFilterNode::new(1.0, 40.0, 4)), &["eeg"]).unwrap();
    p.add("car", Box::new(CommonAverageNode), &["band"]).unwrap();
    p.add("sq", Box::new(ApplyFunctionNode::new(ExprEvaluator::parse("abs(x)").unwrap())), &["car"]).unwrap();
    p.add("ep", Box::new(EpochingNode::new(Epocher::time_based(1.0, 0.25).unwrap())), &["sq"]).unwrap();
    let welch = WelchParams { segment_length: 256, overlap: 0.5, window: WindowKind::Hanning };
    p.add("psd", Box::new(PsdWelchNode::new(welch, None).unwrap()), &["ep"]).unwrap();
    p.add("stat", Box::new(UnivariateStatNode::new(StatKind::Quantile(0.9))), &["ep"]).unwrap();
    let (sink, store) = Collector::new();
    p.add("sink", Box::new(sink), &["psd", "stat"]).unwrap();
    p.run(&Termination::duration(4.0), Pacing::Accelerated).into_result().unwrap();
    let got = store.lock().unwrap();
    assert!(!got.vectors.is_empty());
    got.spectra.clone()
}

#[test]
fn sequential_and_parallel_modes_agree_bitwise() {
    for period in [0.01, 0.25] {
        let seq = reference_chain(ExecMode::Sequential, period);
        let par = reference_chain(ExecMode::Parallel, period);
        assert_eq!(seq.len(), 13);
        assert_eq!(seq, par, "period {period}");
    }
}
