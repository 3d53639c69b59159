use std::collections::VecDeque;

use crate::analysis::{
    apply_window, fft_magnitude_with, hilbert_analytic, univariate_stat_with, welch_psd, HilbertOutput, StatKind,
    WelchAccumulator, WelchParams, WindowKind,
};
use crate::dsl::ExprEvaluator;
use crate::epoching::{Epocher, StimCode};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::filters::{design_butter_bandpass, design_notch, Decimator, SosCascade};
use crate::graph::{InitContext, InputDecl, InputSlot, Inputs, Node, OutputDecl, Outputs, PortType, StepContext};
use crate::ml::{aggregate_features, lda_predict, LdaModel, PredictMode, Prediction};
use crate::registry::Params;
use crate::select::{
    common_average, rereference, select_channels, spatial_filter, ChannelSelector, ChannelSpec, SpatialMatrix,
};
use crate::types::{Chunk, FeatureVector, MarkerEvent, SamplingRate};

const SIGNAL: &[PortType] = &[PortType::Signal];
const EPOCH: &[PortType] = &[PortType::Epoch];
const MARKER: &[PortType] = &[PortType::Marker];
const VECTOR: &[PortType] = &[PortType::Vector];
const SIGNAL_OR_EPOCH: &[PortType] = &[PortType::Signal, PortType::Epoch];

fn regular_fs(chunk: &Chunk) -> Result<f64> {
    chunk.sampling_rate().hz().ok_or_else(|| Error::InvalidChunk("filter needs a regular sampling rate".into()))
}

/// Declares a stateless signal → signal node around a chunk function.
macro_rules! signal_map_node {
    ($ty:ident, $kind:literal, |$self_:ident, $c:ident| $body:expr) => {
        impl Node for $ty {
            fn kind(&self) -> &'static str {
                $kind
            }
            fn inputs(&self) -> InputDecl {
                InputDecl::one("signal", SIGNAL)
            }
            fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
                vec![OutputDecl::new("signal", PortType::Signal)]
            }
            fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
                let $self_ = &mut *self;
                for $c in inputs.chunks(0) {
                    out.push_chunk(0, $body?);
                }
                Ok(())
            }
        }
    };
}

/// Band-pass designed for the sampling rate of the first chunk.
pub struct ButterFilterNode {
    lowcut: f64,
    highcut: f64,
    order: usize,
    mode: ExecMode,
    filter: Option<(f64, SosCascade)>,
}

impl ButterFilterNode {
    pub fn new(lowcut: f64, highcut: f64, order: usize) -> Self {
        ButterFilterNode { lowcut, highcut, order, mode: ExecMode::default(), filter: None }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let (lo, hi, order) = (p.f64("lowcut")?, p.f64("highcut")?, p.usize("order")?);
        if !(lo > 0.0 && hi > lo) || order == 0 {
            return Err(p.error(format!("need 0 < lowcut < highcut and order >= 1 (got {lo}, {hi}, {order})")));
        }
        Ok(ButterFilterNode::new(lo, hi, order))
    }

    fn process(&mut self, chunk: &Chunk) -> Result<Chunk> {
        let fs = regular_fs(chunk)?;
        match &self.filter {
            Some((f, _)) if *f == fs => {}
            Some((f, _)) => return Err(Error::InvalidChunk(format!("sampling rate changed from {f} to {fs} Hz"))),
            None => {
                let mut sos = design_butter_bandpass(self.lowcut, self.highcut, self.order, fs)?;
                sos.set_exec_mode(self.mode);
                self.filter = Some((fs, sos));
            }
        }
        self.filter.as_mut().unwrap().1.apply(chunk)
    }
}

impl Node for ButterFilterNode {
    fn kind(&self) -> &'static str {
        "ButterFilter"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("signal", SIGNAL)
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("signal", PortType::Signal)]
    }
    fn init(&mut self, ctx: &InitContext<'_>) -> Result<()> {
        self.mode = ctx.exec_mode;
        self.filter = None;
        Ok(())
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for c in inputs.chunks(0) {
            let y = self.process(c)?;
            out.push_chunk(0, y);
        }
        Ok(())
    }
}

pub struct NotchFilterNode {
    freq: f64,
    q: f64,
    mode: ExecMode,
    filter: Option<(f64, SosCascade)>,
}

impl NotchFilterNode {
    pub fn new(freq: f64, q: f64) -> Self {
        NotchFilterNode { freq, q, mode: ExecMode::default(), filter: None }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let (freq, q) = (p.f64("freq")?, p.f64("q")?);
        if !(freq > 0.0 && q > 0.0) {
            return Err(p.error("freq and q must be positive"));
        }
        Ok(NotchFilterNode::new(freq, q))
    }

    fn process(&mut self, chunk: &Chunk) -> Result<Chunk> {
        let fs = regular_fs(chunk)?;
        if self.filter.is_none() {
            let mut sos = design_notch(self.freq, self.q, fs)?;
            sos.set_exec_mode(self.mode);
            self.filter = Some((fs, sos));
        }
        let (f, sos) = self.filter.as_mut().unwrap();
        if *f != fs {
            return Err(Error::InvalidChunk(format!("sampling rate changed from {f} to {fs} Hz")));
        }
        sos.apply(chunk)
    }
}

impl Node for NotchFilterNode {
    fn kind(&self) -> &'static str {
        "NotchFilter"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("signal", SIGNAL)
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("signal", PortType::Signal)]
    }
    fn init(&mut self, ctx: &InitContext<'_>) -> Result<()> {
        self.mode = ctx.exec_mode;
        self.filter = None;
        Ok(())
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for c in inputs.chunks(0) {
            let y = self.process(c)?;
            out.push_chunk(0, y);
        }
        Ok(())
    }
}

pub struct DownSampleNode {
    factor: usize,
    mode: ExecMode,
    decimator: Option<Decimator>,
}

impl DownSampleNode {
    pub fn new(factor: usize) -> Self {
        DownSampleNode { factor, mode: ExecMode::default(), decimator: None }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let factor = p.usize("factor")?;
        if factor < 2 {
            return Err(p.error(format!("factor must be >= 2, got {factor}")));
        }
        Ok(DownSampleNode::new(factor))
    }
}

impl Node for DownSampleNode {
    fn kind(&self) -> &'static str {
        "DownSample"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("signal", SIGNAL)
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("signal", PortType::Signal)]
    }
    fn init(&mut self, ctx: &InitContext<'_>) -> Result<()> {
        self.mode = ctx.exec_mode;
        self.decimator = None;
        Ok(())
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for c in inputs.chunks(0) {
            if self.decimator.is_none() {
                let mut d = Decimator::new(self.factor, regular_fs(c)?)?;
                d.set_exec_mode(self.mode);
                self.decimator = Some(d);
            }
            let y = self.decimator.as_mut().unwrap().process(c)?;
            if !y.is_empty() {
                out.push_chunk(0, y);
            }
        }
        Ok(())
    }
}

/// Welch PSD of each epoch, or a sliding estimate over continuous input.
pub struct PsdWelchNode {
    params: WelchParams,
    hop: Option<usize>,
    mode: ExecMode,
    accumulator: Option<WelchAccumulator>,
    epoch_input: bool,
}

impl PsdWelchNode {
    pub fn new(params: WelchParams, hop: Option<usize>) -> Result<Self> {
        params.validate()?;
        Ok(PsdWelchNode { params, hop, mode: ExecMode::default(), accumulator: None, epoch_input: false })
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let params = WelchParams {
            segment_length: p.usize("segment_length")?,
            overlap: p.f64("overlap")?,
            window: p.str("window")?.parse()?,
        };
        let hop = p.opt_i64("hop")?.map(|h| h.max(0) as usize);
        PsdWelchNode::new(params, hop).map_err(|e| p.error(e.to_string()))
    }
}

impl Node for PsdWelchNode {
    fn kind(&self) -> &'static str {
        "PsdWelch"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("in", SIGNAL_OR_EPOCH)
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("spectrum", PortType::Spectrum)]
    }
    fn init(&mut self, ctx: &InitContext<'_>) -> Result<()> {
        self.mode = ctx.exec_mode;
        self.epoch_input = ctx.input_types.first() == Some(&PortType::Epoch);
        self.accumulator = if self.epoch_input {
            None
        } else {
            let mut acc = WelchAccumulator::new(self.params, self.hop)?;
            acc.set_exec_mode(self.mode);
            Some(acc)
        };
        Ok(())
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        if let Some(acc) = self.accumulator.as_mut() {
            for c in inputs.chunks(0) {
                for frame in acc.push(c)? {
                    out.push_spectrum(0, frame);
                }
            }
        } else {
            for e in inputs.epochs(0) {
                out.push_spectrum(0, welch_psd(e, &self.params)?);
            }
        }
        Ok(())
    }
}

#[derive(Default)]
pub struct FftNode {
    mode: ExecMode,
}

impl FftNode {
    pub fn from_params(_: &Params<'_>) -> Result<Self> {
        Ok(FftNode::default())
    }
}

impl Node for FftNode {
    fn kind(&self) -> &'static str {
        "Fft"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("epoch", EPOCH)
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("spectrum", PortType::Spectrum)]
    }
    fn init(&mut self, ctx: &InitContext<'_>) -> Result<()> {
        self.mode = ctx.exec_mode;
        Ok(())
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for e in inputs.epochs(0) {
            out.push_spectrum(0, fft_magnitude_with(e, self.mode)?);
        }
        Ok(())
    }
}

pub struct HilbertNode {
    output: HilbertOutput,
}

impl HilbertNode {
    pub fn new(output: HilbertOutput) -> Self {
        HilbertNode { output }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let output = match p.str("output")?.as_str() {
            "envelope" => HilbertOutput::Envelope,
            "phase" => HilbertOutput::Phase,
            other => return Err(p.error(format!("output must be envelope or phase, got '{other}'"))),
        };
        Ok(HilbertNode::new(output))
    }
}

impl Node for HilbertNode {
    fn kind(&self) -> &'static str {
        "HilbertTransform"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("epoch", EPOCH)
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("epoch", PortType::Epoch)]
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for e in inputs.epochs(0) {
            let (env, phase) = hilbert_analytic(e)?;
            out.push_epoch(0, if self.output == HilbertOutput::Envelope { env } else { phase });
        }
        Ok(())
    }
}

pub struct WindowingNode {
    kind: WindowKind,
}

impl WindowingNode {
    pub fn new(kind: WindowKind) -> Self {
        WindowingNode { kind }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        Ok(WindowingNode::new(p.str("kind")?.parse().map_err(|e: Error| p.error(e.to_string()))?))
    }
}

impl Node for WindowingNode {
    fn kind(&self) -> &'static str {
        "Windowing"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("epoch", EPOCH)
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("epoch", PortType::Epoch)]
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for e in inputs.epochs(0) {
            out.push_epoch(0, apply_window(e, self.kind)?);
        }
        Ok(())
    }
}

pub struct UnivariateStatNode {
    stat: StatKind,
    mode: ExecMode,
}

impl UnivariateStatNode {
    pub fn new(stat: StatKind) -> Self {
        UnivariateStatNode { stat, mode: ExecMode::default() }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let stat = StatKind::parse(&p.str("stat")?, p.opt_f64("p")?).map_err(|e| p.error(e.to_string()))?;
        Ok(UnivariateStatNode::new(stat))
    }
}

impl Node for UnivariateStatNode {
    fn kind(&self) -> &'static str {
        "UnivariateStat"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("epoch", EPOCH)
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("vector", PortType::Vector)]
    }
    fn init(&mut self, ctx: &InitContext<'_>) -> Result<()> {
        self.mode = ctx.exec_mode;
        Ok(())
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for e in inputs.epochs(0) {
            out.push_vector(0, univariate_stat_with(e, self.stat, self.mode)?);
        }
        Ok(())
    }
}

/// Elementwise expression on signal chunks or epochs.
pub struct ApplyFunctionNode {
    eval: ExprEvaluator,
}

impl ApplyFunctionNode {
    pub fn new(eval: ExprEvaluator) -> Self {
        ApplyFunctionNode { eval }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let text = p.str("expr")?;
        let eval = ExprEvaluator::parse(&text).map_err(|e| p.error(format!("expr '{text}': {e}")))?;
        Ok(ApplyFunctionNode::new(eval))
    }
}

impl Node for ApplyFunctionNode {
    fn kind(&self) -> &'static str {
        "ApplyFunction"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("in", SIGNAL_OR_EPOCH)
    }
    fn outputs(&self, input_types: &[PortType]) -> Vec<OutputDecl> {
        let ty = input_types.first().copied().unwrap_or(PortType::Signal);
        vec![OutputDecl::new(ty.name(), ty)]
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for c in inputs.chunks(0) {
            out.push_chunk(0, self.eval.apply(c)?);
        }
        for e in inputs.epochs(0) {
            out.push_epoch(0, self.eval.apply_epoch(e)?);
        }
        Ok(())
    }
    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![("non_finite", self.eval.non_finite())]
    }
}

pub struct ChannelSelectorNode {
    spec: ChannelSpec,
}

impl ChannelSelectorNode {
    pub fn new(spec: ChannelSpec) -> Self {
        ChannelSelectorNode { spec }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let spec = p.channels("channels")?;
        if spec.0.is_empty() {
            return Err(p.error("channels must not be empty"));
        }
        Ok(ChannelSelectorNode::new(spec))
    }
}

signal_map_node!(ChannelSelectorNode, "ChannelSelector", |s, c| select_channels(c, &s.spec));

pub struct SpatialFilterNode {
    matrix: SpatialMatrix,
}

impl SpatialFilterNode {
    pub fn new(matrix: SpatialMatrix) -> Self {
        SpatialFilterNode { matrix }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let rows = p.matrix("matrix")?;
        let matrix = SpatialMatrix::from_rows(&rows, p.opt_str_list("names")?).map_err(|e| p.error(e.to_string()))?;
        Ok(SpatialFilterNode::new(matrix))
    }
}

signal_map_node!(SpatialFilterNode, "SpatialFilter", |s, c| spatial_filter(c, &s.matrix));

pub struct ReferenceChannelNode {
    reference: ChannelSelector,
}

impl ReferenceChannelNode {
    pub fn new(reference: ChannelSelector) -> Self {
        ReferenceChannelNode { reference }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        Ok(ReferenceChannelNode::new(p.selector("ref")?))
    }
}

signal_map_node!(ReferenceChannelNode, "ReferenceChannel", |s, c| rereference(c, &s.reference));

#[derive(Default)]
pub struct CommonAverageNode;

impl CommonAverageNode {
    pub fn from_params(_: &Params<'_>) -> Result<Self> {
        Ok(CommonAverageNode)
    }
}

signal_map_node!(CommonAverageNode, "CommonAverageReference", |_s, c| common_average(c));

/// Shared update logic for the three epoching kinds.
fn run_epocher(epocher: &mut Epocher, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<u64> {
    let mut n = 0;
    let markers = if inputs.len() > 1 { inputs.markers(1) } else { &[] };
    let mut batches = Vec::new();
    for c in inputs.chunks(0) {
        batches.push(epocher.push(Some(c), &[])?);
    }
    if !markers.is_empty() {
        batches.push(epocher.push(None, markers)?);
    }
    for e in batches.into_iter().flatten() {
        n += 1;
        out.push_epoch(0, e);
    }
    Ok(n)
}

fn epocher_counters(e: &Epocher, emitted: u64) -> Vec<(&'static str, u64)> {
    vec![
        ("epochs", emitted),
        ("skipped_markers", e.skipped_markers()),
        ("dropped_triggers", e.dropped_triggers()),
        ("pending_triggers", e.pending_triggers() as u64),
    ]
}

macro_rules! epoching_node {
    ($ty:ident, $kind:literal, $inputs:expr) => {
        pub struct $ty {
            template: Epocher,
            epocher: Epocher,
            emitted: u64,
        }

        impl $ty {
            pub fn new(epocher: Epocher) -> Self {
                $ty { template: epocher.clone(), epocher, emitted: 0 }
            }
        }

        impl Node for $ty {
            fn kind(&self) -> &'static str {
                $kind
            }
            fn inputs(&self) -> InputDecl {
                $inputs
            }
            fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
                vec![OutputDecl::new("epoch", PortType::Epoch)]
            }
            fn init(&mut self, _: &InitContext<'_>) -> Result<()> {
                self.epocher = self.template.clone();
                self.emitted = 0;
                Ok(())
            }
            fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
                self.emitted += run_epocher(&mut self.epocher, inputs, out)?;
                Ok(())
            }
            fn counters(&self) -> Vec<(&'static str, u64)> {
                epocher_counters(&self.epocher, self.emitted)
            }
        }
    };
}

fn signal_and_markers() -> InputDecl {
    InputDecl { slots: vec![InputSlot::new("signal", SIGNAL), InputSlot::new("marker", MARKER)], variadic: None }
}

epoching_node!(EpochingNode, "TimeBasedEpoching", InputDecl::one("signal", SIGNAL));
epoching_node!(MarkerEpochingNode, "MarkerBasedEpoching", signal_and_markers());
epoching_node!(StimEpochingNode, "StimulationBasedEpoching", signal_and_markers());

impl EpochingNode {
    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let e = Epocher::time_based(p.f64("duration")?, p.f64("interval")?).map_err(|e| p.error(e.to_string()))?;
        Ok(EpochingNode::new(e))
    }
}

impl MarkerEpochingNode {
    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let e = Epocher::marker_based(p.f64("duration")?).map_err(|e| p.error(e.to_string()))?;
        Ok(MarkerEpochingNode::new(e))
    }
}

impl StimEpochingNode {
    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let code = match p.label("code")? {
            toml::Value::Integer(i) => {
                StimCode::Code(i32::try_from(i).map_err(|_| p.error(format!("code {i} out of range")))?)
            }
            toml::Value::String(s) => StimCode::Label(s),
            _ => return Err(p.error("code must be a string or integer")),
        };
        let e = Epocher::stimulation_based(code, p.f64("duration")?, p.f64("offset")?)
            .map_err(|e| p.error(e.to_string()))?;
        Ok(StimEpochingNode::new(e))
    }
}

/// Joins one vector from each vector input into a single row. Marker
/// inputs set the label attached to subsequent rows. Rows whose timestamps
/// disagree beyond the tolerance are dropped (oldest first) and counted.
pub struct FeatureAggregatorNode {
    tolerance: f64,
    queues: Vec<VecDeque<FeatureVector>>,
    vector_slots: Vec<usize>,
    marker_slots: Vec<usize>,
    label: Option<String>,
    emitted: u64,
    misaligned: u64,
}

impl FeatureAggregatorNode {
    pub fn new(tolerance: f64) -> Self {
        FeatureAggregatorNode {
            tolerance,
            queues: Vec::new(),
            vector_slots: Vec::new(),
            marker_slots: Vec::new(),
            label: None,
            emitted: 0,
            misaligned: 0,
        }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let tol = p.f64("tolerance")?;
        if !(tol >= 0.0) {
            return Err(p.error("tolerance must be >= 0"));
        }
        Ok(FeatureAggregatorNode::new(tol))
    }
}

impl Node for FeatureAggregatorNode {
    fn kind(&self) -> &'static str {
        "FeatureAggregator"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl {
            slots: vec![InputSlot::new("vector", VECTOR)],
            variadic: Some(InputSlot::new("in", &[PortType::Vector, PortType::Marker])),
        }
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("vector", PortType::Vector)]
    }
    fn init(&mut self, ctx: &InitContext<'_>) -> Result<()> {
        self.vector_slots.clear();
        self.marker_slots.clear();
        for (i, t) in ctx.input_types.iter().enumerate() {
            if *t == PortType::Marker {
                self.marker_slots.push(i);
            } else {
                self.vector_slots.push(i);
            }
        }
        self.queues = vec![VecDeque::new(); self.vector_slots.len()];
        self.label = None;
        Ok(())
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for &s in &self.marker_slots {
            if let Some(m) = inputs.markers(s).last() {
                self.label = Some(m.label.clone());
            }
        }
        for (q, &s) in self.queues.iter_mut().zip(&self.vector_slots) {
            q.extend(inputs.vectors(s).iter().cloned());
        }
        while self.queues.iter().all(|q| !q.is_empty()) {
            let heads: Vec<&FeatureVector> = self.queues.iter().map(|q| q.front().unwrap()).collect();
            match aggregate_features(&heads, self.tolerance) {
                Ok(mut v) => {
                    if v.label.is_none() {
                        v.label = self.label.clone();
                    }
                    for q in &mut self.queues {
                        q.pop_front();
                    }
                    self.emitted += 1;
                    out.push_vector(0, v);
                }
                Err(Error::MisalignedInputs(..)) => {
                    let oldest = (0..self.queues.len())
                        .min_by(|&a, &b| self.queues[a][0].timestamp.total_cmp(&self.queues[b][0].timestamp))
                        .unwrap();
                    self.queues[oldest].pop_front();
                    self.misaligned += 1;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![("vectors", self.emitted), ("misaligned", self.misaligned)]
    }
}

/// LDA prediction. Class mode emits a marker per vector; probability
/// mode emits a vector of per-class probabilities named `p_<label>`.
pub struct ClassifyNode {
    model: LdaModel,
    mode: PredictMode,
    predictions: u64,
}

impl ClassifyNode {
    pub fn new(model: LdaModel, mode: PredictMode) -> Self {
        ClassifyNode { model, mode, predictions: 0 }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let path = p.path("model_file")?;
        let model = LdaModel::load(&path).map_err(|e| p.error(format!("{}: {e}", path.display())))?;
        let mode = p.str("mode")?.parse().map_err(|e: Error| p.error(e.to_string()))?;
        Ok(ClassifyNode::new(model, mode))
    }
}

impl Node for ClassifyNode {
    fn kind(&self) -> &'static str {
        "Classify"
    }
    fn inputs(&self) -> InputDecl {
        InputDecl::one("vector", VECTOR)
    }
    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        match self.mode {
            PredictMode::Class => vec![OutputDecl::new("marker", PortType::Marker)],
            PredictMode::Probability => vec![OutputDecl::new("vector", PortType::Vector)],
        }
    }
    fn update(&mut self, _: &StepContext, inputs: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for v in inputs.vectors(0) {
            self.predictions += 1;
            match lda_predict(&self.model, v, self.mode)? {
                Prediction::Class(label) => {
                    let code = MarkerEvent::code_from_label(&label);
                    out.push_marker(0, MarkerEvent::new(v.timestamp, label, code)?);
                }
                Prediction::Probabilities(p) => {
                    let names = self.model.labels.iter().map(|l| format!("p_{l}")).collect();
                    out.push_vector(0, FeatureVector::new(v.timestamp, p, names, v.label.clone())?);
                }
            }
        }
        Ok(())
    }
    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![("predictions", self.predictions)]
    }
}

/// One-sample chunk carrying a feature vector, for sinks that take signals.
pub(crate) fn vector_as_chunk(v: &FeatureVector) -> Result<Chunk> {
    let names = if v.names.len() == v.values.len() {
        v.names.clone()
    } else {
        (0..v.values.len()).map(|i| format!("f{i}")).collect()
    };
    Chunk::new(
        vec![v.timestamp],
        crate::types::channel_names(names),
        ndarray::Array2::from_shape_vec((1, v.values.len()), v.values.clone()).expect("row"),
        SamplingRate::Irregular,
    )
}
