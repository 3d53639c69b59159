use crate::error::Result;
use crate::fileio::{read_recording, Replayer};
use crate::graph::{InitContext, Node, OutputDecl, Outputs, PortType, StepContext};
use crate::graph::Inputs;
use crate::registry::Params;
use crate::synth::{parse_stim_config, GeneratorConfig, GeneratorMode, SignalGenerator, StimSchedule};

/// Clocked synthetic source. Each step emits the grid samples with
/// `t < now` that have not been emitted yet.
pub struct GeneratorNode {
    generator: SignalGenerator,
    next: u64,
    emitted: u64,
}

impl GeneratorNode {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        Ok(GeneratorNode { generator: SignalGenerator::new(config)?, next: 0, emitted: 0 })
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let mode: GeneratorMode = p.str("mode")?.parse()?;
        let mut config = GeneratorConfig::new(mode, p.usize("channels")?, p.f64("fs")?);
        config.seed = p.usize("seed")? as u64;
        config.frequency = p.f64("freq")?;
        config.amplitude = p.f64("amplitude")?;
        GeneratorNode::new(config).map_err(|e| p.error(e.to_string()))
    }
}

impl Node for GeneratorNode {
    fn kind(&self) -> &'static str {
        "Generator"
    }

    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("signal", PortType::Signal)]
    }

    fn init(&mut self, _: &InitContext<'_>) -> Result<()> {
        self.next = 0;
        Ok(())
    }

    fn update(&mut self, ctx: &StepContext, _: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        let end = self.generator.grid_index(ctx.now);
        if end > self.next {
            let chunk = self.generator.generate_indices(self.next, end);
            self.emitted += chunk.len() as u64;
            self.next = end;
            out.push_chunk(0, chunk);
        }
        Ok(())
    }

    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![("samples", self.emitted)]
    }
}

/// Emits markers from an experiment schedule as pipeline time passes.
pub struct StimulatorNode {
    template: StimSchedule,
    schedule: StimSchedule,
    emitted: u64,
}

impl StimulatorNode {
    pub fn new(schedule: StimSchedule) -> Self {
        StimulatorNode { template: schedule.clone(), schedule, emitted: 0 }
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let path = p.path("file")?;
        let text = std::fs::read_to_string(&path).map_err(|e| p.error(format!("{}: {e}", path.display())))?;
        Ok(StimulatorNode::new(parse_stim_config(&text)?))
    }
}

impl Node for StimulatorNode {
    fn kind(&self) -> &'static str {
        "Stimulator"
    }

    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        vec![OutputDecl::new("marker", PortType::Marker)]
    }

    fn init(&mut self, _: &InitContext<'_>) -> Result<()> {
        self.schedule = self.template.clone();
        Ok(())
    }

    fn update(&mut self, ctx: &StepContext, _: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        for m in self.schedule.emit_due(ctx.now) {
            self.emitted += 1;
            out.push_marker(0, m);
        }
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.schedule.is_exhausted()
    }

    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![("markers", self.emitted)]
    }
}

/// Paced playback of a recording. One signal port per signal stream,
/// then a marker port carrying every marker stream.
pub struct ReaderNode {
    recording: crate::fileio::Recording,
    rate: f64,
    replayer: Replayer,
    samples: u64,
    markers: u64,
}

impl ReaderNode {
    pub fn new(recording: crate::fileio::Recording, rate: f64) -> Result<Self> {
        let replayer = Replayer::new(&recording, rate)?;
        Ok(ReaderNode { recording, rate, replayer, samples: 0, markers: 0 })
    }

    pub fn from_params(p: &Params<'_>) -> Result<Self> {
        let path = p.path("file")?;
        let recording = read_recording(&path).map_err(|e| p.error(format!("{}: {e}", path.display())))?;
        ReaderNode::new(recording, p.f64("rate")?).map_err(|e| p.error(e.to_string()))
    }
}

impl Node for ReaderNode {
    fn kind(&self) -> &'static str {
        "Reader"
    }

    fn outputs(&self, _: &[PortType]) -> Vec<OutputDecl> {
        let mut v: Vec<OutputDecl> =
            (0..self.replayer.signal_count()).map(|i| OutputDecl::new(format!("signal{i}"), PortType::Signal)).collect();
        v.push(OutputDecl::new("marker", PortType::Marker));
        v
    }

    fn init(&mut self, _: &InitContext<'_>) -> Result<()> {
        self.replayer = Replayer::new(&self.recording, self.rate)?;
        Ok(())
    }

    fn update(&mut self, ctx: &StepContext, _: &Inputs<'_>, out: &mut Outputs<'_>) -> Result<()> {
        let batch = self.replayer.poll(ctx.now)?;
        for (port, chunks) in batch.chunks.into_iter().enumerate() {
            for c in chunks {
                self.samples += c.len() as u64;
                out.push_chunk(port, c);
            }
        }
        let marker_port = self.replayer.signal_count();
        for m in batch.markers {
            self.markers += 1;
            out.push_marker(marker_port, m);
        }
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.replayer.is_finished()
    }

    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![("samples", self.samples), ("markers", self.markers)]
    }
}
