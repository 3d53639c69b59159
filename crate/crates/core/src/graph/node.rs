use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::error::Result;
use crate::exec::ExecMode;
use crate::graph::port::{InputDecl, Inputs, OutputDecl, Outputs, PortType};

/// Pipeline time in seconds. Wall mode counts from the moment the run
/// starts; simulated mode is advanced by the scheduler one loop period per
/// step.
#[derive(Debug)]
pub struct PipelineClock {
    state: Mutex<ClockState>,
}

#[derive(Debug, Clone, Copy)]
enum ClockState {
    Wall(Instant),
    Simulated(f64),
}

impl PipelineClock {
    pub fn wall() -> Arc<Self> {
        Arc::new(PipelineClock { state: Mutex::new(ClockState::Wall(Instant::now())) })
    }

    pub fn simulated() -> Arc<Self> {
        Arc::new(PipelineClock { state: Mutex::new(ClockState::Simulated(0.0)) })
    }

    pub fn now(&self) -> f64 {
        match *self.state.lock().unwrap() {
            ClockState::Wall(origin) => origin.elapsed().as_secs_f64(),
            ClockState::Simulated(t) => t,
        }
    }

    /// Restarts the origin at zero, keeping the mode.
    pub fn reset(&self) {
        let mut state = self.state.lock().unwrap();
        *state = match *state {
            ClockState::Wall(_) => ClockState::Wall(Instant::now()),
            ClockState::Simulated(_) => ClockState::Simulated(0.0),
        };
    }

    pub fn set_wall(&self) {
        *self.state.lock().unwrap() = ClockState::Wall(Instant::now());
    }

    pub fn set_simulated(&self, t: f64) {
        *self.state.lock().unwrap() = ClockState::Simulated(t);
    }

    pub fn is_simulated(&self) -> bool {
        matches!(*self.state.lock().unwrap(), ClockState::Simulated(_))
    }
}

/// Passed to [`Node::init`] once the graph is wired.
pub struct InitContext<'a> {
    pub name: &'a str,
    pub loop_period: f64,
    pub clock: Arc<PipelineClock>,
    /// Resolved type of each connected input, in slot order.
    pub input_types: &'a [PortType],
    /// Channel-loop execution mode requested for this pipeline.
    pub exec_mode: ExecMode,
}

/// Passed to every [`Node::update`].
#[derive(Debug, Clone, Copy)]
pub struct StepContext {
    /// Pipeline time at the start of this step.
    pub now: f64,
    pub step: u64,
    pub loop_period: f64,
}

/// A processing unit in a pipeline.
///
/// Lifecycle: `init` once after wiring, `update` once per scheduler step in
/// instantiation order, `terminate` once when the run ends (also after a
/// failure elsewhere).
pub trait Node: Send {
    fn kind(&self) -> &'static str;

    fn inputs(&self) -> InputDecl {
        InputDecl::none()
    }

    /// Output ports given the resolved input types. The first output is the
    /// default port when a consumer names only the node.
    fn outputs(&self, input_types: &[PortType]) -> Vec<OutputDecl>;

    fn init(&mut self, _ctx: &InitContext<'_>) -> Result<()> {
        Ok(())
    }

    fn update(&mut self, ctx: &StepContext, inputs: &Inputs<'_>, outputs: &mut Outputs<'_>) -> Result<()>;

    fn terminate(&mut self) -> Result<()> {
        Ok(())
    }

    /// Sources return true once they will never emit again.
    fn is_finished(&self) -> bool {
        false
    }

    /// Named counters reported at the end of a run.
    fn counters(&self) -> Vec<(&'static str, u64)> {
        Vec::new()
    }
}
