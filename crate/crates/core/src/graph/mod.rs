//! Typed node graphs and the sequential step loop.
//!
//! A [`Pipeline`] holds nodes in instantiation order and the edges between
//! their ports. Each step clears every output port and then updates every
//! node once, in order, so a chunk produced upstream is seen downstream in
//! the same step and never again.

mod node;
mod pipeline;
mod port;
mod scheduler;

pub use node::{InitContext, Node, PipelineClock, StepContext};
pub use pipeline::{Edge, Pipeline, PortRef, ValidationIssue, ValidationReport, DEFAULT_LOOP_PERIOD};
pub use port::{InputDecl, InputSlot, Inputs, OutputDecl, Outputs, PortData, PortType};
pub use scheduler::{NodeSummary, Pacing, RunReport, StepReport, Termination};
