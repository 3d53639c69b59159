use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::graph::node::{InitContext, Node, PipelineClock};
use crate::graph::port::{OutputDecl, PortData, PortType};

pub const DEFAULT_LOOP_PERIOD: f64 = 0.01;

/// Reference to an output port: `node` or `node.port`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortRef {
    pub node: String,
    pub port: Option<String>,
}

impl PortRef {
    pub fn parse(text: &str) -> Self {
        match text.split_once('.') {
            Some((node, port)) => PortRef { node: node.to_string(), port: Some(port.to_string()) },
            None => PortRef { node: text.to_string(), port: None },
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.port {
            Some(p) => write!(f, "{}.{}", self.node, p),
            None => f.write_str(&self.node),
        }
    }
}

impl From<&str> for PortRef {
    fn from(s: &str) -> Self {
        PortRef::parse(s)
    }
}

/// A producer port feeding input `slot` of node `to`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: PortRef,
    pub to: String,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    TypeMismatch { from: PortRef, to: String, slot: &'static str, expected: Vec<PortType>, got: PortType },
    CycleDetected(Vec<String>),
    DanglingInput { node: String, reference: String },
    EpochContextViolation { node: String, from: PortRef },
    UnknownPort { from: PortRef, to: String },
    UnconnectedInput { node: String, slot: &'static str },
    UnexpectedInput { node: String, slot: usize },
    MultipleProducers { node: String, slot: usize },
    /// The producer is instantiated after its consumer, so its output would
    /// be cleared before the consumer could see it.
    OrderViolation { producer: String, consumer: String },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::TypeMismatch { from, to, slot, expected, got } => {
                let names: Vec<&str> = expected.iter().map(|t| t.name()).collect();
                write!(
                    f,
                    "type mismatch on edge {from} -> {to}: input '{slot}' accepts {} but '{from}' produces {got}",
                    names.join("|")
                )
            }
            ValidationIssue::CycleDetected(path) => write!(f, "cycle detected: {}", path.join(" -> ")),
            ValidationIssue::DanglingInput { node, reference } => {
                write!(f, "node '{node}' references unknown node '{reference}'")
            }
            ValidationIssue::EpochContextViolation { node, from } => write!(
                f,
                "node '{node}' only processes epoched data but is fed continuous signal by '{from}'"
            ),
            ValidationIssue::UnknownPort { from, to } => {
                write!(f, "node '{to}' references unknown output port '{from}'")
            }
            ValidationIssue::UnconnectedInput { node, slot } => {
                write!(f, "input '{slot}' of node '{node}' has no producer")
            }
            ValidationIssue::UnexpectedInput { node, slot } => {
                write!(f, "node '{node}' has no input slot {slot}")
            }
            ValidationIssue::MultipleProducers { node, slot } => {
                write!(f, "input slot {slot} of node '{node}' has more than one producer")
            }
            ValidationIssue::OrderViolation { producer, consumer } => write!(
                f,
                "node '{consumer}' is declared before its producer '{producer}'"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

pub(crate) struct NodeSlot {
    pub name: String,
    pub node: Box<dyn Node>,
    pub initialized: bool,
}

/// Resolved connections, built by [`Pipeline::init`].
pub(crate) struct Wiring {
    /// Per node, per input slot: (producer index, producer port).
    pub sources: Vec<Vec<(usize, usize)>>,
    pub outputs: Vec<Vec<PortData>>,
    pub output_decls: Vec<Vec<OutputDecl>>,
}

/// Nodes in instantiation order plus the edges between them.
pub struct Pipeline {
    pub(crate) slots: Vec<NodeSlot>,
    edges: Vec<Edge>,
    pub(crate) loop_period: f64,
    pub(crate) wiring: Option<Wiring>,
    pub(crate) clock: Arc<PipelineClock>,
    pub(crate) steps_done: u64,
    warnings: Vec<String>,
    exec_mode: ExecMode,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline::new(DEFAULT_LOOP_PERIOD)
    }
}

impl fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline")
            .field("nodes", &self.node_names())
            .field("edges", &self.edges)
            .field("loop_period", &self.loop_period)
            .finish()
    }
}

impl Pipeline {
    pub fn new(loop_period: f64) -> Self {
        Pipeline {
            slots: Vec::new(),
            edges: Vec::new(),
            loop_period,
            wiring: None,
            clock: PipelineClock::simulated(),
            steps_done: 0,
            warnings: Vec::new(),
            exec_mode: ExecMode::default(),
        }
    }

    pub fn loop_period(&self) -> f64 {
        self.loop_period
    }

    pub fn set_loop_period(&mut self, period: f64) {
        self.loop_period = period;
    }

    pub fn exec_mode(&self) -> ExecMode {
        self.exec_mode
    }

    /// Takes effect at the next [`Pipeline::init`].
    pub fn set_exec_mode(&mut self, mode: ExecMode) {
        self.exec_mode = mode;
    }

    pub fn clock(&self) -> &Arc<PipelineClock> {
        &self.clock
    }

    /// Appends a node. Instantiation order is the update order.
    pub fn add_node(&mut self, name: impl Into<String>, node: Box<dyn Node>) -> Result<&mut Self> {
        let name = name.into();
        if self.slots.iter().any(|s| s.name == name) {
            return Err(Error::DuplicateNodeName(name));
        }
        self.slots.push(NodeSlot { name, node, initialized: false });
        self.wiring = None;
        Ok(self)
    }

    /// Declares that `from` feeds input `slot` of node `to`.
    pub fn connect(&mut self, from: impl Into<PortRef>, to: impl Into<String>, slot: usize) -> &mut Self {
        self.edges.push(Edge { from: from.into(), to: to.into(), slot });
        self.wiring = None;
        self
    }

    /// Adds a node fed by `inputs` in slot order.
    pub fn add(&mut self, name: &str, node: Box<dyn Node>, inputs: &[&str]) -> Result<&mut Self> {
        self.add_node(name, node)?;
        for (slot, from) in inputs.iter().enumerate() {
            self.connect(*from, name, slot);
        }
        Ok(self)
    }

    pub fn add_warning(&mut self, w: String) {
        self.warnings.push(w);
    }

    pub fn node_names(&self) -> Vec<&str> {
        self.slots.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn node_kinds(&self) -> Vec<&'static str> {
        self.slots.iter().map(|s| s.node.kind()).collect()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Mutable access to a node by name, e.g. to inspect a sink after a run.
    pub fn node_mut(&mut self, name: &str) -> Option<&mut (dyn Node + 'static)> {
        self.slots.iter_mut().find(|s| s.name == name).map(|s| s.node.as_mut())
    }

    pub fn node(&self, name: &str) -> Option<&(dyn Node + 'static)> {
        self.slots.iter().find(|s| s.name == name).map(|s| s.node.as_ref())
    }

    /// Checks port types, acyclicity, epoch context and name resolution.
    pub fn validate(&self) -> ValidationReport {
        self.resolve().0
    }

    fn resolve(&self) -> (ValidationReport, Option<Wiring>) {
        let mut report = ValidationReport { errors: Vec::new(), warnings: self.warnings.clone() };
        let index: HashMap<&str, usize> =
            self.slots.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
        let n = self.slots.len();

        // per consumer: slot -> edges
        let mut fed: Vec<Vec<Option<(usize, &Edge)>>> = vec![Vec::new(); n];
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for edge in &self.edges {
            let Some(&to) = index.get(edge.to.as_str()) else {
                report.errors.push(ValidationIssue::DanglingInput {
                    node: edge.to.clone(),
                    reference: edge.to.clone(),
                });
                continue;
            };
            let Some(&from) = index.get(edge.from.node.as_str()) else {
                report.errors.push(ValidationIssue::DanglingInput {
                    node: edge.to.clone(),
                    reference: edge.from.node.clone(),
                });
                continue;
            };
            let slots = &mut fed[to];
            if slots.len() <= edge.slot {
                slots.resize(edge.slot + 1, None);
            }
            if slots[edge.slot].is_some() {
                report.errors.push(ValidationIssue::MultipleProducers { node: edge.to.clone(), slot: edge.slot });
                continue;
            }
            slots[edge.slot] = Some((from, edge));
            adjacency[from].push(to);
        }

        for (i, slot) in self.slots.iter().enumerate() {
            let decl = slot.node.inputs();
            for (k, s) in decl.slots.iter().enumerate() {
                if fed[i].get(k).is_none_or(Option::is_none) {
                    report.errors.push(ValidationIssue::UnconnectedInput { node: slot.name.clone(), slot: s.name });
                }
            }
            for k in decl.slots.len()..fed[i].len() {
                match (&decl.variadic, fed[i][k].is_some()) {
                    (None, true) => report
                        .errors
                        .push(ValidationIssue::UnexpectedInput { node: slot.name.clone(), slot: k }),
                    (Some(v), false) => report
                        .errors
                        .push(ValidationIssue::UnconnectedInput { node: slot.name.clone(), slot: v.name }),
                    _ => {}
                }
            }
        }

        if let Some(cycle) = find_cycle(&adjacency) {
            let path = cycle.iter().map(|&i| self.slots[i].name.clone()).collect();
            report.errors.push(ValidationIssue::CycleDetected(path));
        } else {
            for (to, inputs) in fed.iter().enumerate() {
                for (from, _) in inputs.iter().flatten() {
                    if *from >= to {
                        report.errors.push(ValidationIssue::OrderViolation {
                            producer: self.slots[*from].name.clone(),
                            consumer: self.slots[to].name.clone(),
                        });
                    }
                }
            }
        }

        // Type resolution in instantiation order.
        let mut output_decls: Vec<Option<Vec<OutputDecl>>> = vec![None; n];
        let mut sources: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for i in 0..n {
            let node = &self.slots[i].node;
            let decl = node.inputs();
            let mut types = Vec::new();
            let mut resolved = true;
            for (k, entry) in fed[i].iter().enumerate() {
                let Some((from, edge)) = entry else {
                    resolved = false;
                    continue;
                };
                let Some(outs) = output_decls[*from].as_ref().filter(|_| *from < i) else {
                    resolved = false;
                    continue;
                };
                let port = match &edge.from.port {
                    None if !outs.is_empty() => Some(0),
                    None => None,
                    Some(p) => outs.iter().position(|o| &o.name == p),
                };
                let Some(port) = port else {
                    report.errors.push(ValidationIssue::UnknownPort { from: edge.from.clone(), to: edge.to.clone() });
                    resolved = false;
                    continue;
                };
                let got = outs[port].port_type;
                if let Some(slot) = decl.slot(k) {
                    if !slot.accepts.contains(&got) {
                        let epoch_only = slot.accepts.iter().all(|t| *t == PortType::Epoch);
                        if epoch_only && got == PortType::Signal {
                            report.errors.push(ValidationIssue::EpochContextViolation {
                                node: edge.to.clone(),
                                from: edge.from.clone(),
                            });
                        } else {
                            report.errors.push(ValidationIssue::TypeMismatch {
                                from: edge.from.clone(),
                                to: edge.to.clone(),
                                slot: slot.name,
                                expected: slot.accepts.to_vec(),
                                got,
                            });
                        }
                        resolved = false;
                    }
                }
                types.push(got);
                sources[i].push((*from, port));
            }
            if resolved {
                output_decls[i] = Some(node.outputs(&types));
            }
        }

        if !report.is_ok() {
            return (report, None);
        }
        let output_decls: Vec<Vec<OutputDecl>> = output_decls.into_iter().map(Option::unwrap_or_default).collect();
        let outputs = output_decls
            .iter()
            .map(|d| d.iter().map(|o| PortData::empty(o.port_type)).collect())
            .collect();
        (report, Some(Wiring { sources, outputs, output_decls }))
    }

    /// Validates, wires and initializes every node.
    pub fn init(&mut self) -> Result<ValidationReport> {
        let (report, wiring) = self.resolve();
        let Some(wiring) = wiring else {
            return Err(Error::Validation(report.to_string()));
        };
        for i in 0..self.slots.len() {
            let input_types: Vec<PortType> = wiring.sources[i]
                .iter()
                .map(|&(p, port)| wiring.output_decls[p][port].port_type)
                .collect();
            let slot = &mut self.slots[i];
            let ctx = InitContext {
                name: &slot.name,
                loop_period: self.loop_period,
                clock: self.clock.clone(),
                input_types: &input_types,
                exec_mode: self.exec_mode,
            };
            if let Err(e) = slot.node.init(&ctx) {
                let err = Error::NodeFailure { node: slot.name.clone(), source: Box::new(e) };
                let _ = self.terminate_all();
                return Err(err);
            }
            slot.initialized = true;
        }
        self.wiring = Some(wiring);
        Ok(report)
    }

    pub fn is_initialized(&self) -> bool {
        self.wiring.is_some()
    }

    /// Output port declarations of a node, available after [`Pipeline::init`].
    pub fn outputs_of(&self, name: &str) -> Option<&[OutputDecl]> {
        let i = self.slots.iter().position(|s| s.name == name)?;
        Some(&self.wiring.as_ref()?.output_decls[i])
    }

    /// Data written to a node's output port during the last step.
    pub fn port_data(&self, name: &str, port: usize) -> Option<&PortData> {
        let i = self.slots.iter().position(|s| s.name == name)?;
        self.wiring.as_ref()?.outputs[i].get(port)
    }

    /// Calls terminate on every initialized node in reverse instantiation
    /// order. Returns the first error, after attempting all of them.
    pub fn terminate_all(&mut self) -> Result<()> {
        let mut first = None;
        for slot in self.slots.iter_mut().rev() {
            if slot.initialized {
                slot.initialized = false;
                if let Err(e) = slot.node.terminate() {
                    log::error!("terminate of '{}' failed: {e}", slot.name);
                    first.get_or_insert(Error::NodeFailure { node: slot.name.clone(), source: Box::new(e) });
                }
            }
        }
        self.wiring = None;
        first.map_or(Ok(()), Err)
    }
}

/// Returns one cycle as a node index path (first node repeated at the end).
fn find_cycle(adjacency: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(v: usize, adj: &[Vec<usize>], mark: &mut [Mark], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        mark[v] = Mark::Active;
        stack.push(v);
        for &w in &adj[v] {
            match mark[w] {
                Mark::Active => {
                    let start = stack.iter().position(|&x| x == w).unwrap();
                    let mut path = stack[start..].to_vec();
                    path.push(w);
                    return Some(path);
                }
                Mark::New => {
                    if let Some(p) = visit(w, adj, mark, stack) {
                        return Some(p);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        mark[v] = Mark::Done;
        None
    }
    let mut mark = vec![Mark::New; adjacency.len()];
    let mut stack = Vec::new();
    for v in 0..adjacency.len() {
        if mark[v] == Mark::New {
            if let Some(p) = visit(v, adjacency, &mut mark, &mut stack) {
                return Some(p);
            }
        }
    }
    None
}
