use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::graph::node::StepContext;
use crate::graph::pipeline::Pipeline;
use crate::graph::port::{Inputs, Outputs, PortData};

/// Durations of one scheduler step.
#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub step: u64,
    pub now: f64,
    pub node_durations: Vec<Duration>,
    pub total: Duration,
    /// Signal samples (rows) emitted by source nodes during this step.
    pub source_samples: u64,
}

/// How pipeline time advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pacing {
    /// Steps are spaced one loop period apart on the monotonic clock.
    #[default]
    RealTime,
    /// No sleeping; pipeline time advances one loop period per step.
    Accelerated,
}

/// When a run stops. Whichever condition triggers first wins.
#[derive(Debug, Clone, Default)]
pub struct Termination {
    pub max_steps: Option<u64>,
    /// Pipeline-time budget in seconds (wall time when paced).
    pub duration: Option<f64>,
    pub interrupt: Option<Arc<AtomicBool>>,
    /// Stop once every source node reports it is finished.
    pub until_sources_finished: bool,
}

impl Termination {
    pub fn steps(n: u64) -> Self {
        Termination { max_steps: Some(n), ..Default::default() }
    }

    pub fn duration(seconds: f64) -> Self {
        Termination { duration: Some(seconds), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub name: String,
    pub kind: &'static str,
    pub total_time: Duration,
    pub max_time: Duration,
    pub counters: Vec<(&'static str, u64)>,
}

#[derive(Debug)]
pub struct RunReport {
    pub step_count: u64,
    pub elapsed: Duration,
    pub mean_latency: Duration,
    pub p95_latency: Duration,
    pub max_latency: Duration,
    pub overruns: u64,
    pub source_samples: u64,
    pub nodes: Vec<NodeSummary>,
    pub failure: Option<Error>,
}

impl RunReport {
    pub fn is_success(&self) -> bool {
        self.failure.is_none()
    }

    pub fn overrun_rate(&self) -> f64 {
        if self.step_count == 0 {
            0.0
        } else {
            self.overruns as f64 / self.step_count as f64
        }
    }

    /// Source samples per second of compute time.
    pub fn throughput(&self, compute: Duration) -> f64 {
        let secs = compute.as_secs_f64();
        if secs > 0.0 {
            self.source_samples as f64 / secs
        } else {
            0.0
        }
    }

    pub fn into_result(self) -> Result<RunReport> {
        match self.failure {
            Some(_) => Err(self.failure.unwrap()),
            None => Ok(self),
        }
    }
}

impl Pipeline {
    /// Clears every port, then updates each node once in instantiation
    /// order. A node failure aborts the step and terminates all nodes.
    pub fn step(&mut self, now: f64) -> Result<StepReport> {
        if self.wiring.is_none() {
            self.init()?;
        }
        let step = self.step_index();
        let ctx = StepContext { now, step, loop_period: self.loop_period };
        let wiring = self.wiring.as_mut().expect("wired");
        for ports in wiring.outputs.iter_mut() {
            for p in ports.iter_mut() {
                p.clear();
            }
        }
        let started = Instant::now();
        let mut report = StepReport { step, now, node_durations: Vec::with_capacity(self.slots.len()), ..Default::default() };
        let mut failure = None;
        for i in 0..self.slots.len() {
            let (before, rest) = wiring.outputs.split_at_mut(i);
            let inputs = Inputs::new(wiring.sources[i].iter().map(|&(p, port)| &before[p][port]).collect());
            let own = &mut rest[0];
            let t0 = Instant::now();
            let result = self.slots[i].node.update(&ctx, &inputs, &mut Outputs::new(own));
            report.node_durations.push(t0.elapsed());
            if let Err(e) = result {
                failure = Some(Error::NodeFailure { node: self.slots[i].name.clone(), source: Box::new(e) });
                break;
            }
            if wiring.sources[i].is_empty() {
                report.source_samples += own
                    .iter()
                    .map(|p| match p {
                        PortData::Signal(chunks) => chunks.iter().map(|c| c.len() as u64).sum(),
                        _ => 0,
                    })
                    .sum::<u64>();
            }
        }
        report.total = started.elapsed();
        self.steps_done += 1;
        if let Some(e) = failure {
            if let Err(t) = self.terminate_all() {
                log::error!("{t}");
            }
            return Err(e);
        }
        Ok(report)
    }

    fn step_index(&self) -> u64 {
        self.steps_done
    }

    fn sources_finished(&self) -> bool {
        let Some(w) = &self.wiring else { return true };
        let mut any = false;
        for (i, slot) in self.slots.iter().enumerate() {
            if w.sources[i].is_empty() {
                any = true;
                if !slot.node.is_finished() {
                    return false;
                }
            }
        }
        any
    }

    /// Runs the step loop until a termination condition holds, then
    /// terminates every node in reverse instantiation order.
    pub fn run(&mut self, termination: &Termination, pacing: Pacing) -> RunReport {
        let period = Duration::from_secs_f64(self.loop_period);
        match pacing {
            Pacing::RealTime => self.clock.set_wall(),
            Pacing::Accelerated => self.clock.set_simulated(0.0),
        }
        let mut latencies: Vec<Duration> = Vec::new();
        let mut node_totals: Vec<Duration> = vec![Duration::ZERO; self.slots.len()];
        let mut node_max: Vec<Duration> = vec![Duration::ZERO; self.slots.len()];
        let mut overruns = 0u64;
        let mut source_samples = 0u64;
        let mut failure = None;
        self.steps_done = 0;

        if self.wiring.is_none() {
            if let Err(e) = self.init() {
                return self.finish(latencies, node_totals, node_max, overruns, 0, Duration::ZERO, Some(e));
            }
        }
        let start = Instant::now();
        let mut deadline = start;
        loop {
            let steps = latencies.len() as u64;
            if termination.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
            if termination.interrupt.as_ref().is_some_and(|f| f.load(Ordering::SeqCst)) {
                break;
            }
            if termination.until_sources_finished && steps > 0 && self.sources_finished() {
                break;
            }
            let now = match pacing {
                Pacing::RealTime => start.elapsed().as_secs_f64(),
                Pacing::Accelerated => (steps + 1) as f64 * self.loop_period,
            };
            if let Some(d) = termination.duration {
                let done = match pacing {
                    Pacing::RealTime => now >= d,
                    Pacing::Accelerated => now > d + 1e-9,
                };
                if done {
                    break;
                }
            }
            if pacing == Pacing::Accelerated {
                self.clock.set_simulated(now);
            }
            let step_start = Instant::now();
            match self.step(now) {
                Ok(rep) => {
                    for (k, d) in rep.node_durations.iter().enumerate() {
                        node_totals[k] += *d;
                        node_max[k] = node_max[k].max(*d);
                    }
                    source_samples += rep.source_samples;
                }
                Err(e) => {
                    failure = Some(e);
                    latencies.push(step_start.elapsed());
                    break;
                }
            }
            let latency = step_start.elapsed();
            latencies.push(latency);
            if latency > period {
                overruns += 1;
            }
            if pacing == Pacing::RealTime {
                deadline += period;
                let now_instant = Instant::now();
                if deadline > now_instant {
                    std::thread::sleep(deadline - now_instant);
                } else {
                    // overrun: start the next step immediately
                    deadline = now_instant;
                }
            }
        }
        let elapsed = start.elapsed();
        self.finish(latencies, node_totals, node_max, overruns, source_samples, elapsed, failure)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &mut self,
        latencies: Vec<Duration>,
        node_totals: Vec<Duration>,
        node_max: Vec<Duration>,
        overruns: u64,
        source_samples: u64,
        elapsed: Duration,
        mut failure: Option<Error>,
    ) -> RunReport {
        if let Err(e) = self.terminate_all() {
            failure.get_or_insert(e);
        }
        let nodes = self
            .slots
            .iter()
            .enumerate()
            .map(|(i, s)| NodeSummary {
                name: s.name.clone(),
                kind: s.node.kind(),
                total_time: node_totals[i],
                max_time: node_max[i],
                counters: s.node.counters(),
            })
            .collect();
        let step_count = latencies.len() as u64;
        let mean_latency = if step_count > 0 {
            latencies.iter().sum::<Duration>() / step_count as u32
        } else {
            Duration::ZERO
        };
        let mut sorted = latencies;
        sorted.sort_unstable();
        let p95_latency = percentile(&sorted, 0.95);
        let max_latency = sorted.last().copied().unwrap_or_default();
        RunReport {
            step_count,
            elapsed,
            mean_latency,
            p95_latency,
            max_latency,
            overruns,
            source_samples,
            nodes,
            failure,
        }
    }
}

fn percentile(sorted: &[Duration], p: f64) -> Duration {
    if sorted.is_empty() {
        return Duration::ZERO;
    }
    let idx = ((sorted.len() as f64 * p).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}
