//! `key=value` report formatting.

use std::fmt::Write as _;
use std::time::Duration;

use nxs_core::graph::RunReport;

fn ms(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1e3)
}

pub fn run_report(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "status={}", if r.is_success() { "ok" } else { "failed" });
    let _ = writeln!(s, "step_count={}", r.step_count);
    let _ = writeln!(s, "elapsed_s={:.3}", r.elapsed.as_secs_f64());
    let _ = writeln!(s, "mean_latency_ms={}", ms(r.mean_latency));
    let _ = writeln!(s, "max_latency_ms={}", ms(r.max_latency));
    let _ = writeln!(s, "overruns={}", r.overruns);
    let _ = writeln!(s, "source_samples={}", r.source_samples);
    for n in &r.nodes {
        let _ = writeln!(s, "node.{}.kind={}", n.name, n.kind);
        let _ = writeln!(s, "node.{}.time_ms={}", n.name, ms(n.total_time));
        for (k, v) in &n.counters {
            let _ = writeln!(s, "node.{}.{k}={v}", n.name);
        }
    }
    if let Some(e) = &r.failure {
        let _ = writeln!(s, "error={}", e.to_string().replace('\n', " "));
    }
    s
}

fn bench_lines(steps: u64, mean: Duration, p95: Duration, max: Duration, overrun_rate: f64, rate: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "step_count={steps}");
    let _ = writeln!(s, "mean_latency_ms={}", ms(mean));
    let _ = writeln!(s, "p95_latency_ms={}", ms(p95));
    let _ = writeln!(s, "max_latency_ms={}", ms(max));
    let _ = writeln!(s, "overrun_rate={overrun_rate:.4}");
    let _ = writeln!(s, "samples_per_s={rate:.1}");
    s
}

pub fn bench_report(r: &RunReport, loop_period: f64) -> String {
    // busy time: what the steps themselves cost, excluding sleeps
    let compute = r.mean_latency * r.step_count as u32;
    let mut s = bench_lines(r.step_count, r.mean_latency, r.p95_latency, r.max_latency, r.overrun_rate(), r.throughput(compute));
    let _ = writeln!(s, "loop_period_ms={:.3}", loop_period * 1e3);
    let _ = writeln!(s, "source_samples={}", r.source_samples);
    s
}

pub fn empty_bench_report() -> String {
    bench_lines(0, Duration::ZERO, Duration::ZERO, Duration::ZERO, 0.0, 0.0)
}
