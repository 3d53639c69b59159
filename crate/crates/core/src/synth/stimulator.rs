//! Experiment marker schedules read from an XML design file.
//!
//! ```xml
//! <experiment>
//!   <baseline duration="2"/>
//!   <classes>
//!     <class label="left"/>
//!     <class label="right" code="770"/>
//!   </classes>
//!   <trial cue="1.25" task="3.75" rest="1.5" per_class="20"/>
//!   <seed>42</seed>
//! </experiment>
//! ```
//!
//! Each trial runs baseline, cue (the class label), task, rest. Trials are
//! balanced across classes and their order is shuffled by the seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::MarkerEvent;

pub const SESSION_START: (&str, i32) = ("session_start", 32769);
pub const SESSION_END: (&str, i32) = ("session_end", 32770);
pub const BASELINE: (&str, i32) = ("baseline", 786);
pub const TASK: (&str, i32) = ("task", 781);
pub const REST: (&str, i32) = ("rest", 800);

/// Default cue codes for the usual motor-imagery classes.
pub fn default_class_code(label: &str) -> Option<i32> {
    match label {
        "left" => Some(769),
        "right" => Some(770),
        "foot" | "feet" => Some(771),
        "tongue" => Some(772),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub time_offset: f64,
    pub label: String,
    pub code: Option<i32>,
}

/// Ordered marker schedule with an emission cursor.
#[derive(Debug, Clone, PartialEq)]
pub struct StimSchedule {
    entries: Vec<ScheduleEntry>,
    total_duration: f64,
    cursor: usize,
}

impl StimSchedule {
    pub fn new(entries: Vec<ScheduleEntry>, total_duration: f64) -> Result<Self> {
        if entries.windows(2).any(|w| w[1].time_offset < w[0].time_offset) {
            return Err(Error::Schema("schedule offsets must be non-decreasing".into()));
        }
        Ok(StimSchedule { entries, total_duration, cursor: 0 })
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.cursor
    }

    pub fn is_exhausted(&self) -> bool {
        self.cursor == self.entries.len()
    }

    /// Entries with `time_offset <= clock` not yet emitted, stamped with
    /// their scheduled time.
    pub fn emit_due(&mut self, clock: f64) -> Vec<MarkerEvent> {
        let end = self.cursor + self.entries[self.cursor..].partition_point(|e| e.time_offset <= clock);
        let out = self.entries[self.cursor..end]
            .iter()
            .map(|e| MarkerEvent { timestamp: e.time_offset, label: e.label.clone(), code: e.code })
            .collect();
        self.cursor = end;
        out
    }
}

/// In-place Fisher-Yates shuffle: for `i` from `n-1` down to 1, swap with
/// index `next_u64() % (i + 1)` drawn from ChaCha8 seeded with `seed`.
pub fn shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

fn duration_attr(node: roxmltree::Node<'_, '_>, name: &str) -> Result<f64> {
    let raw = node
        .attribute(name)
        .ok_or_else(|| Error::Schema(format!("<{}> is missing attribute '{name}'", node.tag_name().name())))?;
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidDuration(format!("{name}=\"{raw}\" is not a number")))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidDuration(format!("{name}=\"{raw}\" must be >= 0")));
    }
    Ok(v)
}

fn child<'a, 'i>(parent: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    parent.children().find(|n| n.has_tag_name(name))
}

pub fn parse_stim_config(xml: &str) -> Result<StimSchedule> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| Error::XmlSyntax { line: e.pos().row, message: e.to_string() })?;
    let root = doc.root_element();
    if !root.has_tag_name("experiment") {
        return Err(Error::Schema(format!("root element must be <experiment>, found <{}>", root.tag_name().name())));
    }
    let baseline = match child(root, "baseline") {
        Some(b) => duration_attr(b, "duration")?,
        None => 0.0,
    };
    let classes_node = child(root, "classes").ok_or_else(|| Error::Schema("missing <classes>".into()))?;
    let mut classes = Vec::new();
    for c in classes_node.children().filter(|n| n.has_tag_name("class")) {
        let label = c
            .attribute("label")
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Error::Schema("<class> needs a non-empty label".into()))?;
        let code = match c.attribute("code").filter(|s| !s.trim().is_empty()) {
            Some(s) => Some(s.trim().parse::<i32>().map_err(|_| Error::Schema(format!("bad class code '{s}'")))?),
            None => default_class_code(label),
        };
        classes.push((label.to_string(), code));
    }
    let trial = child(root, "trial").ok_or_else(|| Error::Schema("missing <trial>".into()))?;
    let cue = duration_attr(trial, "cue")?;
    let task = duration_attr(trial, "task")?;
    let rest = duration_attr(trial, "rest")?;
    let per_class: usize = trial
        .attribute("per_class")
        .ok_or_else(|| Error::Schema("<trial> is missing attribute 'per_class'".into()))?
        .trim()
        .parse()
        .map_err(|_| Error::Schema("per_class must be a non-negative integer".into()))?;
    let seed: u64 = match child(root, "seed") {
        Some(s) => s
            .text()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Schema("<seed> must be a non-negative integer".into()))?,
        None => 0,
    };
    if per_class > 0 && classes.is_empty() {
        return Err(Error::Schema("<classes> must list at least one <class>".into()));
    }

    let mut order: Vec<usize> = (0..classes.len()).flat_map(|c| std::iter::repeat_n(c, per_class)).collect();
    shuffle(&mut order, seed);

    let entry = |t: f64, (label, code): (&str, i32)| ScheduleEntry { time_offset: t, label: label.into(), code: Some(code) };
    let mut entries = vec![entry(0.0, SESSION_START)];
    let mut t = 0.0;
    for &c in &order {
        entries.push(entry(t, BASELINE));
        let (label, code) = &classes[c];
        entries.push(ScheduleEntry { time_offset: t + baseline, label: label.clone(), code: *code });
        entries.push(entry(t + baseline + cue, TASK));
        entries.push(entry(t + baseline + cue + task, REST));
        t += baseline + cue + task + rest;
    }
    entries.push(entry(t, SESSION_END));
    StimSchedule::new(entries, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const XML: &str = r#"<experiment>
  <baseline duration="2"/>
  <classes><class label="left"/><class label="right"/></classes>
  <trial cue="1" task="4" rest="1.5" per_class="2"/>
  <seed>42</seed>
</experiment>"#;

    #[test]
    fn balanced_and_timed() {
        let s = parse_stim_config(XML).unwrap();
        let cues: Vec<&ScheduleEntry> =
            s.entries().iter().filter(|e| e.label == "left" || e.label == "right").collect();
        assert_eq!(cues.iter().filter(|e| e.label == "left").count(), 2);
        assert_eq!(cues.iter().filter(|e| e.label == "right").count(), 2);
        assert!(cues.iter().all(|e| e.code == default_class_code(&e.label)));
        assert_eq!(s.total_duration(), 4.0 * 8.5);
        assert_eq!(s.entries().first().unwrap().label, "session_start");
        assert_eq!(s.entries().last().unwrap().time_offset, 34.0);
        assert_eq!(cues[0].time_offset, 2.0);
    }

    #[test]
    fn empty_design() {
        let xml = XML.replace("per_class=\"2\"", "per_class=\"0\"");
        let s = parse_stim_config(&xml).unwrap();
        let labels: Vec<&str> = s.entries().iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["session_start", "session_end"]);
    }

    #[test]
    fn errors() {
        match parse_stim_config("<experiment>\n<classes>\n</experiment>") {
            Err(Error::XmlSyntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_stim_config("<experiment/>"), Err(Error::Schema(_))));
        let bad = XML.replace("cue=\"1\"", "cue=\"-1\"");
        assert!(matches!(parse_stim_config(&bad), Err(Error::InvalidDuration(_))));
        let bad = XML.replace("task=\"4\"", "task=\"four\"");
        assert!(matches!(parse_stim_config(&bad), Err(Error::InvalidDuration(_))));
    }

    #[test]
    fn emission_is_exactly_once() {
        let mut s = parse_stim_config(XML).unwrap();
        assert_eq!(s.emit_due(-1.0).len(), 0);
        let first = s.emit_due(0.0);
        assert_eq!(first.len(), 2);
        let rest = s.emit_due(1e9);
        assert_eq!(first.len() + rest.len(), s.entries().len());
        assert!(s.emit_due(1e9).is_empty());
        assert!(s.is_exhausted());
    }
}
