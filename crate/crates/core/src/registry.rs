//! Catalogue of node kinds available to pipeline files, with parameter
//! schemas. The CLI help text is generated from this table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::Node;
use crate::nodes;
use crate::select::{ChannelSelector, ChannelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Float,
    Int,
    Str,
    Bool,
    StrList,
    /// List of channel names and/or zero-based indices.
    Channels,
    /// List of rows of numbers.
    Matrix,
    /// A string or an integer.
    Label,
    /// A count, or a list of names.
    CountOrNames,
}

impl ParamKind {
    pub fn describe(self) -> &'static str {
        match self {
            ParamKind::Float => "number",
            ParamKind::Int => "integer",
            ParamKind::Str => "string",
            ParamKind::Bool => "bool",
            ParamKind::StrList => "[string]",
            ParamKind::Channels => "[name|index]",
            ParamKind::Matrix => "[[number]]",
            ParamKind::Label => "string|integer",
            ParamKind::CountOrNames => "integer|[string]",
        }
    }

    fn accepts(self, v: &toml::Value) -> bool {
        use toml::Value as V;
        let all = |v: &V, f: &dyn Fn(&V) -> bool| v.as_array().is_some_and(|a| a.iter().all(f));
        let number = |v: &V| v.is_integer() || v.is_float();
        match self {
            ParamKind::Float => number(v),
            ParamKind::Int => v.is_integer(),
            ParamKind::Str => v.is_str(),
            ParamKind::Bool => v.is_bool(),
            ParamKind::StrList => all(v, &|e| e.is_str()),
            ParamKind::Channels => all(v, &|e| e.is_str() || e.is_integer()),
            ParamKind::Matrix => all(v, &|row| all(row, &number)),
            ParamKind::Label => v.is_str() || v.is_integer(),
            ParamKind::CountOrNames => v.is_integer() || all(v, &|e| e.is_str()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    /// TOML literal used when the key is absent; `None` means required.
    pub default: Option<&'static str>,
    /// Optional parameters without a default are simply absent.
    pub optional: bool,
    pub help: &'static str,
}

pub const fn req(name: &'static str, kind: ParamKind, help: &'static str) -> ParamSpec {
    ParamSpec { name, kind, default: None, optional: false, help }
}

pub const fn opt(name: &'static str, kind: ParamKind, default: &'static str, help: &'static str) -> ParamSpec {
    ParamSpec { name, kind, default: Some(default), optional: true, help }
}

pub const fn maybe(name: &'static str, kind: ParamKind, help: &'static str) -> ParamSpec {
    ParamSpec { name, kind, default: None, optional: true, help }
}

pub type BuildFn = fn(&Params<'_>) -> Result<Box<dyn Node>>;

pub struct NodeKind {
    pub name: &'static str,
    pub help: &'static str,
    pub inputs: &'static str,
    pub outputs: &'static str,
    pub params: &'static [ParamSpec],
    pub build: BuildFn,
}

impl NodeKind {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Typed access to one node's parameters, falling back to schema defaults.
pub struct Params<'a> {
    pub node: &'a str,
    pub kind: &'static NodeKind,
    pub table: &'a toml::Table,
    pub base_dir: &'a Path,
}

impl<'a> Params<'a> {
    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::param(self.node, message)
    }

    fn value(&self, name: &str) -> Result<Option<toml::Value>> {
        let spec = self.kind.param(name).unwrap_or_else(|| panic!("{} has no parameter '{name}'", self.kind.name));
        if let Some(v) = self.table.get(name) {
            return Ok(Some(v.clone()));
        }
        match spec.default {
            Some(lit) => {
                let doc: toml::Table = toml::from_str(&format!("v = {lit}")).expect("schema default parses");
                Ok(doc.get("v").cloned())
            }
            None if spec.optional => Ok(None),
            None => Err(self.error(format!("missing required parameter '{name}'"))),
        }
    }

    fn typed<T>(&self, name: &str, f: impl Fn(&toml::Value) -> Option<T>) -> Result<Option<T>> {
        match self.value(name)? {
            None => Ok(None),
            Some(v) => f(&v).map(Some).ok_or_else(|| self.error(format!("parameter '{name}' has the wrong type"))),
        }
    }

    pub fn opt_f64(&self, name: &str) -> Result<Option<f64>> {
        self.typed(name, |v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
    }

    pub fn f64(&self, name: &str) -> Result<f64> {
        self.opt_f64(name)?.ok_or_else(|| self.error(format!("missing '{name}'")))
    }

    pub fn opt_i64(&self, name: &str) -> Result<Option<i64>> {
        self.typed(name, toml::Value::as_integer)
    }

    pub fn usize(&self, name: &str) -> Result<usize> {
        let v = self.opt_i64(name)?.ok_or_else(|| self.error(format!("missing '{name}'")))?;
        usize::try_from(v).map_err(|_| self.error(format!("'{name}' must be non-negative, got {v}")))
    }

    pub fn opt_str(&self, name: &str) -> Result<Option<String>> {
        self.typed(name, |v| v.as_str().map(str::to_string))
    }

    pub fn str(&self, name: &str) -> Result<String> {
        self.opt_str(name)?.ok_or_else(|| self.error(format!("missing '{name}'")))
    }

    pub fn opt_str_list(&self, name: &str) -> Result<Option<Vec<String>>> {
        self.typed(name, |v| v.as_array()?.iter().map(|e| e.as_str().map(str::to_string)).collect())
    }

    /// A path parameter resolved against the pipeline file's directory.
    pub fn path(&self, name: &str) -> Result<PathBuf> {
        let p = PathBuf::from(self.str(name)?);
        Ok(if p.is_absolute() { p } else { self.base_dir.join(p) })
    }

    pub fn channels(&self, name: &str) -> Result<ChannelSpec> {
        self.typed(name, |v| {
            v.as_array()?
                .iter()
                .map(|e| match e {
                    toml::Value::String(s) => Some(ChannelSelector::Name(s.clone())),
                    toml::Value::Integer(i) => usize::try_from(*i).ok().map(ChannelSelector::Index),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .map(ChannelSpec)
        })?
        .ok_or_else(|| self.error(format!("missing '{name}'")))
    }

    pub fn selector(&self, name: &str) -> Result<ChannelSelector> {
        self.typed(name, |v| match v {
            toml::Value::String(s) => Some(ChannelSelector::Name(s.clone())),
            toml::Value::Integer(i) => usize::try_from(*i).ok().map(ChannelSelector::Index),
            _ => None,
        })?
        .ok_or_else(|| self.error(format!("missing '{name}'")))
    }

    /// Raw value of a string-or-integer parameter.
    pub fn label(&self, name: &str) -> Result<toml::Value> {
        self.value(name)?.ok_or_else(|| self.error(format!("missing '{name}'")))
    }

    pub fn matrix(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        self.typed(name, |v| {
            v.as_array()?
                .iter()
                .map(|row| {
                    row.as_array()?
                        .iter()
                        .map(|e| e.as_float().or_else(|| e.as_integer().map(|i| i as f64)))
                        .collect::<Option<Vec<f64>>>()
                })
                .collect()
        })?
        .ok_or_else(|| self.error(format!("missing '{name}'")))
    }

    pub fn raw(&self, name: &str) -> Result<Option<toml::Value>> {
        self.value(name)
    }
}

use ParamKind::*;

macro_rules! kinds {
    ($($name:literal => $ty:path, $help:literal, in $inputs:literal, out $outputs:literal, [$($p:expr),* $(,)?];)*) => {
        static KINDS: &[NodeKind] = &[$(NodeKind {
            name: $name,
            help: $help,
            inputs: $inputs,
            outputs: $outputs,
            params: &[$($p),*],
            build: |p| Ok(Box::new(<$ty>::from_params(p)?)),
        }),*];
    };
}

kinds! {
    "Generator" => nodes::GeneratorNode, "Synthetic signal source", in "-", out "signal", [
        opt("mode", Str, "\"random\"", "random | oscillator | simulation"),
        opt("channels", Int, "8", "channel count"),
        opt("fs", Float, "250.0", "sampling rate in Hz"),
        opt("seed", Int, "0", "random seed"),
        opt("freq", Float, "10.0", "oscillator frequency in Hz"),
        opt("amplitude", Float, "1.0", "oscillator amplitude / overall scale"),
    ];
    "Stimulator" => nodes::StimulatorNode, "Marker schedule from an XML experiment design", in "-", out "marker", [
        req("file", Str, "experiment XML file"),
    ];
    "Reader" => nodes::ReaderNode, "Replays an .xdf or .vhdr recording in real time", in "-",
        out "signal0..signalN (one per signal stream), marker", [
        req("file", Str, "recording path"),
        opt("rate", Float, "1.0", "playback speed factor"),
    ];
    "ButterFilter" => nodes::ButterFilterNode, "Streaming Butterworth band-pass", in "signal", out "signal", [
        req("lowcut", Float, "lower -3 dB edge in Hz"),
        req("highcut", Float, "upper -3 dB edge in Hz"),
        opt("order", Int, "4", "prototype order (1-16)"),
    ];
    "NotchFilter" => nodes::NotchFilterNode, "Streaming IIR notch", in "signal", out "signal", [
        req("freq", Float, "rejected frequency in Hz"),
        opt("q", Float, "30.0", "quality factor"),
    ];
    "DownSample" => nodes::DownSampleNode, "Anti-aliased integer decimation", in "signal", out "signal", [
        req("factor", Int, "integer factor >= 2"),
    ];
    "PsdWelch" => nodes::PsdWelchNode, "Welch power spectral density", in "signal | epoch", out "spectrum", [
        opt("segment_length", Int, "256", "samples per segment"),
        opt("overlap", Float, "0.5", "segment overlap fraction in [0, 1)"),
        opt("window", Str, "\"hanning\"", "blackman | hanning | hamming | triangular"),
        maybe("hop", Int, "samples between estimates on continuous input (default segment_length)"),
    ];
    "Fft" => nodes::FftNode, "FFT magnitude of each epoch", in "epoch", out "spectrum", [];
    "HilbertTransform" => nodes::HilbertNode, "Analytic-signal envelope or phase", in "epoch", out "epoch", [
        opt("output", Str, "\"envelope\"", "envelope | phase"),
    ];
    "Windowing" => nodes::WindowingNode, "Multiplies each epoch by a window", in "epoch", out "epoch", [
        opt("kind", Str, "\"hanning\"", "blackman | hanning | hamming | triangular"),
    ];
    "UnivariateStat" => nodes::UnivariateStatNode, "Per-channel statistic of each epoch", in "epoch", out "vector", [
        opt("stat", Str, "\"mean\"", "mean | median | min | max | range | std | quantile | iqr"),
        maybe("p", Float, "quantile probability in [0, 1]"),
    ];
    "ApplyFunction" => nodes::ApplyFunctionNode, "Elementwise expression in x", in "signal | epoch", out "same as input", [
        req("expr", Str, "expression, e.g. \"x^2\" or \"log(abs(x) + 1)\""),
    ];
    "ChannelSelector" => nodes::ChannelSelectorNode, "Keeps channels in the given order", in "signal", out "signal", [
        req("channels", Channels, "names or zero-based indices"),
    ];
    "SpatialFilter" => nodes::SpatialFilterNode, "Linear map of channels", in "signal", out "signal", [
        req("matrix", Matrix, "rows of coefficients, one row per output"),
        maybe("names", StrList, "output channel names (default s0, s1, ...)"),
    ];
    "ReferenceChannel" => nodes::ReferenceChannelNode, "Subtracts a reference channel", in "signal", out "signal", [
        req("ref", Label, "reference channel name or zero-based index"),
    ];
    "CommonAverageReference" => nodes::CommonAverageNode, "Subtracts the cross-channel mean", in "signal",
        out "signal", [];
    "TimeBasedEpoching" => nodes::EpochingNode, "Epochs on a fixed time grid", in "signal", out "epoch", [
        req("duration", Float, "epoch length in s"),
        req("interval", Float, "onset spacing in s"),
    ];
    "MarkerBasedEpoching" => nodes::MarkerEpochingNode, "One epoch per marker", in "signal, marker", out "epoch", [
        req("duration", Float, "epoch length in s"),
    ];
    "StimulationBasedEpoching" => nodes::StimEpochingNode, "Epochs for matching markers",
        in "signal, marker", out "epoch", [
        req("code", Label, "marker label or integer code"),
        req("duration", Float, "epoch length in s"),
        opt("offset", Float, "0.0", "onset delay after the marker in s (>= 0)"),
    ];
    "FeatureAggregator" => nodes::FeatureAggregatorNode, "Concatenates feature vectors", in "vector...",
        out "vector", [
        opt("tolerance", Float, "0.004", "max timestamp difference between inputs in s"),
    ];
    "Classify" => nodes::ClassifyNode, "LDA classification", in "vector",
        out "marker (mode=class) | vector (mode=probability)", [
        req("model_file", Str, "model JSON written by `nxs train`"),
        opt("mode", Str, "\"class\"", "class | probability"),
    ];
    "ToCsv" => nodes::CsvSinkNode, "CSV logger; markers go to <stem>_markers.csv",
        in "signal | vector | marker, then marker...", out "-", [
        req("file", Str, "output CSV path"),
    ];
    "BinLog" => nodes::BinLogNode, "NXL1 binary logger", in "signal", out "-", [
        req("file", Str, "output path"),
    ];
    "NetSend" => nodes::NetSendNode, "Sends NxFrames", in "signal | vector | marker, then marker...", out "-", [
        req("address", Str, "host:port"),
        opt("transport", Str, "\"udp\"", "udp | tcp"),
    ];
    "NetReceive" => nodes::NetReceiveNode, "Receives NxFrames", in "-", out "signal, marker", [
        req("address", Str, "local host:port to bind"),
        opt("transport", Str, "\"udp\"", "udp | tcp"),
        req("fs", Float, "sampling rate of the incoming signal in Hz"),
        req("channels", CountOrNames, "channel count or names"),
        opt("queue", Int, "256", "ingress queue capacity"),
    ];
    "RdaReceive" => nodes::RdaReceiveNode, "Brain Products RDA client", in "-", out "signal, marker", [
        opt("host", Str, "\"127.0.0.1\"", "recorder host"),
        opt("port", Int, "51244", "recorder port"),
        opt("offset", Float, "0.0", "seconds subtracted from every timestamp"),
        opt("retries", Int, "3", "reconnect attempts before stopping"),
    ];
}

pub fn node_kinds() -> &'static [NodeKind] {
    KINDS
}

pub fn find_kind(name: &str) -> Option<&'static NodeKind> {
    KINDS.iter().find(|k| k.name == name)
}

/// Closest registered kind name, if reasonably close.
pub fn suggest_kind(name: &str) -> Option<String> {
    KINDS
        .iter()
        .map(|k| (strsim::jaro_winkler(&name.to_lowercase(), &k.name.to_lowercase()), k.name))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, n)| n.to_string())
}

/// Checks value types against the schema; returns warnings for keys the
/// kind does not define.
pub fn check_params(node: &str, kind: &NodeKind, table: &toml::Table) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    for (key, value) in table {
        match kind.param(key) {
            Some(spec) if !spec.kind.accepts(value) => {
                return Err(Error::Param {
                    node: node.to_string(),
                    message: format!("parameter '{key}' must be {}, got {}", spec.kind.describe(), value.type_str()),
                })
            }
            Some(_) => {}
            None => warnings.push(format!("node '{node}': unknown parameter '{key}' for {} (ignored)", kind.name)),
        }
    }
    for spec in kind.params.iter().filter(|p| !p.optional) {
        if !table.contains_key(spec.name) {
            return Err(Error::Param {
                node: node.to_string(),
                message: format!("missing required parameter '{}'", spec.name),
            });
        }
    }
    Ok(warnings)
}

/// Human-readable catalogue of every node kind and its parameters.
pub fn describe_kinds() -> String {
    let mut out = String::new();
    for k in KINDS {
        let _ = writeln!(out, "{}  {}", k.name, k.help);
        let _ = writeln!(out, "    inputs: {}    outputs: {}", k.inputs, k.outputs);
        for p in k.params {
            let default = match (p.default, p.optional) {
                (Some(d), _) => format!(" = {d}"),
                (None, true) => " (optional)".to_string(),
                (None, false) => " (required)".to_string(),
            };
            let _ = writeln!(out, "    {}: {}{}  {}", p.name, p.kind.describe(), default, p.help);
        }
    }
    out
}
