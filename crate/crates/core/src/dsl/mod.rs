//! Pipeline description files and the elementwise expression language.
//!
//! A pipeline file is TOML with one `[node.<name>]` table per node, in
//! instantiation order:
//!
//! ```toml
//! [pipeline]
//! loop_period = 0.01
//!
//! [node.src]
//! kind = "Generator"
//! mode = "oscillator"
//!
//! [node.filt]
//! kind = "ButterFilter"
//! input = "src"
//! lowcut = 8
//! highcut = 12
//! ```

mod expr;

pub use expr::{eval_expression, parse_expression, DomainViolation, Expr, ExprEvaluator, Func};

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::graph::{Pipeline, DEFAULT_LOOP_PERIOD};
use crate::registry::{check_params, find_kind, suggest_kind, Params};

/// One `[node.<name>]` table.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDecl {
    pub name: String,
    pub kind: String,
    /// Producer references (`node` or `node.port`) in slot order.
    pub inputs: Vec<String>,
    /// Kind-specific parameters, type-checked against the registry.
    pub params: toml::Table,
    /// 1-based line of the table header.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub loop_period: f64,
    /// `Some` when the file sets `[pipeline] parallel`.
    pub parallel: Option<bool>,
    pub nodes: Vec<NodeDecl>,
    pub warnings: Vec<String>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

/// Strips optional quotes from a dotted-key segment.
fn unquote(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"').and_then(|r| r.strip_suffix('"')).unwrap_or(s)
}

/// `(name, line)` of every `[node.<name>]` header, in file order.
fn node_headers(text: &str) -> Vec<(String, usize)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("").trim();
            let inner = l.strip_prefix('[')?.strip_suffix(']')?;
            if inner.starts_with('[') {
                return None;
            }
            let (head, rest) = inner.split_once('.')?;
            (head.trim() == "node").then(|| (unquote(rest).to_string(), i + 1))
        })
        .collect()
}

pub fn parse_pipeline(text: &str) -> Result<PipelineSpec> {
    let headers = node_headers(text);
    let mut seen = HashSet::new();
    for (name, _) in &headers {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateNodeName(name.clone()));
        }
    }
    let doc: toml::Table = toml::from_str(text).map_err(|e| {
        let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        Error::Syntax { line, col, message: e.message().to_string() }
    })?;

    let mut warnings = Vec::new();
    let mut loop_period = DEFAULT_LOOP_PERIOD;
    let mut parallel = None;
    let mut nodes = Vec::new();
    for (key, value) in &doc {
        match key.as_str() {
            "pipeline" => {
                let table = value.as_table().ok_or_else(|| syntax(1, "[pipeline] must be a table"))?;
                for (k, v) in table {
                    match k.as_str() {
                        "loop_period" => {
                            let p = v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
                            loop_period = p
                                .filter(|p| *p > 0.0 && p.is_finite())
                                .ok_or_else(|| syntax(1, "loop_period must be a positive number"))?;
                        }
                        "parallel" => {
                            parallel = Some(v.as_bool().ok_or_else(|| syntax(1, "parallel must be a bool"))?);
                        }
                        other => warnings.push(format!("unknown key '{other}' in [pipeline] (ignored)")),
                    }
                }
            }
            "node" => {
                let table = value.as_table().ok_or_else(|| syntax(1, "'node' must be a table of tables"))?;
                for (name, decl) in table {
                    let line = headers.iter().find(|(n, _)| n == name).map_or(1, |h| h.1);
                    let (decl, mut w) = node_decl(name, decl, line)?;
                    warnings.append(&mut w);
                    nodes.push(decl);
                }
            }
            other => warnings.push(format!("unknown top-level key '{other}' (ignored)")),
        }
    }
    if nodes.is_empty() {
        return Err(syntax(1, "no nodes declared"));
    }
    if parallel == Some(true) && !cfg!(feature = "parallel") {
        warnings.push("parallel = true but this build has no parallel support; running sequentially".into());
    }
    Ok(PipelineSpec { loop_period, parallel, nodes, warnings })
}

fn syntax(line: usize, message: &str) -> Error {
    Error::Syntax { line, col: 1, message: message.to_string() }
}

fn node_decl(name: &str, value: &toml::Value, line: usize) -> Result<(NodeDecl, Vec<String>)> {
    let table = value.as_table().ok_or_else(|| syntax(line, &format!("node '{name}' must be a table")))?;
    let kind_name = match table.get("kind") {
        Some(toml::Value::String(k)) => k.clone(),
        Some(_) => return Err(syntax(line, &format!("node '{name}': kind must be a string"))),
        None => return Err(syntax(line, &format!("node '{name}' has no kind"))),
    };
    let kind = find_kind(&kind_name)
        .ok_or_else(|| Error::UnknownNodeKind { name: kind_name.clone(), hint: suggest_kind(&kind_name) })?;
    let inputs = match table.get("input") {
        None => Vec::new(),
        Some(toml::Value::String(s)) => vec![s.clone()],
        Some(toml::Value::Array(a)) => a
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| syntax(line, &format!("node '{name}': input must be a string or list of strings")))?,
        Some(_) => return Err(syntax(line, &format!("node '{name}': input must be a string or list of strings"))),
    };
    let params: toml::Table =
        table.iter().filter(|(k, _)| *k != "kind" && *k != "input").map(|(k, v)| (k.clone(), v.clone())).collect();
    let warnings = check_params(name, kind, &params)?;
    Ok((NodeDecl { name: name.to_string(), kind: kind_name, inputs, params, line }, warnings))
}

/// Instantiates every node and edge. Relative file parameters are resolved
/// against `base_dir`. Graph-level checks happen in [`Pipeline::validate`].
pub fn build_pipeline(spec: &PipelineSpec, base_dir: &Path) -> Result<Pipeline> {
    let mut pipeline = Pipeline::new(spec.loop_period);
    match spec.parallel {
        Some(true) => pipeline.set_exec_mode(ExecMode::Parallel),
        Some(false) => pipeline.set_exec_mode(ExecMode::Sequential),
        None => {}
    }
    for decl in &spec.nodes {
        let kind = find_kind(&decl.kind)
            .ok_or_else(|| Error::UnknownNodeKind { name: decl.kind.clone(), hint: suggest_kind(&decl.kind) })?;
        let params = Params { node: &decl.name, kind, table: &decl.params, base_dir };
        let node = (kind.build)(&params)?;
        let inputs: Vec<&str> = decl.inputs.iter().map(String::as_str).collect();
        pipeline.add(&decl.name, node, &inputs)?;
    }
    for w in &spec.warnings {
        pipeline.add_warning(w.clone());
    }
    Ok(pipeline)
}

/// Reads, parses and builds a pipeline file.
pub fn load_pipeline(path: &Path) -> Result<Pipeline> {
    let text = std::fs::read_to_string(path)?;
    let spec = parse_pipeline(&text)?;
    build_pipeline(&spec, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[pipeline]
loop_period = 0.02

[node.src]
kind = "Generator"
mode = "oscillator"
channels = 2

[node.filt]
kind = "ButterFilter"
input = "src"
lowcut = 8
highcut = 12
colour = "red"
"#;

    #[test]
    fn parses_in_order() {
        let spec = parse_pipeline(EXAMPLE).unwrap();
        assert_eq!(spec.loop_period, 0.02);
        let names: Vec<_> = spec.nodes.iter().map(|n| n.name.as_str()).collect();
        assert_eq!(names, ["src", "filt"]);
        assert_eq!(spec.nodes[1].inputs, ["src"]);
        assert_eq!(spec.nodes[1].line, 10);
        assert_eq!(spec.warnings.len(), 1);
        let p = build_pipeline(&spec, Path::new(".")).unwrap();
        assert!(p.validate().is_ok());
    }

    #[test]
    fn errors() {
        let dup = "[node.filt]\nkind='Fft'\n[node.filt]\nkind='Fft'\n";
        assert!(matches!(parse_pipeline(dup), Err(Error::DuplicateNodeName(n)) if n == "filt"));
        match parse_pipeline("[node.a]\nkind = \"ButerFilter\"\n") {
            Err(Error::UnknownNodeKind { hint, .. }) => assert_eq!(hint.as_deref(), Some("ButterFilter")),
            other => panic!("{other:?}"),
        }
        match parse_pipeline("[node.a]\nkind = \n") {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_pipeline(""), Err(Error::Syntax { .. })));
        assert!(matches!(
            parse_pipeline("[node.a]\nkind='ButterFilter'\nlowcut='x'\nhighcut=2\n"),
            Err(Error::Param { .. })
        ));
        assert!(matches!(parse_pipeline("[node.a]\nkind='ButterFilter'\nlowcut=1\n"), Err(Error::Param { .. })));
    }
}
