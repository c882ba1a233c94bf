//! Plain-text edge-list and vertex-weight serialization.
//!
//! Edge-list format: a header line `n m` followed by `m` lines `u v` with
//! `0 <= u < v < n`. Blank lines and `#` comment lines are ignored. Weight
//! files hold one decimal value per vertex, in vertex order.

use super::{Graph, GraphError};
use std::fs;
use std::path::Path;

/// Parses the edge-list format. Structural problems surface as the
/// specific [`GraphError`] variant, not a generic parse failure.
pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut lines = content_lines(text);
    let (header_no, header) = lines
        .next()
        .ok_or_else(|| GraphError::MalformedHeader("empty input".into()))?;
    let mut parts = header.split_whitespace();
    let n: usize = parse_field(parts.next(), header_no, header)?;
    let m: usize = parse_field(parts.next(), header_no, header)?;
    if parts.next().is_some() {
        return Err(GraphError::MalformedHeader(format!(
            "line {header_no}: expected `n m`, got `{header}`"
        )));
    }
    let mut edges = Vec::with_capacity(m);
    for (line_no, line) in lines {
        let mut parts = line.split_whitespace();
        let u: usize = parse_edge_field(parts.next(), line_no, line)?;
        let v: usize = parse_edge_field(parts.next(), line_no, line)?;
        if parts.next().is_some() {
            return Err(GraphError::MalformedLine {
                line: line_no,
                reason: format!("expected `u v`, got `{line}`"),
            });
        }
        if u >= v {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            return Err(GraphError::MalformedLine {
                line: line_no,
                reason: format!("endpoints must satisfy u < v, got `{line}`"),
            });
        }
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(GraphError::EdgeCountMismatch {
            expected: m,
            found: edges.len(),
        });
    }
    Graph::from_edges(n, &edges)
}

/// Renders a graph in the edge-list format, edges sorted by `(u, v)`.
pub fn format_edge_list(g: &Graph) -> String {
    let mut out = String::with_capacity(16 + 8 * g.edge_count());
    out.push_str(&format!("{} {}\n", g.vertex_count(), g.edge_count()));
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

pub fn load_edge_list(path: &Path) -> Result<Graph, GraphError> {
    parse_edge_list(&fs::read_to_string(path)?)
}

pub fn save_edge_list(path: &Path, g: &Graph) -> Result<(), GraphError> {
    fs::write(path, format_edge_list(g))?;
    Ok(())
}

/// Parses a weight file: one finite decimal per line, `n` lines total.
pub fn parse_weights(text: &str, n: usize) -> Result<Vec<f64>, GraphError> {
    let mut weights = Vec::with_capacity(n);
    for (line_no, line) in content_lines(text) {
        let w: f64 = line.trim().parse().map_err(|_| {
            GraphError::MalformedWeights(format!("line {line_no}: `{line}` is not a number"))
        })?;
        if !w.is_finite() {
            return Err(GraphError::MalformedWeights(format!(
                "line {line_no}: weight must be finite, got `{line}`"
            )));
        }
        weights.push(w);
    }
    if weights.len() != n {
        return Err(GraphError::MalformedWeights(format!(
            "expected {n} weights, found {}",
            weights.len()
        )));
    }
    Ok(weights)
}

pub fn format_weights(weights: &[f64]) -> String {
    let mut out = String::with_capacity(weights.len() * 12);
    for w in weights {
        out.push_str(&format!("{w}\n"));
    }
    out
}

pub fn load_weights(path: &Path, n: usize) -> Result<Vec<f64>, GraphError> {
    parse_weights(&fs::read_to_string(path)?, n)
}

pub fn save_weights(path: &Path, weights: &[f64]) -> Result<(), GraphError> {
    fs::write(path, format_weights(weights))?;
    Ok(())
}

/// Yields `(1-based line number, trimmed line)` for non-blank, non-comment
/// lines.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_field(field: Option<&str>, line_no: usize, line: &str) -> Result<usize, GraphError> {
    field
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| GraphError::MalformedHeader(format!("line {line_no}: `{line}`")))
}

fn parse_edge_field(field: Option<&str>, line_no: usize, line: &str) -> Result<usize, GraphError> {
    field
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| GraphError::MalformedLine {
            line: line_no,
            reason: format!("`{line}` is not a pair of vertex ids"),
        })
}
