//! Plain-text graph format:
//!
//! ```text
//! n m
//! u v        (m lines)
//! B: b1 b2   (optional)
//! ```

use std::fmt;

use super::{Graph, GraphError, NodeId};

fn parse_err(line: usize, reason: impl Into<String>) -> GraphError {
    GraphError::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_id(tok: &str, line: usize) -> Result<usize, GraphError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("expected a decimal id, got `{tok}`")))
}

pub fn parse_graph(text: &str) -> Result<Graph, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(parse_err(hl, "header must be `n m`"));
    }
    let n = parse_id(head[0], hl)?;
    let m = parse_id(head[1], hl)?;

    let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(hl, format!("expected {m} edge lines")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(ln, "edge line must be `u v`"));
        }
        edges.push((parse_id(toks[0], ln)?, parse_id(toks[1], ln)?));
    }

    let mut byzantine = Vec::new();
    if let Some((ln, l)) = lines.next() {
        let rest = l
            .strip_prefix("B:")
            .ok_or_else(|| parse_err(ln, "expected `B:` line or end of input"))?;
        for tok in rest.split_whitespace() {
            byzantine.push(parse_id(tok, ln)?);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(parse_err(ln, "trailing content"));
        }
    }
    Graph::new(n, &edges, &byzantine)
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.node_count(), self.edge_count())?;
        for (u, v) in self.edges() {
            writeln!(f, "{u} {v}")?;
        }
        let byz = self.byzantine_nodes();
        if !byz.is_empty() {
            let ids: Vec<String> = byz.iter().map(ToString::to_string).collect();
            writeln!(f, "B: {}", ids.join(" "))?;
        }
        Ok(())
    }
}
