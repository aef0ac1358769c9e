//! Directed edge lists and their plain-text serialization.
//!
//! The text format is shared by every sampler and tool in the crate:
//!
//! ```text
//! # nodes=<n> edges=<k>
//! <source>\t<target>
//! ...
//! ```
//!
//! Node ids are 1-based and every line is LF-terminated.

use std::io::{BufRead, Write};

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};

/// 1-based node identifier.
pub type NodeId = u64;

/// A directed graph on nodes `1..=n` without duplicate edges. Self-loops are allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    n: u64,
    edges: Vec<(NodeId, NodeId)>,
}

impl EdgeList {
    /// Builds an edge list, checking ranges and rejecting duplicate pairs.
    pub fn new(n: u64, edges: Vec<(NodeId, NodeId)>) -> Result<Self> {
        let mut seen = FxHashSet::default();
        seen.reserve(edges.len());
        for &(s, t) in &edges {
            if s == 0 || t == 0 || s > n || t > n {
                return Err(Error::IndexOutOfRange { i: s, j: t, n });
            }
            if !seen.insert((s, t)) {
                return Err(Error::invalid(format!("duplicate edge ({s}, {t})")));
            }
        }
        Ok(EdgeList { n, edges })
    }

    /// Samplers guarantee the invariants themselves.
    pub(crate) fn from_unique(n: u64, edges: Vec<(NodeId, NodeId)>) -> Self {
        debug_assert!(edges
            .iter()
            .all(|&(s, t)| s >= 1 && t >= 1 && s <= n && t <= n));
        EdgeList { n, edges }
    }

    pub fn empty(n: u64) -> Self {
        EdgeList { n, edges: Vec::new() }
    }

    pub fn node_count(&self) -> u64 {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn into_edges(self) -> Vec<(NodeId, NodeId)> {
        self.edges
    }

    pub fn contains(&self, source: NodeId, target: NodeId) -> bool {
        self.edges.contains(&(source, target))
    }

    /// Sorts edges lexicographically by (source, target).
    pub fn sort(&mut self) {
        self.edges.sort_unstable();
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# nodes={} edges={}", self.n, self.edges.len())?;
        for &(s, t) in &self.edges {
            writeln!(out, "{s}\t{t}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::with_capacity(24 + self.edges.len() * 12);
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("edge list text is ASCII")
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (n, declared) = match lines.next() {
            Some((_, line)) => parse_header(&line?)?,
            None => return Err(Error::parse(1, "missing header")),
        };
        let mut edges = Vec::with_capacity(declared.min(1 << 24) as usize);
        for (idx, line) in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (s, t) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno, "expected <source>\\t<target>"))?;
            let s = s
                .parse()
                .map_err(|e| Error::parse(lineno, format!("bad source: {e}")))?;
            let t = t
                .parse()
                .map_err(|e| Error::parse(lineno, format!("bad target: {e}")))?;
            edges.push((s, t));
        }
        if edges.len() as u64 != declared {
            return Err(Error::parse(
                1,
                format!("header declares {declared} edges, found {}", edges.len()),
            ));
        }
        EdgeList::new(n, edges)
    }
}

fn parse_header(line: &str) -> Result<(u64, u64)> {
    let rest = line
        .strip_prefix("# ")
        .ok_or_else(|| Error::parse(1, "header must start with '# '"))?;
    let mut n = None;
    let mut k = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("nodes", v)) => n = v.parse().ok(),
            Some(("edges", v)) => k = v.parse().ok(),
            _ => return Err(Error::parse(1, format!("unexpected header field {field:?}"))),
        }
    }
    match (n, k) {
        (Some(n), Some(k)) => Ok((n, k)),
        _ => Err(Error::parse(1, "header needs nodes=<n> edges=<k>")),
    }
}
