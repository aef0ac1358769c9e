//! Graph statistics and partition-size bounds.

use std::collections::BTreeMap;

use rand::Rng;

use crate::edgelist::EdgeList;
use crate::error::{Error, Result};
use crate::magm::{build_partition, sample_attributes, MagmModel};

/// Compressed out-adjacency over 0-based node indices.
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    fn from_edges(graph: &EdgeList) -> Self {
        let n = graph.node_count() as usize;
        let mut offsets = vec![0usize; n + 1];
        for &(s, _) in graph.edges() {
            offsets[s as usize] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; graph.edge_count()];
        for &(s, t) in graph.edges() {
            let slot = &mut fill[(s - 1) as usize];
            targets[*slot] = (t - 1) as u32;
            *slot += 1;
        }
        Csr { offsets, targets }
    }

    fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

const UNVISITED: u32 = u32::MAX;

/// Sizes of all strongly connected components (iterative Tarjan).
pub fn scc_sizes(graph: &EdgeList) -> Vec<usize> {
    let n = graph.node_count() as usize;
    assert!(n < UNVISITED as usize, "graph too large for 32-bit indices");
    let adj = Csr::from_edges(graph);
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    // (node, position in its neighbor list)
    let mut call: Vec<(u32, usize)> = Vec::new();
    let mut next = 0u32;
    let mut sizes = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root as u32, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root as u32);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let v = v as usize;
            let neigh = adj.neighbors(v);
            if let Some(&w) = neigh.get(*pos) {
                *pos += 1;
                let w = w as usize;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w as u32);
                    on_stack[w] = true;
                    call.push((w as u32, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                let p = parent as usize;
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                let mut size = 0;
                loop {
                    let w = stack.pop().expect("component root is on the stack") as usize;
                    on_stack[w] = false;
                    size += 1;
                    if w == v {
                        break;
                    }
                }
                sizes.push(size);
            }
        }
    }
    sizes
}

/// Share of nodes in the largest strongly connected component.
pub fn largest_scc_fraction(graph: &EdgeList) -> f64 {
    let n = graph.node_count();
    if n == 0 {
        return 0.0;
    }
    let largest = scc_sizes(graph).into_iter().max().unwrap_or(0);
    largest as f64 / n as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeDistribution {
    /// Out-degree of node `i` at index `i - 1`.
    pub out_degree: Vec<u64>,
    pub in_degree: Vec<u64>,
    /// degree → number of nodes
    pub out_histogram: BTreeMap<u64, u64>,
    pub in_histogram: BTreeMap<u64, u64>,
}

pub fn degree_distribution(graph: &EdgeList) -> DegreeDistribution {
    let n = graph.node_count() as usize;
    let mut out_degree = vec![0u64; n];
    let mut in_degree = vec![0u64; n];
    for &(s, t) in graph.edges() {
        out_degree[(s - 1) as usize] += 1;
        in_degree[(t - 1) as usize] += 1;
    }
    let histogram = |degrees: &[u64]| {
        let mut h = BTreeMap::new();
        for &k in degrees {
            *h.entry(k).or_insert(0) += 1;
        }
        h
    };
    DegreeDistribution {
        out_histogram: histogram(&out_degree),
        in_histogram: histogram(&in_degree),
        out_degree,
        in_degree,
    }
}

/// Partition size `B` for `trials` independent attribute draws.
pub fn measure_partition_size<R: Rng + ?Sized>(
    model: &MagmModel,
    rng: &mut R,
    trials: usize,
) -> Result<Vec<usize>> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    Ok((0..trials)
        .map(|_| build_partition(&sample_attributes(model, rng)).size())
        .collect())
}

/// Natural log of `n² / (e · (log₂ n)^{log₂ n})`, the bound on `P(B > log₂ n)`
/// for balanced attributes with `n = 2^d`.
pub fn ln_partition_bound(n: f64) -> Result<f64> {
    if !(n.is_finite() && n >= 4.0) {
        return Err(Error::invalid(format!("partition bound needs n >= 4, got {n}")));
    }
    let l = n.log2();
    Ok(2.0 * n.ln() - 1.0 - l * l.ln())
}

pub fn partition_bound(n: f64) -> Result<f64> {
    ln_partition_bound(n).map(f64::exp)
}

/// Natural log of the Poisson tail bound `P(X ≥ x) ≤ e^{-λ} (eλ)^x / x^x`.
pub fn ln_poisson_chernoff(lambda: f64, x: f64) -> Result<f64> {
    if !(lambda.is_finite() && x.is_finite() && lambda > 0.0 && x > 0.0) {
        return Err(Error::invalid(format!(
            "Poisson Chernoff bound needs lambda > 0 and x > 0, got lambda={lambda}, x={x}"
        )));
    }
    Ok(-lambda + x * (1.0 + lambda.ln()) - x * x.ln())
}

pub fn poisson_chernoff(lambda: f64, x: f64) -> Result<f64> {
    ln_poisson_chernoff(lambda, x).map(f64::exp)
}

/// Union bound on `P(B > 2^{t+1} log₂ n)` when `n > 2^d`: `n` times the
/// Poisson tail with `λ = n / 2^d` at `x = 2^{t+1} log₂ n`. Returned as a
/// natural log. `t` is passed explicitly rather than derived from `n` and `d`.
pub fn ln_oversubscribed_partition_bound(n: f64, d: u32, t: i32) -> Result<f64> {
    if !(n.is_finite() && n >= 2.0) {
        return Err(Error::invalid(format!("bound needs n >= 2, got {n}")));
    }
    let lambda = n / 2f64.powi(d as i32);
    let x = 2f64.powi(t + 1) * n.log2();
    Ok(n.ln() + ln_poisson_chernoff(lambda, x)?)
}
