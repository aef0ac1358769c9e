//! Fast path for skewed attribute distributions.
//!
//! When `μ` is far from 0.5 a few configurations are shared by many nodes and
//! the quilting partition becomes large. Nodes whose configuration occurs more
//! than `B'` times are pulled out into homogeneous groups: every block between
//! two groups, or between a group and a single remaining node, has one common
//! edge probability and is sampled with geometric skipping. The remaining
//! nodes `W` are quilted as usual with a partition of size at most `B'`.

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::edgelist::{EdgeList, NodeId};
use crate::error::{Error, Result};
use crate::kronecker::{expected_edge_sum, InitiatorChain};
use crate::magm::{quilt_edges, AttributeAssignment, MagmModel, QuiltOptions};
use crate::rng::{block_rng, draw_root};

/// Nodes sharing one heavy configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeavyGroup {
    pub config: u64,
    pub members: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupPlan {
    bprime: u64,
    w_nodes: Vec<NodeId>,
    heavy_groups: Vec<HeavyGroup>,
    predicted_cost: f64,
}

impl SpeedupPlan {
    pub fn bprime(&self) -> u64 {
        self.bprime
    }

    /// Nodes handled by quilting, in increasing order.
    pub fn w_nodes(&self) -> &[NodeId] {
        &self.w_nodes
    }

    /// Groups in order of first appearance of their configuration.
    pub fn heavy_groups(&self) -> &[HeavyGroup] {
        &self.heavy_groups
    }

    /// `R`.
    pub fn heavy_count(&self) -> usize {
        self.heavy_groups.len()
    }

    pub fn predicted_cost(&self) -> f64 {
        self.predicted_cost
    }

    /// One-line `key=value` summary.
    pub fn summary(&self) -> String {
        format!(
            "bprime={} w={} r={} predicted_cost={}",
            self.bprime,
            self.w_nodes.len(),
            self.heavy_groups.len(),
            self.predicted_cost
        )
    }
}

/// `T(B') = B'² log₂(n) |E| + (|W| + d) R + d R²`, all constants taken as 1.
pub fn threshold_cost(bprime: u64, w_size: u64, heavy: u64, n: u64, d: usize, edges: f64) -> f64 {
    let b = bprime as f64;
    let r = heavy as f64;
    let d = d as f64;
    b * b * (n as f64).log2() * edges + (w_size as f64 + d) * r + d * r * r
}

/// Occurrence count of every configuration, in order of first appearance.
fn config_counts(lambdas: &[u64]) -> Vec<(u64, u64)> {
    let mut index: FxHashMap<u64, usize> = FxHashMap::default();
    let mut counts: Vec<(u64, u64)> = Vec::new();
    for &l in lambdas {
        let slot = *index.entry(l).or_insert_with(|| {
            counts.push((l, 0));
            counts.len() - 1
        });
        counts[slot].1 += 1;
    }
    counts
}

/// Picks `B'` minimizing [`threshold_cost`], using the KPGM expected edge
/// count `m` as the stand-in for `|E|`.
pub fn select_threshold(attrs: &AttributeAssignment, chain: &InitiatorChain) -> SpeedupPlan {
    select_threshold_with(attrs, chain, expected_edge_sum(chain).m)
}

/// Like [`select_threshold`] with an explicit `|E|` estimate.
///
/// Only `B' = 1` and the distinct occurrence counts need evaluating: between
/// two consecutive counts the split is unchanged and the cost grows with `B'`.
/// Ties go to the smaller threshold.
pub fn select_threshold_with(
    attrs: &AttributeAssignment,
    chain: &InitiatorChain,
    edges: f64,
) -> SpeedupPlan {
    let n = attrs.node_count();
    let d = chain.depth();
    let mut counts: Vec<u64> = config_counts(attrs.lambdas()).iter().map(|c| c.1).collect();
    counts.sort_unstable();

    let mut best: Option<(u64, f64)> = None;
    let mut consider = |bprime: u64, w: u64, r: u64| {
        let cost = threshold_cost(bprime, w, r, n, d, edges);
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((bprime, cost));
        }
    };

    // Sweep thresholds upward; `taken` configurations (the smallest counts) sit in W.
    let mut taken = 0usize;
    let mut w = 0u64;
    let mut candidates: Vec<u64> = counts.clone();
    candidates.push(1);
    candidates.sort_unstable();
    candidates.dedup();
    for bprime in candidates {
        while taken < counts.len() && counts[taken] <= bprime {
            w += counts[taken];
            taken += 1;
        }
        consider(bprime, w, (counts.len() - taken) as u64);
    }
    let (bprime, _) = best.expect("at least one candidate");
    plan_for_threshold(attrs, chain, bprime, edges)
}

/// Builds the plan for a fixed `B'`.
pub fn plan_for_threshold(
    attrs: &AttributeAssignment,
    chain: &InitiatorChain,
    bprime: u64,
    edges: f64,
) -> SpeedupPlan {
    let lambdas = attrs.lambdas();
    let counts = config_counts(lambdas);
    let mut group_of: FxHashMap<u64, usize> = FxHashMap::default();
    let mut heavy_groups = Vec::new();
    for &(config, count) in &counts {
        if count > bprime {
            group_of.insert(config, heavy_groups.len());
            heavy_groups.push(HeavyGroup {
                config,
                members: Vec::with_capacity(count as usize),
            });
        }
    }
    let mut w_nodes = Vec::new();
    for (idx, l) in lambdas.iter().enumerate() {
        let node = idx as NodeId + 1;
        match group_of.get(l) {
            Some(&g) => heavy_groups[g].members.push(node),
            None => w_nodes.push(node),
        }
    }
    let predicted_cost = threshold_cost(
        bprime,
        w_nodes.len() as u64,
        heavy_groups.len() as u64,
        attrs.node_count(),
        chain.depth(),
        edges,
    );
    SpeedupPlan {
        bprime,
        w_nodes,
        heavy_groups,
        predicted_cost,
    }
}

/// Visits each index in `0..len` independently with probability `p`, jumping
/// between successes with geometric gaps `⌊ln U / ln(1 - p)⌋`.
fn for_each_success<R: Rng + ?Sized>(len: u64, p: f64, rng: &mut R, mut visit: impl FnMut(u64)) {
    if len == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (0..len).for_each(visit);
        return;
    }
    let ln_q = (-p).ln_1p();
    let mut cursor = 0u64;
    while cursor < len {
        // U in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / ln_q).floor();
        if skip >= (len - cursor) as f64 {
            break;
        }
        cursor += skip as u64;
        visit(cursor);
        cursor += 1;
    }
}

/// Every cell of `rows × cols` independently with probability `p`, row-major.
pub fn uniform_block_sample<R: Rng + ?Sized>(
    rows: &[NodeId],
    cols: &[NodeId],
    p: f64,
    rng: &mut R,
) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    append_uniform_block(rows, cols, p, rng, &mut out);
    out
}

fn append_uniform_block<R: Rng + ?Sized>(
    rows: &[NodeId],
    cols: &[NodeId],
    p: f64,
    rng: &mut R,
    out: &mut Vec<(NodeId, NodeId)>,
) {
    let width = cols.len() as u64;
    let len = rows.len() as u64 * width;
    for_each_success(len, p, rng, |idx| {
        out.push((rows[(idx / width) as usize], cols[(idx % width) as usize]));
    });
}

pub fn fast_magm_sample<R: Rng + ?Sized>(
    model: &MagmModel,
    attrs: &AttributeAssignment,
    rng: &mut R,
) -> Result<EdgeList> {
    let plan = select_threshold(attrs, model.chain());
    fast_magm_sample_with_plan(model, attrs, &plan, &QuiltOptions::default(), rng)
}

/// Samples with a given plan: quilting on `W`, geometric skipping elsewhere.
///
/// The `W` subgraph uses stream 0 under a root drawn from `rng`; all uniform
/// blocks use stream 1, in the order heavy × heavy, W rows × heavy, heavy × W
/// columns.
pub fn fast_magm_sample_with_plan<R: Rng + ?Sized>(
    model: &MagmModel,
    attrs: &AttributeAssignment,
    plan: &SpeedupPlan,
    options: &QuiltOptions,
    rng: &mut R,
) -> Result<EdgeList> {
    if attrs.node_count() != model.node_count() || attrs.depth() != model.depth() {
        return Err(Error::invalid("assignment does not match the model"));
    }
    let covered = plan.w_nodes.len() + plan.heavy_groups.iter().map(|g| g.members.len()).sum::<usize>();
    if covered as u64 != model.node_count() {
        return Err(Error::invalid("plan does not cover the model's nodes"));
    }
    let chain = model.chain();
    let root = draw_root(rng);

    let w_lambdas: Vec<u64> = plan.w_nodes.iter().map(|&i| attrs.lambda(i)).collect();
    let quilt_root = block_rng(root, 0).random();
    let mut edges: Vec<(NodeId, NodeId)> = quilt_edges(chain, &w_lambdas, options, quilt_root)?
        .into_iter()
        .map(|(i, j)| (plan.w_nodes[(i - 1) as usize], plan.w_nodes[(j - 1) as usize]))
        .collect();

    let mut rng = block_rng(root, 1);
    for r in &plan.heavy_groups {
        for s in &plan.heavy_groups {
            let p = chain.cell_probability(r.config, s.config);
            append_uniform_block(&r.members, &s.members, p, &mut rng, &mut edges);
        }
    }
    for &i in &plan.w_nodes {
        let x = attrs.lambda(i);
        for s in &plan.heavy_groups {
            let p = chain.cell_probability(x, s.config);
            append_uniform_block(&[i], &s.members, p, &mut rng, &mut edges);
        }
    }
    for r in &plan.heavy_groups {
        for &j in &plan.w_nodes {
            let p = chain.cell_probability(r.config, attrs.lambda(j));
            append_uniform_block(&r.members, &[j], p, &mut rng, &mut edges);
        }
    }
    Ok(EdgeList::from_unique(model.node_count(), edges))
}
