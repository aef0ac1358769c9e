//! Multiplicative attribute graph model (MAGM) and the quilting sampler.
//!
//! Each node carries `d` Bernoulli attributes packed into an integer
//! configuration `λ_i` (attribute 1 is the most significant bit), and the edge
//! probability between `i` and `j` is the KPGM cell probability at
//! `(λ_i, λ_j)`. Quilting splits the nodes into sets with pairwise distinct
//! configurations, samples one KPGM graph per ordered pair of sets, and keeps
//! the edges whose endpoints map back to nodes of that pair.

use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::edgelist::{EdgeList, NodeId};
use crate::error::{Error, Result};
use crate::kronecker::{rejection_cells, ExactPlan, InitiatorChain, DEFAULT_RETRY_FACTOR};
use crate::rng::{block_rng, draw_root};

/// Default node limit for [`naive_magm_sample`].
pub const NAIVE_MAX_NODES: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct MagmModel {
    chain: InitiatorChain,
    mus: Vec<f64>,
    n: u64,
}

impl MagmModel {
    pub fn new(chain: InitiatorChain, mus: Vec<f64>, n: u64) -> Result<Self> {
        if mus.len() != chain.depth() {
            return Err(Error::invalid(format!(
                "expected {} attribute probabilities, got {}",
                chain.depth(),
                mus.len()
            )));
        }
        if let Some(mu) = mus.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::invalid(format!("attribute probability {mu} outside [0, 1]")));
        }
        if n == 0 {
            return Err(Error::invalid("node count must be positive"));
        }
        Ok(MagmModel { chain, mus, n })
    }

    /// Same `μ` for every attribute.
    pub fn with_shared_mu(chain: InitiatorChain, mu: f64, n: u64) -> Result<Self> {
        let d = chain.depth();
        MagmModel::new(chain, vec![mu; d], n)
    }

    pub fn chain(&self) -> &InitiatorChain {
        &self.chain
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn depth(&self) -> usize {
        self.chain.depth()
    }

    pub fn node_count(&self) -> u64 {
        self.n
    }

    /// `E|E| = n² ∏_k Σ_ab μ_a μ_b θ_ab` with `μ_1 = μ^(k)`, `μ_0 = 1 - μ^(k)`.
    pub fn expected_edges(&self) -> f64 {
        let per_pair: f64 = self
            .chain
            .levels()
            .iter()
            .zip(&self.mus)
            .map(|(theta, &mu)| {
                let w = [1.0 - mu, mu];
                (0..2)
                    .flat_map(|a| (0..2).map(move |b| (a, b)))
                    .map(|(a, b)| w[a] * w[b] * theta.get(a, b))
                    .sum::<f64>()
            })
            .product();
        (self.n as f64).powi(2) * per_pair
    }
}

/// Per-node attribute configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeAssignment {
    d: usize,
    lambdas: Vec<u64>,
}

impl AttributeAssignment {
    pub fn new(d: usize, lambdas: Vec<u64>) -> Result<Self> {
        if d == 0 || d > crate::kronecker::MAX_DEPTH {
            return Err(Error::invalid(format!("attribute count {d} out of range")));
        }
        if lambdas.is_empty() {
            return Err(Error::invalid("assignment needs at least one node"));
        }
        let limit = 1u64 << d;
        if let Some(bad) = lambdas.iter().find(|&&l| l >= limit) {
            return Err(Error::invalid(format!(
                "configuration {bad} does not fit in {d} bits"
            )));
        }
        Ok(AttributeAssignment { d, lambdas })
    }

    /// `λ_i = i - 1`, the assignment that turns a MAGM into the KPGM.
    pub fn identity(d: usize) -> Result<Self> {
        AttributeAssignment::new(d, (0..1u64 << d).collect())
    }

    pub fn depth(&self) -> usize {
        self.d
    }

    pub fn node_count(&self) -> u64 {
        self.lambdas.len() as u64
    }

    pub fn lambdas(&self) -> &[u64] {
        &self.lambdas
    }

    /// Configuration of 1-based node `i`.
    pub fn lambda(&self, i: NodeId) -> u64 {
        self.lambdas[(i - 1) as usize]
    }

    /// Attribute `k` (1-based, most significant first) of node `i`.
    pub fn attribute(&self, i: NodeId, k: usize) -> bool {
        (self.lambda(i) >> (self.d - k)) & 1 == 1
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# n={} d={}", self.lambdas.len(), self.d)?;
        for l in &self.lambdas {
            writeln!(out, "{l}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line?,
            None => return Err(Error::parse(1, "missing header")),
        };
        let (n, d) = parse_attr_header(&header)?;
        let mut lambdas = Vec::with_capacity(n.min(1 << 24) as usize);
        for (idx, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let l = line
                .parse()
                .map_err(|e| Error::parse(idx + 1, format!("bad configuration: {e}")))?;
            lambdas.push(l);
        }
        if lambdas.len() as u64 != n {
            return Err(Error::parse(
                1,
                format!("header declares {n} nodes, found {}", lambdas.len()),
            ));
        }
        AttributeAssignment::new(d, lambdas)
    }
}

fn parse_attr_header(line: &str) -> Result<(u64, usize)> {
    let rest = line
        .strip_prefix("# ")
        .ok_or_else(|| Error::parse(1, "header must start with '# '"))?;
    let (mut n, mut d) = (None, None);
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("n", v)) => n = v.parse().ok(),
            Some(("d", v)) => d = v.parse().ok(),
            _ => return Err(Error::parse(1, format!("unexpected header field {field:?}"))),
        }
    }
    n.zip(d)
        .ok_or_else(|| Error::parse(1, "header needs n=<n> d=<d>"))
}

/// Draws `n · d` independent attribute bits, node by node.
pub fn sample_attributes<R: Rng + ?Sized>(model: &MagmModel, rng: &mut R) -> AttributeAssignment {
    let lambdas = (0..model.n)
        .map(|_| {
            model
                .mus
                .iter()
                .fold(0u64, |acc, &mu| (acc << 1) | u64::from(rng.random::<f64>() < mu))
        })
        .collect();
    AttributeAssignment {
        d: model.depth(),
        lambdas,
    }
}

fn check_compatible(model: &MagmModel, attrs: &AttributeAssignment) -> Result<()> {
    if attrs.d != model.depth() {
        return Err(Error::invalid(format!(
            "assignment has {} attributes, model has {}",
            attrs.d,
            model.depth()
        )));
    }
    if attrs.node_count() != model.n {
        return Err(Error::invalid(format!(
            "assignment covers {} nodes, model has {}",
            attrs.node_count(),
            model.n
        )));
    }
    Ok(())
}

/// `Q_ij` for 1-based node ids.
pub fn magm_edge_probability(
    model: &MagmModel,
    attrs: &AttributeAssignment,
    i: NodeId,
    j: NodeId,
) -> Result<f64> {
    check_compatible(model, attrs)?;
    let n = attrs.node_count();
    if i == 0 || j == 0 || i > n || j > n {
        return Err(Error::IndexOutOfRange { i, j, n });
    }
    Ok(model.chain.cell_probability(attrs.lambda(i), attrs.lambda(j)))
}

/// Nodes split into `B` sets with pairwise distinct configurations inside each set.
///
/// Node `i` lands in set `|Z_i|`, where `|Z_i|` counts the nodes `j ≤ i` sharing
/// its configuration. `B` is the largest multiplicity of any configuration,
/// which is the smallest possible number of such sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePartition {
    sets: Vec<Vec<NodeId>>,
    multiplicity: Vec<u32>,
}

impl NodePartition {
    /// `B`.
    pub fn size(&self) -> usize {
        self.sets.len()
    }

    /// Set `c` for 1-based `c`, in increasing node order.
    pub fn set(&self, c: usize) -> &[NodeId] {
        &self.sets[c - 1]
    }

    pub fn sets(&self) -> &[Vec<NodeId>] {
        &self.sets
    }

    /// `|Z_i|` for 1-based node `i`.
    pub fn multiplicity(&self, i: NodeId) -> u32 {
        self.multiplicity[(i - 1) as usize]
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.multiplicity
    }
}

pub fn build_partition(attrs: &AttributeAssignment) -> NodePartition {
    partition_configs(&attrs.lambdas)
}

pub(crate) fn partition_configs(lambdas: &[u64]) -> NodePartition {
    let mut seen: FxHashMap<u64, u32> = FxHashMap::default();
    let mut sets: Vec<Vec<NodeId>> = Vec::new();
    let multiplicity = lambdas
        .iter()
        .enumerate()
        .map(|(idx, &l)| {
            let count = seen.entry(l).or_insert(0);
            *count += 1;
            let c = *count as usize;
            if sets.len() < c {
                sets.push(Vec::new());
            }
            sets[c - 1].push(idx as NodeId + 1);
            *count
        })
        .collect();
    NodePartition { sets, multiplicity }
}

/// How each quilting block draws its KPGM graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KpgmMethod {
    /// Thinned Poisson ball-dropping; cells are independent with exact marginals.
    #[default]
    Exact,
    /// Normal edge count with duplicate rejection, as in [`crate::kronecker::kpgm_sample`].
    NormalRejection,
}

#[derive(Debug, Clone, Copy)]
pub struct QuiltOptions {
    pub method: KpgmMethod,
    /// Retry budget factor for [`KpgmMethod::NormalRejection`].
    pub retry_factor: u64,
    /// Sample blocks on the rayon pool. Output is identical either way.
    pub parallel: bool,
    /// With [`KpgmMethod::Exact`], abandon a block's descent as soon as its
    /// cell prefix matches no node pair of the block. The law of the output
    /// is unchanged, but the per-block cost no longer follows the full KPGM
    /// draw, and the output for a given seed differs from the unpruned run.
    pub prune: bool,
}

impl Default for QuiltOptions {
    fn default() -> Self {
        QuiltOptions {
            method: KpgmMethod::Exact,
            retry_factor: DEFAULT_RETRY_FACTOR,
            parallel: false,
            prune: false,
        }
    }
}

pub fn quilt_sample<R: Rng + ?Sized>(
    model: &MagmModel,
    attrs: &AttributeAssignment,
    rng: &mut R,
) -> Result<EdgeList> {
    quilt_sample_with(model, attrs, &QuiltOptions::default(), rng)
}

/// Quilting sampler.
///
/// For every ordered pair `(k, l)` of partition sets (k outer, l inner), a KPGM
/// graph is drawn on `2^d` nodes from its own rng stream, and each sampled
/// cell `(x, y)` becomes the edge `(i, j)` when set `k` holds a node `i` with
/// `λ_i = x` and set `l` a node `j` with `λ_j = y`. Other cells are dropped.
pub fn quilt_sample_with<R: Rng + ?Sized>(
    model: &MagmModel,
    attrs: &AttributeAssignment,
    options: &QuiltOptions,
    rng: &mut R,
) -> Result<EdgeList> {
    check_compatible(model, attrs)?;
    let root = draw_root(rng);
    let edges = quilt_edges(&model.chain, &attrs.lambdas, options, root)?;
    Ok(EdgeList::from_unique(model.n, edges))
}

/// Which configuration prefixes occur in a set, as one dense bitmap per level.
///
/// Only the top `levels` levels are indexed (about `log₂ |set| + 3`), which
/// keeps memory linear in the set size; deeper prefixes always pass.
struct PrefixIndex {
    levels: Vec<Vec<u64>>,
}

impl PrefixIndex {
    const MAX_LEVELS: usize = 28;

    fn new(configs: impl Iterator<Item = u64> + Clone, len: usize, d: usize) -> Self {
        let depth = d.min(Self::MAX_LEVELS).min(usize::BITS as usize - len.leading_zeros() as usize + 3);
        let levels = (1..=depth)
            .map(|t| {
                let mut bits = vec![0u64; (1usize << t).div_ceil(64)];
                for c in configs.clone() {
                    let prefix = (c >> (d - t)) as usize;
                    bits[prefix / 64] |= 1 << (prefix % 64);
                }
                bits
            })
            .collect();
        PrefixIndex { levels }
    }

    #[inline]
    fn contains(&self, t: usize, prefix: u64) -> bool {
        match self.levels.get(t.wrapping_sub(1)) {
            Some(bits) => bits[(prefix / 64) as usize] >> (prefix % 64) & 1 == 1,
            None => true,
        }
    }
}

/// Quilts the subgraph on `lambdas.len()` nodes; edges use 1-based local ids.
pub(crate) fn quilt_edges(
    chain: &InitiatorChain,
    lambdas: &[u64],
    options: &QuiltOptions,
    root: u64,
) -> Result<Vec<(NodeId, NodeId)>> {
    if lambdas.is_empty() {
        return Ok(Vec::new());
    }
    let partition = partition_configs(lambdas);
    let b = partition.size();
    let inverse: Vec<FxHashMap<u64, NodeId>> = partition
        .sets
        .iter()
        .map(|set| set.iter().map(|&i| (lambdas[(i - 1) as usize], i)).collect())
        .collect();
    let exact = match options.method {
        KpgmMethod::Exact => Some(ExactPlan::new(chain)),
        KpgmMethod::NormalRejection => None,
    };
    let prefixes: Vec<PrefixIndex> = match exact {
        Some(Some(_)) if options.prune => partition
            .sets
            .iter()
            .map(|set| {
                let configs = set.iter().map(|&i| lambdas[(i - 1) as usize]);
                PrefixIndex::new(configs, set.len(), chain.depth())
            })
            .collect(),
        _ => Vec::new(),
    };

    let block = |index: usize| -> Result<Vec<(NodeId, NodeId)>> {
        let (k, l) = (index / b, index % b);
        let mut rng = block_rng(root, index as u64);
        let (rows, cols) = (&inverse[k], &inverse[l]);
        let mut out = Vec::new();
        match &exact {
            Some(Some(plan)) => {
                let mut seen = FxHashSet::default();
                let mut keep = |x, y| {
                    if let (Some(&i), Some(&j)) = (rows.get(&x), cols.get(&y)) {
                        if seen.insert((i, j)) {
                            out.push((i, j));
                        }
                    }
                };
                match (prefixes.get(k), prefixes.get(l)) {
                    (Some(row_prefixes), Some(col_prefixes)) => plan.run_pruned(
                        &mut rng,
                        |t, x, y| row_prefixes.contains(t, x) && col_prefixes.contains(t, y),
                        keep,
                    ),
                    _ => plan.run(&mut rng, &mut keep),
                }
            }
            Some(None) => {
                // Some cell is certain; enumerate the block directly.
                for &i in &partition.sets[k] {
                    let x = lambdas[(i - 1) as usize];
                    for &j in &partition.sets[l] {
                        let p = chain.cell_probability(x, lambdas[(j - 1) as usize]);
                        if rng.random::<f64>() < p {
                            out.push((i, j));
                        }
                    }
                }
            }
            None => {
                let cells = rejection_cells(chain, options.retry_factor, Some(index), &mut rng)?;
                out.extend(cells.into_iter().filter_map(|(x, y)| {
                    Some((*rows.get(&x)?, *cols.get(&y)?))
                }));
            }
        }
        Ok(out)
    };

    let blocks: Vec<Vec<(NodeId, NodeId)>> = if options.parallel {
        (0..b * b).into_par_iter().map(block).collect::<Result<_>>()?
    } else {
        (0..b * b).map(block).collect::<Result<_>>()?
    };
    Ok(blocks.into_iter().flatten().collect())
}

/// One Bernoulli trial per ordered node pair. Refuses `n > NAIVE_MAX_NODES`.
pub fn naive_magm_sample<R: Rng + ?Sized>(
    model: &MagmModel,
    attrs: &AttributeAssignment,
    rng: &mut R,
) -> Result<EdgeList> {
    naive_magm_sample_with_limit(model, attrs, NAIVE_MAX_NODES, rng)
}

pub fn naive_magm_sample_with_limit<R: Rng + ?Sized>(
    model: &MagmModel,
    attrs: &AttributeAssignment,
    max_nodes: u64,
    rng: &mut R,
) -> Result<EdgeList> {
    check_compatible(model, attrs)?;
    if model.n > max_nodes {
        return Err(Error::SizeGuard {
            what: "naive MAGM node count",
            actual: model.n,
            limit: max_nodes,
        });
    }
    let mut edges = Vec::new();
    for (i, &x) in attrs.lambdas.iter().enumerate() {
        for (j, &y) in attrs.lambdas.iter().enumerate() {
            if rng.random::<f64>() < model.chain.cell_probability(x, y) {
                edges.push((i as NodeId + 1, j as NodeId + 1));
            }
        }
    }
    Ok(EdgeList::from_unique(model.n, edges))
}
