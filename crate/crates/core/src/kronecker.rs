//! Kronecker product graph model (KPGM).
//!
//! A model is a chain of `d` 2×2 initiator matrices. The edge probability
//! matrix is their Kronecker product, a `2^d × 2^d` matrix whose `(i, j)`
//! entry is `∏_k θ^(k)[b_k(i)][b_k(j)]`, where `b_k(i)` is the k-th bit of
//! `i - 1` counting from the most significant of the `d` bits. Level 1
//! therefore picks one of the four contiguous `n/2 × n/2` quadrants.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rustc_hash::FxHashSet;

use crate::edgelist::{EdgeList, NodeId};
use crate::error::{Error, Result};

/// Deepest chain supported; keeps `2^d` representable as a node count.
pub const MAX_DEPTH: usize = 62;

/// Default depth limit for the O(4^d) naive sampler.
pub const NAIVE_MAX_DEPTH: usize = 14;

/// Default number of consecutive duplicate rejections allowed per target edge.
pub const DEFAULT_RETRY_FACTOR: u64 = 1000;

/// A 2×2 matrix of edge probabilities, indexed by `(source bit, target bit)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitiatorMatrix {
    entries: [f64; 4],
}

impl InitiatorMatrix {
    pub fn new(theta00: f64, theta01: f64, theta10: f64, theta11: f64) -> Result<Self> {
        let entries = [theta00, theta01, theta10, theta11];
        if let Some(bad) = entries.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::invalid(format!(
                "initiator entry {bad} is outside [0, 1]"
            )));
        }
        if entries.iter().all(|&t| t == 0.0) {
            return Err(Error::invalid("initiator matrix has no positive entry"));
        }
        Ok(InitiatorMatrix { entries })
    }

    /// `[[0.15, 0.7], [0.7, 0.85]]`
    pub fn theta1() -> Self {
        InitiatorMatrix {
            entries: [0.15, 0.7, 0.7, 0.85],
        }
    }

    /// `[[0.35, 0.52], [0.52, 0.95]]`
    pub fn theta2() -> Self {
        InitiatorMatrix {
            entries: [0.35, 0.52, 0.52, 0.95],
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[2 * a + b]
    }

    /// Entries in row-major order: θ00, θ01, θ10, θ11.
    pub fn entries(&self) -> [f64; 4] {
        self.entries
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.entries.iter().map(|t| t * t).sum()
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    fn positive_entries(&self) -> u32 {
        self.entries.iter().filter(|&&t| t > 0.0).count() as u32
    }
}

/// The per-level initiator matrices `Θ^(1) … Θ^(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitiatorChain {
    levels: Vec<InitiatorMatrix>,
}

impl InitiatorChain {
    pub fn new(levels: Vec<InitiatorMatrix>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("initiator chain needs at least one level"));
        }
        if levels.len() > MAX_DEPTH {
            return Err(Error::invalid(format!(
                "chain depth {} exceeds the supported maximum {MAX_DEPTH}",
                levels.len()
            )));
        }
        Ok(InitiatorChain { levels })
    }

    /// The same matrix at every one of `d` levels.
    pub fn repeated(matrix: InitiatorMatrix, d: usize) -> Result<Self> {
        InitiatorChain::new(vec![matrix; d])
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[InitiatorMatrix] {
        &self.levels
    }

    /// `2^d`.
    pub fn node_count(&self) -> u64 {
        1u64 << self.levels.len()
    }

    /// Probability of the cell at 0-based coordinates `(x, y)`.
    ///
    /// Bits of `x` and `y` above bit `d - 1` are ignored.
    #[inline]
    pub fn cell_probability(&self, x: u64, y: u64) -> f64 {
        let d = self.levels.len();
        let mut p = 1.0;
        for (k, level) in self.levels.iter().enumerate() {
            let shift = d - 1 - k;
            let a = ((x >> shift) & 1) as usize;
            let b = ((y >> shift) & 1) as usize;
            p *= level.get(a, b);
        }
        p
    }

    /// Largest entry of the Kronecker product.
    pub fn max_cell_probability(&self) -> f64 {
        self.levels.iter().map(InitiatorMatrix::max_entry).product()
    }

    /// Number of cells with nonzero probability, saturating at `u64::MAX`.
    pub fn support_size(&self) -> u64 {
        self.levels.iter().fold(1u64, |acc, level| {
            acc.saturating_mul(u64::from(level.positive_entries()))
        })
    }
}

/// `P_ij` for 1-based node ids.
pub fn kpgm_edge_probability(chain: &InitiatorChain, i: NodeId, j: NodeId) -> Result<f64> {
    let n = chain.node_count();
    if i == 0 || j == 0 || i > n || j > n {
        return Err(Error::IndexOutOfRange { i, j, n });
    }
    Ok(chain.cell_probability(i - 1, j - 1))
}

/// First two moments of the edge count: `m = Σ P_ij` and `v = Σ P_ij²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMoments {
    pub m: f64,
    pub v: f64,
}

impl EdgeMoments {
    /// Variance of the number of edges, `m - v`.
    pub fn variance(&self) -> f64 {
        (self.m - self.v).max(0.0)
    }
}

/// Depth above which the products are accumulated as sums of logarithms.
const LOG_DOMAIN_DEPTH: usize = 30;

pub fn expected_edge_sum(chain: &InitiatorChain) -> EdgeMoments {
    let levels = chain.levels();
    if levels.len() > LOG_DOMAIN_DEPTH {
        let ln_m: f64 = levels.iter().map(|t| t.sum().ln()).sum();
        let ln_v: f64 = levels.iter().map(|t| t.sum_of_squares().ln()).sum();
        EdgeMoments {
            m: ln_m.exp(),
            v: ln_v.exp(),
        }
    } else {
        EdgeMoments {
            m: levels.iter().map(InitiatorMatrix::sum).product(),
            v: levels.iter().map(InitiatorMatrix::sum_of_squares).product(),
        }
    }
}

/// Draws the number of edges from `N(m, m - v)`.
///
/// The draw is rounded half-to-even and clamped to `[0, max_edges]`. With zero
/// variance no randomness is consumed and `round(m)` is returned.
pub fn sample_edge_count<R: Rng + ?Sized>(m: f64, v: f64, max_edges: u64, rng: &mut R) -> u64 {
    let variance = (m - v).max(0.0);
    let x = if variance > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        m + variance.sqrt() * z
    } else {
        m
    };
    let x = x.round_ties_even();
    if x.is_nan() || x <= 0.0 {
        0
    } else if x >= max_edges as f64 {
        max_edges
    } else {
        x as u64
    }
}

/// Places a single edge by `d` quadrisection steps: at level `k` the quadrant
/// `(a, b)` is chosen with probability `θ^(k)_ab / Σ θ^(k)`, so cell `(x, y)` is
/// reached with probability `P_xy / m`.
#[derive(Debug, Clone)]
pub struct CellSampler {
    levels: Vec<LevelTable>,
}

#[derive(Debug, Clone, Copy)]
struct LevelTable {
    cumulative: [f64; 3],
    fallback: u8,
    entries: [f64; 4],
}

impl LevelTable {
    fn new(m: &InitiatorMatrix) -> Self {
        let e = m.entries();
        let total = m.sum();
        let mut acc = 0.0;
        let mut cumulative = [0.0; 3];
        for (c, w) in cumulative.iter_mut().zip(e) {
            acc += w / total;
            *c = acc;
        }
        let fallback = e.iter().rposition(|&w| w > 0.0).expect("positive entry") as u8;
        LevelTable {
            cumulative,
            fallback,
            entries: e,
        }
    }

    #[inline]
    fn pick(&self, u: f64) -> u8 {
        for (idx, &c) in self.cumulative.iter().enumerate() {
            if u < c {
                return idx as u8;
            }
        }
        self.fallback
    }
}

impl CellSampler {
    pub fn new(chain: &InitiatorChain) -> Self {
        CellSampler {
            levels: chain.levels().iter().map(LevelTable::new).collect(),
        }
    }

    /// Returns the 0-based cell and its probability `P_xy`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64, f64) {
        let mut x = 0u64;
        let mut y = 0u64;
        let mut p = 1.0;
        for level in &self.levels {
            let q = level.pick(rng.random::<f64>());
            x = (x << 1) | u64::from(q >> 1);
            y = (y << 1) | u64::from(q & 1);
            p *= level.entries[q as usize];
        }
        (x, y, p)
    }

    /// Like [`CellSampler::sample`], but gives up as soon as `alive(t, x, y)`
    /// rejects the cell prefix after `t` levels (`x`, `y` holding `t` bits).
    #[inline]
    pub fn sample_pruned<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        mut alive: impl FnMut(usize, u64, u64) -> bool,
    ) -> Option<(u64, u64, f64)> {
        let mut x = 0u64;
        let mut y = 0u64;
        let mut p = 1.0;
        for (t, level) in self.levels.iter().enumerate() {
            let q = level.pick(rng.random::<f64>());
            x = (x << 1) | u64::from(q >> 1);
            y = (y << 1) | u64::from(q & 1);
            p *= level.entries[q as usize];
            if !alive(t + 1, x, y) {
                return None;
            }
        }
        Some((x, y, p))
    }
}

/// Distinct 0-based cells drawn by the normal-count / duplicate-rejection scheme.
pub(crate) fn rejection_cells<R: Rng + ?Sized>(
    chain: &InitiatorChain,
    retry_factor: u64,
    block: Option<usize>,
    rng: &mut R,
) -> Result<Vec<(u64, u64)>> {
    let moments = expected_edge_sum(chain);
    let target = sample_edge_count(moments.m, moments.v, chain.support_size(), rng);
    let budget = retry_factor.saturating_mul(target);
    let descent = CellSampler::new(chain);

    let mut seen = FxHashSet::default();
    seen.reserve(target.min(1 << 26) as usize);
    let mut cells = Vec::with_capacity(target.min(1 << 26) as usize);
    let mut rejections = 0u64;
    while (cells.len() as u64) < target {
        let (x, y, _) = descent.sample(rng);
        if seen.insert((x, y)) {
            cells.push((x, y));
            rejections = 0;
        } else {
            rejections += 1;
            if rejections > budget {
                return Err(Error::RetryBudgetExceeded {
                    budget,
                    accepted: cells.len() as u64,
                    target,
                    block,
                });
            }
        }
    }
    Ok(cells)
}

/// Options for [`kpgm_sample_with`].
#[derive(Debug, Clone, Copy)]
pub struct KpgmOptions {
    /// Consecutive duplicate rejections allowed, as a multiple of the edge target.
    pub retry_factor: u64,
}

impl Default for KpgmOptions {
    fn default() -> Self {
        KpgmOptions {
            retry_factor: DEFAULT_RETRY_FACTOR,
        }
    }
}

/// Samples a KPGM graph by drawing the edge count from a normal approximation
/// and placing each edge with `d` quadrisection steps, rejecting duplicates.
///
/// Expected cost is `O(d · |E|)`. The normal count and the rejection step make
/// the per-cell marginals only approximately `P_ij`; the deviation is visible
/// on small graphs where `m` is a sizeable fraction of `4^d`. See
/// [`kpgm_sample_exact`] for a sampler with exact marginals.
pub fn kpgm_sample<R: Rng + ?Sized>(chain: &InitiatorChain, rng: &mut R) -> Result<EdgeList> {
    kpgm_sample_with(chain, KpgmOptions::default(), rng)
}

pub fn kpgm_sample_with<R: Rng + ?Sized>(
    chain: &InitiatorChain,
    options: KpgmOptions,
    rng: &mut R,
) -> Result<EdgeList> {
    let cells = rejection_cells(chain, options.retry_factor, None, rng)?;
    Ok(EdgeList::from_unique(chain.node_count(), to_node_ids(cells)))
}

/// Thinned ball-dropping plan for exact KPGM sampling.
///
/// Cell `(x, y)` receives `Poisson(c · P_xy)` balls via the quadrisection
/// descent, and each ball is kept with probability `-ln(1 - P_xy) / (c · P_xy)`.
/// The kept balls in a cell are then `Poisson(-ln(1 - P_xy))`, so the cell is
/// occupied with probability exactly `P_xy`, independently of every other cell.
/// `c` is the smallest constant keeping the acceptance probability ≤ 1.
#[derive(Debug, Clone)]
pub(crate) struct ExactPlan {
    descent: CellSampler,
    ball_mean: f64,
    oversample: f64,
}

impl ExactPlan {
    /// `None` when some cell has probability 1, which no finite ball rate can realize.
    pub(crate) fn new(chain: &InitiatorChain) -> Option<Self> {
        let p_max = chain.max_cell_probability();
        if p_max >= 1.0 {
            return None;
        }
        let oversample = neg_log1m_ratio(p_max);
        Some(ExactPlan {
            descent: CellSampler::new(chain),
            ball_mean: oversample * expected_edge_sum(chain).m,
            oversample,
        })
    }

    /// Calls `visit(x, y)` for every accepted ball. A cell may be visited more
    /// than once; the caller collapses repeats.
    pub(crate) fn run<R: Rng + ?Sized>(&self, rng: &mut R, visit: impl FnMut(u64, u64)) {
        self.run_pruned(rng, |_, _, _| true, visit);
    }

    /// [`ExactPlan::run`] restricted to cells whose every prefix passes `alive`.
    /// Balls are independent, so discarding one early leaves the law of the
    /// surviving cells unchanged.
    pub(crate) fn run_pruned<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        mut alive: impl FnMut(usize, u64, u64) -> bool,
        mut visit: impl FnMut(u64, u64),
    ) {
        if self.ball_mean <= 0.0 {
            return;
        }
        let balls = Poisson::new(self.ball_mean)
            .expect("ball mean is finite and positive")
            .sample(rng) as u64;
        for _ in 0..balls {
            let Some((x, y, p)) = self.descent.sample_pruned(rng, &mut alive) else {
                continue;
            };
            let accept = neg_log1m_ratio(p) / self.oversample;
            if accept >= 1.0 || rng.random::<f64>() < accept {
                visit(x, y);
            }
        }
    }
}

/// `-ln(1 - p) / p`, continuous at `p = 0`.
fn neg_log1m_ratio(p: f64) -> f64 {
    if p < 1e-12 {
        1.0 + 0.5 * p
    } else {
        -(-p).ln_1p() / p
    }
}

/// Samples a KPGM graph whose cells are independent with `P(A_ij = 1) = P_ij`
/// exactly, in expected `O(d · |E|)` time.
///
/// Chains whose Kronecker product contains a probability-1 cell fall back to
/// [`naive_kpgm_sample`], subject to its depth guard.
pub fn kpgm_sample_exact<R: Rng + ?Sized>(
    chain: &InitiatorChain,
    rng: &mut R,
) -> Result<EdgeList> {
    let Some(plan) = ExactPlan::new(chain) else {
        return naive_kpgm_sample(chain, rng);
    };
    let mut seen = FxHashSet::default();
    let mut cells = Vec::new();
    plan.run(rng, |x, y| {
        if seen.insert((x, y)) {
            cells.push((x, y));
        }
    });
    Ok(EdgeList::from_unique(chain.node_count(), to_node_ids(cells)))
}

/// One Bernoulli trial per cell. Refuses chains deeper than [`NAIVE_MAX_DEPTH`].
pub fn naive_kpgm_sample<R: Rng + ?Sized>(
    chain: &InitiatorChain,
    rng: &mut R,
) -> Result<EdgeList> {
    naive_kpgm_sample_with_limit(chain, NAIVE_MAX_DEPTH, rng)
}

pub fn naive_kpgm_sample_with_limit<R: Rng + ?Sized>(
    chain: &InitiatorChain,
    max_depth: usize,
    rng: &mut R,
) -> Result<EdgeList> {
    if chain.depth() > max_depth {
        return Err(Error::SizeGuard {
            what: "naive KPGM depth",
            actual: chain.depth() as u64,
            limit: max_depth as u64,
        });
    }
    let n = chain.node_count();
    let mut edges = Vec::new();
    for x in 0..n {
        for y in 0..n {
            let p = chain.cell_probability(x, y);
            if rng.random::<f64>() < p {
                edges.push((x + 1, y + 1));
            }
        }
    }
    Ok(EdgeList::from_unique(n, edges))
}

fn to_node_ids(cells: Vec<(u64, u64)>) -> Vec<(NodeId, NodeId)> {
    cells.into_iter().map(|(x, y)| (x + 1, y + 1)).collect()
}
