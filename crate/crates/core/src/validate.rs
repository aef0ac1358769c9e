//! Statistical checks for samplers: per-cell edge frequencies against known
//! probabilities or against another sampler, Bonferroni-corrected over cells.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::edgelist::{EdgeList, NodeId};

/// How often each ordered pair appeared across a batch of sampled graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCounts {
    n: u64,
    samples: u64,
    counts: Vec<u64>,
}

impl CellCounts {
    pub fn new(n: u64) -> Self {
        CellCounts {
            n,
            samples: 0,
            counts: vec![0; (n * n) as usize],
        }
    }

    pub fn record(&mut self, graph: &EdgeList) {
        assert_eq!(graph.node_count(), self.n, "graph size mismatch");
        self.samples += 1;
        for &(s, t) in graph.edges() {
            self.counts[((s - 1) * self.n + (t - 1)) as usize] += 1;
        }
    }

    pub fn node_count(&self) -> u64 {
        self.n
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn count(&self, i: NodeId, j: NodeId) -> u64 {
        self.counts[((i - 1) * self.n + (j - 1)) as usize]
    }

    pub fn frequency(&self, i: NodeId, j: NodeId) -> f64 {
        self.count(i, j) as f64 / self.samples as f64
    }

    fn cells(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (1..=self.n).flat_map(move |i| (1..=self.n).map(move |j| (i, j)))
    }
}

/// Outcome of a cell-wise test.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTest {
    /// Largest per-cell chi-square statistic (infinite for a violated certain cell).
    pub worst_statistic: f64,
    pub worst_cell: (NodeId, NodeId),
    /// Per-cell critical value after Bonferroni correction.
    pub critical: f64,
    pub cells_tested: usize,
}

impl CellTest {
    pub fn passed(&self) -> bool {
        self.worst_statistic <= self.critical
    }

    fn new(critical: f64) -> Self {
        CellTest {
            worst_statistic: 0.0,
            worst_cell: (0, 0),
            critical,
            cells_tested: 0,
        }
    }

    fn observe(&mut self, cell: (NodeId, NodeId), statistic: f64) {
        self.cells_tested += 1;
        if statistic > self.worst_statistic || self.worst_cell == (0, 0) {
            self.worst_statistic = statistic;
            self.worst_cell = cell;
        }
    }
}

/// Upper `alpha / cells` quantile of the one-degree-of-freedom chi-square law.
pub fn bonferroni_critical(alpha: f64, cells: usize) -> f64 {
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    chi.inverse_cdf(1.0 - alpha / cells.max(1) as f64)
}

/// Each cell's count against `Binomial(samples, p(i, j))`.
///
/// Cells with `p` of 0 or 1 must match exactly.
pub fn test_against_probabilities(
    counts: &CellCounts,
    p: impl Fn(NodeId, NodeId) -> f64,
    alpha: f64,
) -> CellTest {
    let cells = (counts.n * counts.n) as usize;
    let samples = counts.samples as f64;
    let mut result = CellTest::new(bonferroni_critical(alpha, cells));
    for (i, j) in counts.cells() {
        let q = p(i, j);
        let k = counts.count(i, j) as f64;
        let stat = if q <= 0.0 || q >= 1.0 {
            if k == q * samples {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            let expected = samples * q;
            (k - expected).powi(2) / (expected * (1.0 - q))
        };
        result.observe((i, j), stat);
    }
    result
}

/// Pearson chi-square on each cell's 2×2 table (sampler × edge present).
pub fn test_two_sample(a: &CellCounts, b: &CellCounts, alpha: f64) -> CellTest {
    assert_eq!(a.n, b.n, "cell count sizes differ");
    let cells = (a.n * a.n) as usize;
    let (na, nb) = (a.samples as f64, b.samples as f64);
    let total = na + nb;
    let mut result = CellTest::new(bonferroni_critical(alpha, cells));
    for (i, j) in a.cells() {
        let (ka, kb) = (a.count(i, j) as f64, b.count(i, j) as f64);
        let pooled = (ka + kb) / total;
        let stat = if pooled == 0.0 || pooled == 1.0 {
            0.0
        } else {
            let var = pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb);
            (ka / na - kb / nb).powi(2) / var
        };
        result.observe((i, j), stat);
    }
    result
}
