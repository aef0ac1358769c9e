//! Experiment runner for the kronequilt samplers.
//!
//! Each experiment sweeps graph sizes `n = 2^k` (and, for some, `μ` or the
//! attribute depth `d`) and emits one CSV row per configuration and trial.
//! Every trial draws from its own seeded stream, so all non-timing columns are
//! reproducible. Runtimes are wall-clock measurements from a monotonic clock
//! and are summarized by the median over trials.

mod fit;
mod table;

pub use fit::{loglog_fit, median, LogLogFit};
pub use table::{write_rows, GraphRow, PartitionRow, Record, ResultTable};

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;
use std::time::{Duration, Instant};

use kronequilt::kronecker::{InitiatorChain, InitiatorMatrix, MAX_DEPTH};
use kronequilt::magm::{
    build_partition, naive_magm_sample_with_limit, quilt_sample_with, sample_attributes, AttributeAssignment,
    MagmModel, QuiltOptions,
};
use kronequilt::rng::{block_rng, BlockRng};
use kronequilt::speedup::{fast_magm_sample_with_plan, select_threshold};
use kronequilt::stats::{largest_scc_fraction, measure_partition_size};
use kronequilt::{EdgeList, Error, Result};
use rayon::prelude::*;

pub const DEFAULT_MAX_N: u64 = 1 << 16;
pub const DEFAULT_EDGE_BUDGET: f64 = 1e8;
pub const DEFAULT_NAIVE_MAX_N: u64 = 1 << 14;
/// Baseline medians below this are too short to divide by.
pub const MIN_BASELINE: Duration = Duration::from_micros(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    EdgesVsN,
    SccVsN,
    RuntimeVsN,
    PerEdgeTime,
    MuSweep,
    RhoMax,
    DSweep,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::EdgesVsN,
        Experiment::SccVsN,
        Experiment::RuntimeVsN,
        Experiment::PerEdgeTime,
        Experiment::MuSweep,
        Experiment::RhoMax,
        Experiment::DSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::EdgesVsN => "edges-vs-n",
            Experiment::SccVsN => "scc-vs-n",
            Experiment::RuntimeVsN => "runtime-vs-n",
            Experiment::PerEdgeTime => "per-edge-time",
            Experiment::MuSweep => "mu-sweep",
            Experiment::RhoMax => "rho-max",
            Experiment::DSweep => "d-sweep",
        }
    }

    /// Whether the experiment's output depends on wall-clock measurements.
    pub fn is_timing(self) -> bool {
        !matches!(self, Experiment::EdgesVsN | Experiment::SccVsN)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::InvalidParameter(format!("unknown experiment {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

/// The two initiator matrices used throughout the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThetaPreset {
    Theta1,
    Theta2,
}

impl ThetaPreset {
    pub fn matrix(self) -> InitiatorMatrix {
        match self {
            ThetaPreset::Theta1 => InitiatorMatrix::theta1(),
            ThetaPreset::Theta2 => InitiatorMatrix::theta2(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ThetaPreset::Theta1 => "theta1",
            ThetaPreset::Theta2 => "theta2",
        }
    }
}

impl FromStr for ThetaPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta1" => Ok(ThetaPreset::Theta1),
            "theta2" => Ok(ThetaPreset::Theta2),
            _ => Err(Error::InvalidParameter(format!(
                "unknown theta preset {s:?}, expected theta1 or theta2"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub theta: ThetaPreset,
    /// Attribute probability shared by every level.
    pub mu: f64,
    /// Graph sizes `n = 2^k`; the depth is `d = k` unless swept.
    pub log2_n: RangeInclusive<u32>,
    /// d-sweep only: depths `log₂ n + offset`.
    pub d_offsets: RangeInclusive<i32>,
    /// μ values for mu-sweep and rho-max. The baseline is always run too.
    pub mus: Vec<f64>,
    pub baseline_mu: f64,
    pub trials: usize,
    pub seed: u64,
    pub max_n: u64,
    /// Largest admissible expected edge count of a configuration.
    pub edge_budget: f64,
    /// runtime-vs-n runs the naive sampler only up to this size.
    pub naive_max_n: u64,
    /// Run trials on the rayon pool; refused for timing experiments.
    pub parallel_trials: bool,
    /// Quilt with prefix pruning (see [`QuiltOptions::prune`]).
    pub prune: bool,
}

impl ExperimentSpec {
    /// Desk-scale defaults for `experiment`.
    pub fn new(experiment: Experiment) -> Self {
        let log2_n = match experiment {
            Experiment::EdgesVsN | Experiment::SccVsN => 8..=14,
            Experiment::RuntimeVsN => 10..=13,
            Experiment::PerEdgeTime => 10..=15,
            Experiment::MuSweep => 12..=12,
            Experiment::RhoMax => 10..=14,
            Experiment::DSweep => 10..=10,
        };
        let theta = match experiment {
            Experiment::MuSweep | Experiment::RhoMax => ThetaPreset::Theta2,
            _ => ThetaPreset::Theta1,
        };
        ExperimentSpec {
            experiment,
            theta,
            mu: 0.5,
            log2_n,
            d_offsets: -3..=3,
            mus: (1..=9).map(|k| f64::from(k) / 10.0).collect(),
            baseline_mu: 0.5,
            trials: 10,
            seed: 0,
            max_n: DEFAULT_MAX_N,
            edge_budget: DEFAULT_EDGE_BUDGET,
            naive_max_n: DEFAULT_NAIVE_MAX_N,
            parallel_trials: false,
            prune: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let probability = |mu: f64| (0.0..=1.0).contains(&mu);
        if !probability(self.mu) || !probability(self.baseline_mu) || !self.mus.iter().all(|&m| probability(m)) {
            return bad("every mu must lie in [0, 1]".into());
        }
        if self.log2_n.is_empty() || *self.log2_n.start() == 0 || *self.log2_n.end() as usize > MAX_DEPTH {
            return bad(format!(
                "log2(n) range {:?} must be non-empty within 1..={MAX_DEPTH}",
                self.log2_n
            ));
        }
        if self.experiment == Experiment::DSweep && self.d_offsets.is_empty() {
            return bad("d offsets must be non-empty".into());
        }
        if self.parallel_trials && self.experiment.is_timing() {
            return bad(format!("{} measures time; parallel trials are not allowed", self.experiment));
        }
        if self.edge_budget.is_nan() || self.edge_budget <= 0.0 {
            return bad("edge budget must be positive".into());
        }
        Ok(())
    }

    /// Builds the model for one configuration, enforcing the size guards.
    pub fn model(&self, n: u64, d: usize, mu: f64) -> Result<MagmModel> {
        if n > self.max_n {
            return Err(Error::SizeGuard {
                what: "node count",
                actual: n,
                limit: self.max_n,
            });
        }
        let chain = InitiatorChain::repeated(self.theta.matrix(), d)?;
        let model = MagmModel::with_shared_mu(chain, mu, n)?;
        let expected = model.expected_edges();
        if expected > self.edge_budget {
            return Err(Error::SizeGuard {
                what: "expected edge count",
                actual: expected.ceil() as u64,
                limit: self.edge_budget as u64,
            });
        }
        Ok(model)
    }

    fn sizes(&self) -> impl Iterator<Item = (u64, usize)> {
        self.log2_n.clone().map(|k| (1u64 << k, k as usize))
    }

    fn quilt_options(&self) -> QuiltOptions {
        QuiltOptions {
            prune: self.prune,
            ..QuiltOptions::default()
        }
    }

    fn record(&self, n: u64, d: usize, mu: f64, sampler: &'static str) -> Record {
        Record::new(self.experiment.name(), self.theta.name(), n, d, mu, sampler)
    }
}

/// The stream for trial `trial` of configuration `config`.
fn trial_rng(seed: u64, config: usize, trial: usize) -> BlockRng {
    block_rng(seed, ((config as u64) << 32) | trial as u64)
}

fn timed<T>(run: impl FnOnce() -> Result<T>) -> Result<(T, Duration)> {
    let start = Instant::now();
    let value = run()?;
    Ok((value, start.elapsed()))
}

fn fill_timing(record: &mut Record, graph: &EdgeList, elapsed: Duration) {
    record.edges = Some(graph.edge_count());
    record.wall_ms = Some(elapsed.as_secs_f64() * 1e3);
    if graph.edge_count() > 0 {
        record.ns_per_edge = Some(elapsed.as_nanos() as f64 / graph.edge_count() as f64);
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let rows = match spec.experiment {
        Experiment::EdgesVsN | Experiment::SccVsN => structure_rows(spec)?,
        Experiment::RuntimeVsN | Experiment::PerEdgeTime | Experiment::DSweep => runtime_rows(spec)?,
        Experiment::MuSweep => {
            let mut rows = Vec::new();
            for (config, (n, d)) in spec.sizes().enumerate() {
                for point in mu_sweep(spec, config, n, d)? {
                    rows.extend(point.rows);
                }
            }
            rows
        }
        Experiment::RhoMax => rho_max_rows(spec)?,
    };
    Ok(ResultTable { rows })
}

/// Edge count, partition size and largest SCC fraction of quilted samples.
fn structure_rows(spec: &ExperimentSpec) -> Result<Vec<Record>> {
    let mut rows = Vec::new();
    for (config, (n, d)) in spec.sizes().enumerate() {
        let model = spec.model(n, d, spec.mu)?;
        let trial = |t: usize| -> Result<Record> {
            let mut rng = trial_rng(spec.seed, config, t);
            let attrs = sample_attributes(&model, &mut rng);
            let graph = quilt_sample_with(&model, &attrs, &spec.quilt_options(), &mut rng)?;
            let mut r = spec.record(n, d, spec.mu, "quilt");
            r.trial = Some(t);
            r.partition_size = Some(build_partition(&attrs).size());
            r.edges = Some(graph.edge_count());
            r.scc_fraction = Some(largest_scc_fraction(&graph));
            Ok(r)
        };
        let batch: Vec<Record> = if spec.parallel_trials {
            (0..spec.trials).into_par_iter().map(trial).collect::<Result<_>>()?
        } else {
            (0..spec.trials).map(trial).collect::<Result<_>>()?
        };
        rows.extend(batch);
    }
    Ok(rows)
}

/// Quilting wall-clock per configuration; runtime-vs-n adds the naive sampler
/// for sizes up to `naive_max_n`.
fn runtime_rows(spec: &ExperimentSpec) -> Result<Vec<Record>> {
    let mut configs = Vec::new();
    for (n, k) in spec.sizes() {
        if spec.experiment == Experiment::DSweep {
            for offset in spec.d_offsets.clone() {
                let d = k as i64 + i64::from(offset);
                if (1..=MAX_DEPTH as i64).contains(&d) {
                    configs.push((n, d as usize));
                }
            }
        } else {
            configs.push((n, k));
        }
    }
    let with_naive = spec.experiment == Experiment::RuntimeVsN;
    let mut rows = Vec::new();
    for (config, &(n, d)) in configs.iter().enumerate() {
        let model = spec.model(n, d, spec.mu)?;
        for t in 0..spec.trials {
            let mut rng = trial_rng(spec.seed, config, t);
            let attrs = sample_attributes(&model, &mut rng);
            let partition_size = build_partition(&attrs).size();
            let (graph, elapsed) = timed(|| quilt_sample_with(&model, &attrs, &spec.quilt_options(), &mut rng))?;
            let mut r = spec.record(n, d, spec.mu, "quilt");
            r.trial = Some(t);
            r.partition_size = Some(partition_size);
            fill_timing(&mut r, &graph, elapsed);
            rows.push(r);
            if with_naive && n <= spec.naive_max_n {
                let (graph, elapsed) =
                    timed(|| naive_magm_sample_with_limit(&model, &attrs, spec.naive_max_n, &mut rng))?;
                let mut r = spec.record(n, d, spec.mu, "naive");
                r.trial = Some(t);
                fill_timing(&mut r, &graph, elapsed);
                rows.push(r);
            }
        }
    }
    Ok(rows)
}

/// One μ of a sweep at fixed `n`: its trial rows and median runtime.
struct SweepPoint {
    mu: f64,
    median: Duration,
    rows: Vec<Record>,
}

fn timed_fast_trials(
    spec: &ExperimentSpec,
    config: usize,
    n: u64,
    d: usize,
    mu: f64,
) -> Result<(Vec<Record>, Duration)> {
    let model = spec.model(n, d, mu)?;
    let mut rows = Vec::with_capacity(spec.trials);
    let mut times = Vec::with_capacity(spec.trials);
    for t in 0..spec.trials {
        let mut rng = trial_rng(spec.seed, config, t);
        let attrs: AttributeAssignment = sample_attributes(&model, &mut rng);
        let partition_size = build_partition(&attrs).size();
        let (graph, elapsed) = timed(|| {
            let plan = select_threshold(&attrs, model.chain());
            fast_magm_sample_with_plan(&model, &attrs, &plan, &spec.quilt_options(), &mut rng)
        })?;
        let mut r = spec.record(n, d, mu, "fast");
        r.trial = Some(t);
        r.partition_size = Some(partition_size);
        fill_timing(&mut r, &graph, elapsed);
        rows.push(r);
        times.push(elapsed.as_secs_f64());
    }
    let median = median(&times).expect("at least one trial");
    Ok((rows, Duration::from_secs_f64(median)))
}

fn ratio(time: Duration, baseline: Duration) -> Result<f64> {
    if baseline < MIN_BASELINE {
        return Err(Error::InvalidParameter(format!(
            "baseline runtime {baseline:?} is below the clock resolution guard {MIN_BASELINE:?}"
        )));
    }
    Ok(time.as_secs_f64() / baseline.as_secs_f64())
}

/// Runs the fast sampler for every μ (plus the baseline) at one size and
/// fills `rho = T(μ) / T(baseline)` on each row.
fn mu_sweep(spec: &ExperimentSpec, config: usize, n: u64, d: usize) -> Result<Vec<SweepPoint>> {
    let mut mus = spec.mus.clone();
    mus.push(spec.baseline_mu);
    mus.sort_by(f64::total_cmp);
    mus.dedup();
    let stride = mus.len();
    let mut points = Vec::with_capacity(stride);
    for (i, &mu) in mus.iter().enumerate() {
        let (rows, median) = timed_fast_trials(spec, config * stride + i, n, d, mu)?;
        points.push(SweepPoint { mu, median, rows });
    }
    let baseline = points
        .iter()
        .find(|p| p.mu == spec.baseline_mu)
        .expect("baseline is in the sweep")
        .median;
    for p in &mut points {
        let rho = ratio(p.median, baseline)?;
        for r in &mut p.rows {
            r.rho = Some(rho);
        }
    }
    Ok(points)
}

/// One row per size: the μ among `spec.mus` with the largest `rho`.
fn rho_max_rows(spec: &ExperimentSpec) -> Result<Vec<Record>> {
    let mut rows = Vec::new();
    for (config, (n, d)) in spec.sizes().enumerate() {
        let points = mu_sweep(spec, config, n, d)?;
        let worst = points
            .iter()
            .filter(|p| spec.mus.contains(&p.mu))
            .max_by(|a, b| a.median.cmp(&b.median))
            .unwrap_or(&points[0]);
        let mut r = spec.record(n, d, worst.mu, "fast");
        r.wall_ms = Some(worst.median.as_secs_f64() * 1e3);
        r.rho = worst.rows[0].rho;
        rows.push(r);
    }
    Ok(rows)
}

/// `T(μ) / T(baseline_mu)` for the fast sampler at the smallest size in
/// `spec`, with `T` the median wall-clock over `spec.trials`.
pub fn relative_runtime(mu: f64, baseline_mu: f64, spec: &ExperimentSpec) -> Result<f64> {
    let spec = ExperimentSpec {
        mu: baseline_mu,
        baseline_mu,
        ..spec.clone()
    };
    spec.validate()?;
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidParameter(format!("mu must lie in [0, 1], got {mu}")));
    }
    let (n, d) = spec.sizes().next().expect("validated non-empty range");
    let (_, baseline) = timed_fast_trials(&spec, 0, n, d, baseline_mu)?;
    let time = if mu == baseline_mu {
        baseline
    } else {
        timed_fast_trials(&spec, 1, n, d, mu)?.1
    };
    ratio(time, baseline)
}

/// Partition sizes `B` of sampled attribute assignments, per size and trial.
pub fn partition_stats(spec: &ExperimentSpec) -> Result<Vec<PartitionRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for (config, (n, d)) in spec.sizes().enumerate() {
        // Only attributes are drawn, so the edge budget does not apply.
        let chain = InitiatorChain::repeated(spec.theta.matrix(), d)?;
        if n > spec.max_n {
            return Err(Error::SizeGuard {
                what: "node count",
                actual: n,
                limit: spec.max_n,
            });
        }
        let model = MagmModel::with_shared_mu(chain, spec.mu, n)?;
        let sizes = measure_partition_size(&model, &mut trial_rng(spec.seed, config, 0), spec.trials)?;
        rows.extend(sizes.into_iter().enumerate().map(|(trial, b)| PartitionRow {
            n,
            d,
            mu: spec.mu,
            trial,
            partition_size: b,
        }));
    }
    Ok(rows)
}

/// Edge counts and largest SCC fractions of quilted samples.
pub fn graph_stats(spec: &ExperimentSpec) -> Result<Vec<GraphRow>> {
    let spec = ExperimentSpec {
        experiment: Experiment::SccVsN,
        ..spec.clone()
    };
    Ok(run_experiment(&spec)?
        .rows
        .into_iter()
        .map(|r| GraphRow {
            n: r.n,
            d: r.d,
            mu: r.mu,
            trial: r.trial.expect("structure rows carry a trial"),
            edges: r.edges.expect("structure rows carry edges"),
            scc_fraction: r.scc_fraction.expect("structure rows carry scc"),
        })
        .collect())
}
