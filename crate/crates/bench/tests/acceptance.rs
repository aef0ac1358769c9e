//! Acceptance suite. Runs every criterion in sequence (timings are taken on an
//! otherwise idle process) and prints one PASS/FAIL line per criterion.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use kronequilt::kronecker::{
    kpgm_sample, kpgm_sample_exact, naive_kpgm_sample, InitiatorChain, InitiatorMatrix,
};
use kronequilt::magm::{
    build_partition, magm_edge_probability, naive_magm_sample, quilt_sample, quilt_sample_with,
    sample_attributes, AttributeAssignment, MagmModel, QuiltOptions,
};
use kronequilt::rng::seeded;
use kronequilt::speedup::{fast_magm_sample, fast_magm_sample_with_plan, select_threshold};
use kronequilt::validate::{test_against_probabilities, test_two_sample, CellCounts};
use kronequilt::EdgeList;
use kronequilt_bench::{loglog_fit, median, partition_stats, run_experiment, Experiment, ExperimentSpec, Record, ThetaPreset};
use rand::Rng;

const ALPHA: f64 = 0.01;
const EQUIVALENCE_SAMPLES: usize = 20_000;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn theta1_model(d: usize, mu: f64, n: u64) -> MagmModel {
    let chain = InitiatorChain::repeated(InitiatorMatrix::theta1(), d).unwrap();
    MagmModel::with_shared_mu(chain, mu, n).unwrap()
}

/// Per-cell frequencies of `sampler` against the analytic probabilities and
/// against the naive sampler, both Bonferroni-corrected.
fn equivalence(
    model: &MagmModel,
    attrs: &AttributeAssignment,
    seed: u64,
    mut sampler: impl FnMut(&mut kronequilt::rng::BlockRng) -> EdgeList,
) -> Verdict {
    let n = model.node_count();
    let mut ours = CellCounts::new(n);
    let mut naive = CellCounts::new(n);
    let mut rng = seeded(seed);
    for _ in 0..EQUIVALENCE_SAMPLES {
        ours.record(&sampler(&mut rng));
        naive.record(&naive_magm_sample(model, attrs, &mut rng).unwrap());
    }
    let q = test_against_probabilities(&ours, |i, j| magm_edge_probability(model, attrs, i, j).unwrap(), ALPHA);
    let two = test_two_sample(&ours, &naive, ALPHA);
    check(
        q.passed() && two.passed(),
        format!(
            "vs Q: max chi2 {:.2} at {:?}; vs naive: max chi2 {:.2} at {:?}; critical {:.2}",
            q.worst_statistic, q.worst_cell, two.worst_statistic, two.worst_cell, q.critical
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let model = theta1_model(3, 0.5, 8);
    // Repeated configurations give three partition sets.
    let attrs = AttributeAssignment::new(3, vec![5, 2, 5, 0, 7, 2, 5, 1]).unwrap();
    equivalence(&model, &attrs, 7, |rng| quilt_sample(&model, &attrs, rng).unwrap())
}

fn fast_path_equivalence() -> Verdict {
    let model = theta1_model(3, 0.9, 8);
    // Configuration 7 appears six times, so the selected plan has a heavy group.
    let attrs = AttributeAssignment::new(3, vec![7, 7, 7, 6, 7, 7, 3, 7]).unwrap();
    let plan = select_threshold(&attrs, model.chain());
    if plan.heavy_count() == 0 {
        return Err(format!("plan has no heavy group: {}", plan.summary()));
    }
    equivalence(&model, &attrs, 1002, |rng| fast_magm_sample(&model, &attrs, rng).unwrap())
        .map(|d| format!("{}; {d}", plan.summary()))
        .map_err(|d| format!("{}; {d}", plan.summary()))
}

/// `2^d × 2^d` Kronecker power of `m`, built by explicit block expansion.
fn explicit_kronecker(m: &InitiatorMatrix, d: usize) -> Vec<Vec<f64>> {
    let mut p = vec![vec![1.0]];
    for _ in 0..d {
        let size = p.len();
        let mut next = vec![vec![0.0; 2 * size]; 2 * size];
        for (i, row) in p.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                for a in 0..2 {
                    for b in 0..2 {
                        next[2 * i + a][2 * j + b] = v * m.get(a, b);
                    }
                }
            }
        }
        p = next;
    }
    p
}

fn kpgm_marginal() -> Verdict {
    let samples = 100_000u64;
    let chain = InitiatorChain::repeated(InitiatorMatrix::theta1(), 2).unwrap();
    let p = explicit_kronecker(&InitiatorMatrix::theta1(), 2);
    if (p[0][0] - 0.0225).abs() > 1e-15 {
        return Err(format!("oracle P_11 = {}", p[0][0]));
    }
    let mut counts = CellCounts::new(4);
    let mut rng = seeded(1003);
    for _ in 0..samples {
        counts.record(&naive_kpgm_sample(&chain, &mut rng).unwrap());
    }
    let mut worst = 0.0f64;
    for i in 1..=4u64 {
        for j in 1..=4u64 {
            let q = p[(i - 1) as usize][(j - 1) as usize];
            let sigma = (q * (1.0 - q) / samples as f64).sqrt();
            worst = worst.max((counts.frequency(i, j) - q).abs() / sigma);
        }
    }
    check(worst < 4.0, format!("largest deviation {worst:.2} sigma over 16 cells"))
}

fn partition_optimality() -> Verdict {
    let mut rng = seeded(1004);
    let mut largest_b = 0;
    for case in 0..1000 {
        let d = rng.random_range(1..=14usize);
        let n = rng.random_range(1..=10_000u64);
        let mu = rng.random::<f64>();
        let chain = InitiatorChain::repeated(InitiatorMatrix::theta1(), d).unwrap();
        let model = MagmModel::with_shared_mu(chain, mu, n).unwrap();
        let attrs = sample_attributes(&model, &mut rng);
        let part = build_partition(&attrs);

        let mut counts: HashMap<u64, usize> = HashMap::new();
        for &l in attrs.lambdas() {
            *counts.entry(l).or_default() += 1;
        }
        let brute = counts.values().copied().max().unwrap_or(0);
        if part.size() != brute {
            return Err(format!("case {case}: B = {} but max multiplicity is {brute}", part.size()));
        }
        largest_b = largest_b.max(brute);

        let mut seen = vec![false; n as usize];
        for (c, set) in part.sets().iter().enumerate() {
            let mut configs = std::collections::HashSet::new();
            for &i in set {
                let idx = (i - 1) as usize;
                if seen[idx] || !configs.insert(attrs.lambda(i)) || part.multiplicity(i) as usize != c + 1 {
                    return Err(format!("case {case}: invariant broken at node {i} in set {}", c + 1));
                }
                seen[idx] = true;
            }
            if c > 0 && set.len() > part.sets()[c - 1].len() {
                return Err(format!("case {case}: set sizes increase at {}", c + 1));
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(format!("case {case}: sets do not cover all nodes"));
        }
    }
    Ok(format!("1000 assignments, largest B = {largest_b}"))
}

fn partition_growth() -> Verdict {
    let spec = ExperimentSpec {
        log2_n: 8..=16,
        trials: 10,
        mu: 0.5,
        seed: 1005,
        ..ExperimentSpec::new(Experiment::EdgesVsN)
    };
    let rows = partition_stats(&spec).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    let mut ok = true;
    for d in 8..=16usize {
        let b: Vec<f64> = rows.iter().filter(|r| r.d == d).map(|r| r.partition_size as f64).collect();
        let mean = b.iter().sum::<f64>() / b.len() as f64;
        ok &= mean <= d as f64;
        detail.push(format!("2^{d}: {mean:.1}"));
    }
    check(ok, format!("mean B vs log2 n: {}", detail.join(", ")))
}

fn skewed_partition_size() -> Verdict {
    let spec = ExperimentSpec {
        log2_n: 16..=16,
        trials: 10,
        mu: 0.9,
        seed: 1006,
        ..ExperimentSpec::new(Experiment::EdgesVsN)
    };
    let rows = partition_stats(&spec).map_err(|e| e.to_string())?;
    let mean = rows.iter().map(|r| r.partition_size as f64).sum::<f64>() / rows.len() as f64;
    let approx = 65536.0 * 0.9f64.powi(16);
    let rel = (mean - approx).abs() / approx;
    check(rel < 0.2, format!("mean B {mean:.1} vs n*mu^d {approx:.1} (relative error {rel:.4})"))
}

/// Structure rows per theta for sizes 2^8..2^14, trials in parallel.
fn structure(theta: ThetaPreset, seed: u64) -> Result<Vec<Record>, String> {
    let spec = ExperimentSpec {
        theta,
        log2_n: 8..=14,
        trials: 10,
        seed,
        parallel_trials: true,
        ..ExperimentSpec::new(Experiment::SccVsN)
    };
    run_experiment(&spec).map(|t| t.rows).map_err(|e| e.to_string())
}

fn mean_by_n(rows: &[Record], value: impl Fn(&Record) -> f64) -> Vec<(f64, f64)> {
    let mut sizes: Vec<u64> = rows.iter().map(|r| r.n).collect();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let v: Vec<f64> = rows.iter().filter(|r| r.n == n).map(&value).collect();
            (n as f64, v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

fn edge_growth(structures: &[(ThetaPreset, Vec<Record>)]) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for (theta, rows) in structures {
        let points = mean_by_n(rows, |r| r.edges.unwrap() as f64);
        let fit = loglog_fit(&points).ok_or("degenerate fit")?;
        ok &= fit.r_squared > 0.99;
        detail.push(format!("{}: slope {:.3}, R^2 {:.5}", theta.name(), fit.slope, fit.r_squared));
    }
    check(ok, detail.join("; "))
}

fn scc_growth(structures: &[(ThetaPreset, Vec<Record>)]) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for (theta, rows) in structures {
        let points = mean_by_n(rows, |r| r.scc_fraction.unwrap());
        let inversions = points.windows(2).filter(|w| w[1].1 < w[0].1).count();
        let top = points.last().unwrap().1;
        ok &= inversions <= 1;
        if *theta == ThetaPreset::Theta2 {
            ok &= top > 0.95;
        }
        let curve: Vec<String> = points.iter().map(|p| format!("{:.3}", p.1)).collect();
        detail.push(format!(
            "{}: [{}], {inversions} inversion(s), {:.3} at 2^14",
            theta.name(),
            curve.join(" "),
            top
        ));
    }
    check(ok, detail.join("; "))
}

fn median_of(rows: &[Record], keep: impl Fn(&Record) -> bool, value: impl Fn(&Record) -> f64) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| keep(r)).map(value).collect();
    median(&v).expect("rows present")
}

fn runtime_shape() -> Verdict {
    let spec = ExperimentSpec {
        log2_n: 13..=13,
        seed: 1009,
        ..ExperimentSpec::new(Experiment::RuntimeVsN)
    };
    let rows = run_experiment(&spec).map_err(|e| e.to_string())?.rows;
    let quilt = median_of(&rows, |r| r.sampler == "quilt", |r| r.wall_ms.unwrap());
    let naive = median_of(&rows, |r| r.sampler == "naive", |r| r.wall_ms.unwrap());

    let spec = ExperimentSpec {
        log2_n: 10..=15,
        seed: 1010,
        ..ExperimentSpec::new(Experiment::PerEdgeTime)
    };
    let rows = run_experiment(&spec).map_err(|e| e.to_string())?.rows;
    let per_edge: Vec<f64> = (10..=15)
        .map(|d| median_of(&rows, |r| r.d == d, |r| r.ns_per_edge.unwrap()))
        .collect();
    let spread = per_edge.iter().cloned().fold(f64::MIN, f64::max) / per_edge.iter().cloned().fold(f64::MAX, f64::min);
    let curve: Vec<String> = per_edge.iter().map(|v| format!("{v:.0}")).collect();
    check(
        quilt < naive && spread < 3.0,
        format!(
            "2^13: quilt {quilt:.1} ms vs naive {naive:.1} ms; ns/edge over 2^10..2^15 [{}], spread {spread:.2}x",
            curve.join(" ")
        ),
    )
}

fn depth_growth() -> Verdict {
    let spec = ExperimentSpec {
        log2_n: 10..=10,
        d_offsets: 0..=3,
        seed: 1011,
        ..ExperimentSpec::new(Experiment::DSweep)
    };
    let rows = run_experiment(&spec).map_err(|e| e.to_string())?.rows;
    let base = median_of(&rows, |r| r.d == 10, |r| r.wall_ms.unwrap());
    let deep = median_of(&rows, |r| r.d == 13, |r| r.wall_ms.unwrap());
    let ratio = deep / base;
    check(ratio >= 4.0, format!("d=10: {base:.2} ms, d=13: {deep:.2} ms, ratio {ratio:.2}"))
}

fn determinism() -> Verdict {
    let chain = InitiatorChain::repeated(InitiatorMatrix::theta2(), 10).unwrap();
    let model = MagmModel::with_shared_mu(chain.clone(), 0.7, 1 << 10).unwrap();
    let attrs = sample_attributes(&model, &mut seeded(1));
    let plan = select_threshold(&attrs, model.chain());
    let small = theta1_model(6, 0.5, 64);
    let small_attrs = sample_attributes(&small, &mut seeded(2));

    let serial = QuiltOptions::default();
    let parallel = QuiltOptions { parallel: true, ..serial };
    type Sampler<'a> = Box<dyn Fn(u64) -> EdgeList + 'a>;
    let samplers: Vec<(&str, Sampler)> = vec![
        ("kpgm", Box::new(|s| kpgm_sample(&chain, &mut seeded(s)).unwrap())),
        ("kpgm-exact", Box::new(|s| kpgm_sample_exact(&chain, &mut seeded(s)).unwrap())),
        ("kpgm-naive", Box::new(|s| naive_kpgm_sample(&chain, &mut seeded(s)).unwrap())),
        ("quilt", Box::new(|s| quilt_sample_with(&model, &attrs, &serial, &mut seeded(s)).unwrap())),
        ("quilt-parallel", Box::new(|s| quilt_sample_with(&model, &attrs, &parallel, &mut seeded(s)).unwrap())),
        ("magm-naive", Box::new(|s| naive_magm_sample(&small, &small_attrs, &mut seeded(s)).unwrap())),
        (
            "fast",
            Box::new(|s| fast_magm_sample_with_plan(&model, &attrs, &plan, &serial, &mut seeded(s)).unwrap()),
        ),
        (
            "fast-parallel",
            Box::new(|s| fast_magm_sample_with_plan(&model, &attrs, &plan, &parallel, &mut seeded(s)).unwrap()),
        ),
    ];
    for (name, sample) in &samplers {
        for seed in [0u64, 7, 12345] {
            if sample(seed).to_text() != sample(seed).to_text() {
                return Err(format!("{name} differs between runs at seed {seed}"));
            }
        }
    }
    // Serial output equals parallel output at every pool size.
    for seed in [0u64, 7] {
        let reference = quilt_sample_with(&model, &attrs, &serial, &mut seeded(seed)).unwrap().to_text();
        let fast_reference =
            fast_magm_sample_with_plan(&model, &attrs, &plan, &serial, &mut seeded(seed)).unwrap().to_text();
        for threads in [1, 2, 4, 8] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let (q, f) = pool.install(|| {
                (
                    quilt_sample_with(&model, &attrs, &parallel, &mut seeded(seed)).unwrap().to_text(),
                    fast_magm_sample_with_plan(&model, &attrs, &plan, &parallel, &mut seeded(seed))
                        .unwrap()
                        .to_text(),
                )
            });
            if q != reference || f != fast_reference {
                return Err(format!("parallel output differs from serial with {threads} threads, seed {seed}"));
            }
        }
    }
    Ok(format!("{} samplers x 3 seeds; serial == parallel for 1, 2, 4, 8 threads", samplers.len()))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Verdict, f64)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let verdict = f();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match &verdict {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("criterion {id:>2} {tag} {name} ({secs:.1}s): {detail}");
        results.push((id, name, verdict, secs));
    };

    run(1, "quilting matches Q and the naive sampler", &oracle_equivalence);
    run(2, "fast path matches Q and the naive sampler", &fast_path_equivalence);
    run(3, "naive KPGM marginals", &kpgm_marginal);
    run(4, "partition optimality fuzz", &partition_optimality);
    run(5, "mean B stays below log2 n at mu = 0.5", &partition_growth);
    run(6, "B tracks n mu^d at mu = 0.9", &skewed_partition_size);
    let structures = [ThetaPreset::Theta1, ThetaPreset::Theta2]
        .into_iter()
        .map(|t| structure(t, 1007).map(|rows| (t, rows)))
        .collect::<Result<Vec<_>, String>>();
    run(7, "edge count follows a power law in n", &|| edge_growth(structures.as_ref()?));
    run(8, "largest SCC fraction grows with n", &|| scc_growth(structures.as_ref()?));
    run(9, "quilting beats naive; per-edge time nearly flat", &runtime_shape);
    run(10, "runtime grows sharply once d exceeds log2 n", &depth_growth);
    run(11, "byte-identical output for equal seeds", &determinism);

    let failed: Vec<u32> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s{}",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
