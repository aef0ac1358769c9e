use kronequilt::kronecker::{
    expected_edge_sum, kpgm_edge_probability, kpgm_sample, kpgm_sample_exact, naive_kpgm_sample,
    CellSampler, InitiatorChain, InitiatorMatrix,
};
use kronequilt::rng::seeded;
use kronequilt::validate::{bonferroni_critical, test_against_probabilities, test_two_sample, CellCounts};
use kronequilt::EdgeList;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Explicit Kronecker product, row-major, `2^d × 2^d`.
fn explicit_kronecker(chain: &InitiatorChain) -> Vec<Vec<f64>> {
    let mut p = vec![vec![1.0]];
    for level in chain.levels() {
        let size = p.len();
        let mut next = vec![vec![0.0; size * 2]; size * 2];
        for (i, row) in p.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                for a in 0..2 {
                    for b in 0..2 {
                        next[i * 2 + a][j * 2 + b] = v * level.get(a, b);
                    }
                }
            }
        }
        p = next;
    }
    p
}

fn theta1(d: usize) -> InitiatorChain {
    InitiatorChain::repeated(InitiatorMatrix::theta1(), d).unwrap()
}

fn arb_matrix() -> impl Strategy<Value = InitiatorMatrix> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.01..=1.0f64)
        .prop_map(|(a, b, c, d)| InitiatorMatrix::new(a, b, c, d).unwrap())
}

fn arb_chain(max_d: usize) -> impl Strategy<Value = InitiatorChain> {
    prop::collection::vec(arb_matrix(), 1..=max_d).prop_map(|m| InitiatorChain::new(m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probability_matches_explicit_product(chain in arb_chain(6)) {
        let p = explicit_kronecker(&chain);
        let n = chain.node_count();
        for i in 1..=n {
            for j in 1..=n {
                let ours = kpgm_edge_probability(&chain, i, j).unwrap();
                let want = p[(i - 1) as usize][(j - 1) as usize];
                prop_assert!((ours - want).abs() <= 1e-12 * want.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn moments_match_explicit_sums(chain in arb_chain(6)) {
        let p = explicit_kronecker(&chain);
        let m: f64 = p.iter().flatten().sum();
        let v: f64 = p.iter().flatten().map(|x| x * x).sum();
        let mo = expected_edge_sum(&chain);
        prop_assert!((mo.m - m).abs() <= 1e-9 * m);
        prop_assert!((mo.v - v).abs() <= 1e-9 * v);
    }

    #[test]
    fn sampled_graphs_are_valid(chain in arb_chain(5), seed in any::<u64>()) {
        for g in [
            kpgm_sample(&chain, &mut seeded(seed)).unwrap(),
            kpgm_sample_exact(&chain, &mut seeded(seed)).unwrap(),
        ] {
            prop_assert_eq!(g.node_count(), chain.node_count());
            EdgeList::new(g.node_count(), g.into_edges()).unwrap();
        }
    }
}

#[test]
fn explicit_oracle_examples() {
    let p = explicit_kronecker(&theta1(2));
    assert!((p[0][0] - 0.0225).abs() < 1e-15);
    assert!((p[3][3] - 0.7225).abs() < 1e-15);
    let m: f64 = p.iter().flatten().sum();
    assert!((m - 5.76).abs() < 1e-12);
}

#[test]
fn single_descent_lands_with_probability_p_over_m() {
    for d in 1..=3 {
        let chain = theta1(d);
        let sampler = CellSampler::new(&chain);
        let n = chain.node_count() as usize;
        let m = expected_edge_sum(&chain).m;
        let draws = 200_000;
        let mut counts = vec![0u64; n * n];
        let mut rng = seeded(d as u64);
        for _ in 0..draws {
            let (x, y, p) = sampler.sample(&mut rng);
            assert_eq!(p, chain.cell_probability(x, y));
            counts[(x as usize) * n + y as usize] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .map(|(c, &k)| {
                let e = draws as f64 * chain.cell_probability((c / n) as u64, (c % n) as u64) / m;
                (k as f64 - e).powi(2) / e
            })
            .sum();
        let df = (n * n - 1) as f64;
        let crit = statrs::distribution::ContinuousCDF::inverse_cdf(
            &statrs::distribution::ChiSquared::new(df).unwrap(),
            0.999,
        );
        assert!(chi2 < crit, "d={d}: chi2={chi2} crit={crit}");
    }
}

#[test]
fn mean_edge_count_tracks_m() {
    let chain = theta1(3);
    let m = expected_edge_sum(&chain).m;
    assert!((m - 13.824).abs() < 1e-12);
    let mut rng = seeded(77);
    let counts: Vec<f64> = (0..10_000)
        .map(|_| kpgm_sample(&chain, &mut rng).unwrap().edge_count() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    let se = (var / counts.len() as f64).sqrt();
    assert!((mean - m).abs() < 3.0 * se, "mean={mean} m={m} se={se}");
}

/// Reference for the normal-count / rejection sampler: draw the edge count
/// from the same normal law, then take that many distinct cells by weighted
/// sampling without replacement via exponential keys (largest `u^{1/w}`).
fn keyed_reference(chain: &InitiatorChain, rng: &mut impl Rng) -> EdgeList {
    let n = chain.node_count();
    let mo = expected_edge_sum(chain);
    let z: f64 = StandardNormal.sample(rng);
    let x = (mo.m + (mo.m - mo.v).sqrt() * z).round_ties_even().clamp(0.0, (n * n) as f64) as usize;
    let mut keyed: Vec<(f64, u64, u64)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let w = chain.cell_probability(i, j);
            let u: f64 = 1.0 - rng.random::<f64>();
            (u.ln() / w, i + 1, j + 1)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
    EdgeList::new(n, keyed.into_iter().take(x).map(|(_, i, j)| (i, j)).collect()).unwrap()
}

#[test]
fn rejection_sampler_matches_keyed_reference() {
    let chain = theta1(2);
    let samples = 50_000;
    let mut ours = CellCounts::new(4);
    let mut reference = CellCounts::new(4);
    let mut rng = seeded(2024);
    for _ in 0..samples {
        ours.record(&kpgm_sample(&chain, &mut rng).unwrap());
        reference.record(&keyed_reference(&chain, &mut rng));
    }
    let t = test_two_sample(&ours, &reference, 0.01);
    assert!(t.passed(), "{t:?}");
}

#[test]
fn rejection_sampler_is_biased_on_tiny_graphs() {
    // With m = 5.76 of 16 cells, drawing distinct cells pulls mass away from
    // the likeliest cell; the exact sampler is what quilting relies on.
    let chain = theta1(2);
    let mut counts = CellCounts::new(4);
    let mut rng = seeded(5);
    for _ in 0..20_000 {
        counts.record(&kpgm_sample(&chain, &mut rng).unwrap());
    }
    assert!(counts.frequency(4, 4) < 0.7225 - 0.05);
}

#[test]
fn naive_sampler_marginals() {
    let chain = theta1(2);
    let samples = 100_000;
    let mut counts = CellCounts::new(4);
    let mut rng = seeded(31);
    for _ in 0..samples {
        counts.record(&naive_kpgm_sample(&chain, &mut rng).unwrap());
    }
    for i in 1..=4 {
        for j in 1..=4 {
            let p = kpgm_edge_probability(&chain, i, j).unwrap();
            let sigma = (p * (1.0 - p) / samples as f64).sqrt();
            assert!((counts.frequency(i, j) - p).abs() < 4.0 * sigma, "cell ({i},{j})");
        }
    }
}

#[test]
fn exact_sampler_marginals() {
    for d in [2, 3] {
        let chain = theta1(d);
        let n = chain.node_count();
        let mut counts = CellCounts::new(n);
        let mut rng = seeded(d as u64 + 100);
        for _ in 0..40_000 {
            counts.record(&kpgm_sample_exact(&chain, &mut rng).unwrap());
        }
        let t = test_against_probabilities(&counts, |i, j| chain.cell_probability(i - 1, j - 1), 0.01);
        assert!(t.passed(), "d={d}: {t:?}");
        assert!(t.critical >= bonferroni_critical(0.01, 1));
    }
}

#[test]
fn serialized_output_is_byte_identical_for_equal_seeds() {
    let chain = InitiatorChain::repeated(InitiatorMatrix::theta2(), 10).unwrap();
    for seed in [0, 1, 99] {
        assert_eq!(
            kpgm_sample(&chain, &mut seeded(seed)).unwrap().to_text(),
            kpgm_sample(&chain, &mut seeded(seed)).unwrap().to_text()
        );
        assert_eq!(
            kpgm_sample_exact(&chain, &mut seeded(seed)).unwrap().to_text(),
            kpgm_sample_exact(&chain, &mut seeded(seed)).unwrap().to_text()
        );
    }
}
