//! Acceptance gate. Each test prints one `criterion N: PASS|FAIL` line with
//! the measured numbers, then asserts.
//!
//! Run with `cargo test -p bmatch-core --test acceptance -- --nocapture`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bmatch_core::io::{format_matching, format_pivots};
use bmatch_core::{
    fig1_instance, generate, perturb, solve_bsuitor, solve_exact, solve_pivot, solve_serial_greedy,
    verify_feasible, BipartiteInstance, CapacityRule, DegreeDist, EdgeKey, ExactLimits,
    FilePredictor, GeneratorConfig, Matching, OraclePredictor, PivotPredictor, QuantilePredictor,
    Threshold, ThresholdVector, WarmStartPredictor, WeightDist,
};

const SIGMA_SQ: f64 = 0.1;

/// Solves with a given worker count; returns the matching and its round count.
type Solve<'a> = Box<dyn Fn(usize) -> (Matching, usize) + 'a>;

fn verdict(criterion: u32, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {tag} ({detail})");
}

fn random_weights(rng: &mut ChaCha8Rng) -> WeightDist {
    match rng.random_range(0..4) {
        0 => WeightDist::Integer { low: 1, high: 3 },
        1 => WeightDist::Integer {
            low: 1,
            high: rng.random_range(4..=50),
        },
        2 => WeightDist::Uniform {
            low: 0.5,
            high: 10.0,
        },
        _ => WeightDist::Exponential { rate: 1.0 },
    }
}

fn random_capacity(rng: &mut ChaCha8Rng) -> CapacityRule {
    if rng.random_bool(0.6) {
        CapacityRule::HalfDegree
    } else {
        CapacityRule::Uniform {
            ad: rng.random_range(1..=4),
            consumer: rng.random_range(1..=3),
        }
    }
}

/// Randomized instances for cross-solver checks: mostly small, with a tail
/// of medium and 200 x 5000 instances.
fn equality_suite(count: usize) -> Vec<BipartiteInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..count)
        .map(|i| {
            let (ads, consumers) = match i % 100 {
                0 => (200, 5000),
                1..=9 => (rng.random_range(20..=80), rng.random_range(200..=2000)),
                _ => (rng.random_range(1..=15), rng.random_range(1..=60)),
            };
            let degrees = match rng.random_range(0..3) {
                0 if consumers <= 60 => DegreeDist::Full,
                1 => DegreeDist::PowerLaw {
                    exponent: 1.5,
                    min: 1,
                    max: consumers.min(1000),
                },
                _ => DegreeDist::Uniform {
                    min: 0,
                    max: consumers.min(400),
                },
            };
            generate(&GeneratorConfig {
                num_ads: ads,
                num_consumers: consumers,
                degrees,
                weights: random_weights(&mut rng),
                capacity: random_capacity(&mut rng),
                seed: rng.random(),
            })
            .expect("suite configs are feasible")
        })
        .collect()
}

/// Base instances of the repeated-solve family: unbalanced, 100 consumers
/// per ad, power-law degrees, half-degree capacities.
fn perturbed_family(pairs: u64) -> Vec<(BipartiteInstance, BipartiteInstance)> {
    (0..pairs)
        .map(|seed| {
            let base = generate(&GeneratorConfig {
                num_ads: 100,
                num_consumers: 10_000,
                degrees: DegreeDist::PowerLaw {
                    exponent: 1.5,
                    min: 20,
                    max: 2000,
                },
                weights: WeightDist::Uniform {
                    low: 1.0,
                    high: 5.0,
                },
                capacity: CapacityRule::HalfDegree,
                seed,
            })
            .expect("family config is feasible");
            let next = perturb(&base, SIGMA_SQ, seed + 1_000_000).expect("valid variance");
            (base, next)
        })
        .collect()
}

fn write_piv(dir: &Path, name: &str, num_ads: usize, w: f64) -> FilePredictor {
    let entries: Vec<(usize, f64)> = (0..num_ads).map(|a| (a, w)).collect();
    let path = dir.join(name);
    std::fs::write(&path, format_pivots(&entries)).unwrap();
    FilePredictor { path }
}

#[test]
fn criterion_1_cross_solver_equality() {
    let suite = equality_suite(1000);
    let dir = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut infeasible = 0;
    let mut edges = 0;
    for (i, g) in suite.iter().enumerate() {
        edges += g.num_edges();
        let workers = [1, 2, 4][i % 3];
        let (reference, _) = solve_serial_greedy(g);
        if !verify_feasible(g, &reference).unwrap().is_feasible() {
            infeasible += 1;
        }
        let previous = solve_bsuitor(&perturb(g, SIGMA_SQ, i as u64).unwrap(), 1).thresholds;
        let high = write_piv(dir.path(), &format!("high{i}.piv"), g.num_ads(), 1e300);
        let zero = write_piv(dir.path(), &format!("zero{i}.piv"), g.num_ads(), 0.0);
        let predictors: Vec<(&str, Box<dyn PivotPredictor>)> = vec![
            ("oracle", Box::new(OraclePredictor)),
            ("warmstart", Box::new(WarmStartPredictor::new(previous))),
            ("quantile", Box::new(QuantilePredictor)),
            ("file-high", Box::new(high)),
            ("file-zero", Box::new(zero)),
        ];
        let mut runs: Vec<(&str, Matching)> = vec![("bsuitor", solve_bsuitor(g, workers).matching)];
        for (name, p) in &predictors {
            runs.push((name, solve_pivot(g, p.as_ref(), workers).unwrap().matching));
        }
        for (name, m) in runs {
            if m.pairs() != reference.pairs() {
                mismatches.push(format!("instance {i}: {name}"));
            }
        }
    }
    let pass = mismatches.is_empty() && infeasible == 0;
    verdict(
        1,
        pass,
        &format!(
            "{} instances, {edges} edges, 6 solver/predictor runs each against greedy, {} mismatches, {infeasible} infeasible",
            suite.len(),
            mismatches.len()
        ),
    );
    assert!(
        pass,
        "mismatches: {:?}",
        &mismatches[..mismatches.len().min(10)]
    );
}

#[test]
fn criterion_2_fig1_fixture() {
    let g = fig1_instance();
    let (greedy, thresholds) = solve_serial_greedy(&g);
    let suitor = solve_bsuitor(&g, 1);
    let oracle = solve_pivot(&g, &OraclePredictor, 1).unwrap();
    let expected_thresholds = ThresholdVector(vec![
        Threshold::Key(EdgeKey::new(2.0, 0, 3)),
        Threshold::Key(EdgeKey::new(3.0, 1, 0)),
    ]);
    let raw: Vec<f64> = thresholds.iter().map(Threshold::raw_weight).collect();
    let checks = [
        ("value 28", greedy.total_weight() == 28.0),
        (
            "matched set",
            greedy.pairs() == [(0, 0), (0, 2), (1, 1), (1, 3)],
        ),
        (
            "thresholds 2 and 3",
            thresholds == expected_thresholds && raw == [2.0, 3.0],
        ),
        (
            "b-suitor agrees",
            suitor.matching == greedy && suitor.thresholds == thresholds,
        ),
        ("b-suitor 2 iterations", suitor.iterations == 2),
        ("oracle pivot agrees", oracle.matching == greedy),
        (
            "oracle pivot 0 corrections",
            oracle.correction_iterations == 0,
        ),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        2,
        failed.is_empty(),
        &format!(
            "value {}, thresholds {raw:?}, b-suitor {} iterations, oracle {} corrections",
            greedy.total_weight(),
            suitor.iterations,
            oracle.correction_iterations
        ),
    );
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}

#[test]
fn criterion_3_approximation_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa99);
    let mut ratios = Vec::new();
    while ratios.len() < 500 {
        let ads = rng.random_range(2..=6);
        let consumers = rng.random_range(2..=10);
        let g = generate(&GeneratorConfig {
            num_ads: ads,
            num_consumers: consumers,
            degrees: DegreeDist::Uniform {
                min: 1,
                max: consumers.min(40 / ads),
            },
            weights: random_weights(&mut rng),
            capacity: random_capacity(&mut rng),
            seed: rng.random(),
        })
        .unwrap();
        assert!(g.num_edges() <= 40);
        let exact = solve_exact(&g, ExactLimits::default()).unwrap();
        let (greedy, _) = solve_serial_greedy(&g);
        ratios.push(greedy.total_weight() / exact.optimal_value);
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let pass = min >= 0.5 && mean >= 0.9;
    verdict(
        3,
        pass,
        &format!(
            "{} instances, min ratio {min:.4}, mean ratio {mean:.4}",
            ratios.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_warm_start_iterations() {
    let family = perturbed_family(100);
    let (mut at_most, mut fewer) = (0, 0);
    let (mut pivot_total, mut suitor_total) = (0, 0);
    for (base, next) in &family {
        let warm = WarmStartPredictor::new(solve_bsuitor(base, 1).thresholds);
        let pivot = solve_pivot(next, &warm, 1).unwrap();
        let suitor = solve_bsuitor(next, 1);
        assert_eq!(pivot.matching, suitor.matching);
        at_most += usize::from(pivot.correction_iterations <= suitor.iterations);
        fewer += usize::from(pivot.correction_iterations < suitor.iterations);
        pivot_total += pivot.correction_iterations;
        suitor_total += suitor.iterations;
    }
    let n = family.len();
    let pass = at_most * 10 >= n * 9 && fewer * 2 >= n;
    verdict(
        4,
        pass,
        &format!(
            "{n} pairs, warm start <= b-suitor on {at_most}, < on {fewer}; mean iterations {:.2} vs {:.2}",
            pivot_total as f64 / n as f64,
            suitor_total as f64 / n as f64
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_determinism() {
    let mut instances = equality_suite(200)
        .into_iter()
        .step_by(10)
        .collect::<Vec<_>>();
    instances.extend(perturbed_family(3).into_iter().map(|(_, next)| next));
    let dir = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    let mut runs = 0;
    for (i, g) in instances.iter().enumerate() {
        let warm =
            WarmStartPredictor::new(solve_bsuitor(&perturb(g, SIGMA_SQ, 7).unwrap(), 1).thresholds);
        let solvers: Vec<(&str, Solve)> = vec![
            (
                "bsuitor",
                Box::new(|w| {
                    let o = solve_bsuitor(g, w);
                    (o.matching, o.iterations)
                }),
            ),
            (
                "pivot-quantile",
                Box::new(|w| {
                    let o = solve_pivot(g, &QuantilePredictor, w).unwrap();
                    (o.matching, o.correction_iterations)
                }),
            ),
            (
                "pivot-warmstart",
                Box::new(|w| {
                    let o = solve_pivot(g, &warm, w).unwrap();
                    (o.matching, o.correction_iterations)
                }),
            ),
        ];
        for (name, solve) in &solvers {
            let mut seen: Option<(Vec<u8>, usize)> = None;
            for workers in [1, 2, 8] {
                for rep in 0..5 {
                    let (m, iters) = solve(workers);
                    let path = dir.path().join(format!("{i}-{name}-{workers}-{rep}.match"));
                    std::fs::write(&path, format_matching(&m)).unwrap();
                    let bytes = std::fs::read(&path).unwrap();
                    runs += 1;
                    match &seen {
                        None => seen = Some((bytes, iters)),
                        Some((b, it)) if *b == bytes && *it == iters => {}
                        Some(_) => failures
                            .push(format!("instance {i} {name} workers {workers} run {rep}")),
                    }
                }
            }
        }
    }
    verdict(
        5,
        failures.is_empty(),
        &format!(
            "{} instances, {runs} runs over workers {{1,2,8}} x 5, {} divergent",
            instances.len(),
            failures.len()
        ),
    );
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn criterion_6_oracle_zero_corrections() {
    let mut suite = vec![fig1_instance()];
    suite.extend(equality_suite(1000));
    suite.extend(perturbed_family(100).into_iter().flat_map(|(b, n)| [b, n]));
    let mut nonzero = Vec::new();
    for (i, g) in suite.iter().enumerate() {
        let out = solve_pivot(g, &OraclePredictor, 1 + i % 4).unwrap();
        if out.correction_iterations != 0 {
            nonzero.push((i, out.correction_iterations));
        }
    }
    verdict(
        6,
        nonzero.is_empty(),
        &format!(
            "{} instances, {} with corrections",
            suite.len(),
            nonzero.len()
        ),
    );
    assert!(nonzero.is_empty(), "{nonzero:?}");
}
