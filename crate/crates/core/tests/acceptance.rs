//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use sevt::classify::{bayes_rate, predict};
use sevt::experiment::{run_classification, run_grid, simulate, GridSpec};
use sevt::metrics::{fisher, hellinger, kaniadakis, total_kl};
use sevt::sim::flat_dirichlet;
use sevt::{
    agglomerate, count_transitions, fit_saturated, hamming_distance, learn_bhc, learn_hclust, median, relative_bic,
    rng_stream, sample, score_bic, train, DissimilarityMatrix, EventTree, GenConfig, GenMethod, KSpec, LearnConfig,
    Linkage, Metric, Smoothing, Staging, VariableSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn table1_golden() -> Outcome {
    let m = common::example_model();
    #[rustfmt::skip]
    let table = [
        ("a", "0", "1", 0.1260), ("a", "0", "2", 0.0360), ("a", "0", "3", 0.0180),
        ("a", "1", "1", 0.0840), ("a", "1", "2", 0.0240), ("a", "1", "3", 0.0120),
        ("b", "0", "1", 0.1200), ("b", "0", "2", 0.1200), ("b", "0", "3", 0.0600),
        ("b", "1", "1", 0.0800), ("b", "1", "2", 0.0800), ("b", "1", "3", 0.0400),
        ("c", "0", "1", 0.0480), ("c", "0", "2", 0.0480), ("c", "0", "3", 0.0240),
        ("c", "1", "1", 0.0320), ("c", "1", "2", 0.0320), ("c", "1", "3", 0.0160),
    ];
    let vars = m.tree().variables();
    let mut worst: f64 = 0.0;
    for (x1, x2, x3, p) in table {
        let path = [
            vars[0].level_index(x1).unwrap(),
            vars[1].level_index(x2).unwrap(),
            vars[2].level_index(x3).unwrap(),
        ];
        worst = worst.max((m.path_probability(&path).unwrap() - p).abs());
    }
    let total: f64 = m.joint().iter().sum();
    outcome(
        worst <= 1e-12 && (total - 1.0).abs() <= 1e-12,
        format!("18 atoms, max |err| = {worst:.1e}, sum = {total}"),
    )
}

fn random_pair(s: usize, rng: &mut sevt::SimRng) -> (Vec<f64>, Vec<f64>) {
    (flat_dirichlet(s, rng), flat_dirichlet(s, rng))
}

fn metric_axioms() -> Outcome {
    let mut failures = Vec::new();
    let ln2 = std::f64::consts::LN_2;
    for s in 2..=6 {
        let mut rng = rng_stream(100, s as u64);
        for _ in 0..1000 {
            let (p, q) = random_pair(s, &mut rng);
            for metric in Metric::ALL {
                let d = metric.eval(&p, &q).unwrap();
                let back = metric.eval(&q, &p).unwrap();
                let zero = metric.eval(&p, &p).unwrap();
                if d < 0.0 || zero < 0.0 {
                    failures.push(format!("{metric} negative"));
                }
                if d != back {
                    failures.push(format!("{metric} asymmetric: {d} vs {back}"));
                }
                if zero >= 1e-12 || d < 1e-12 {
                    failures.push(format!("{metric} identity: d(p,p) = {zero}, d(p,q) = {d}"));
                }
                let bound = match metric {
                    Metric::TotalVariation | Metric::Hellinger => Some(1.0),
                    Metric::JensenShannon => Some(ln2),
                    _ => None,
                };
                if bound.is_some_and(|b| d > b) {
                    failures.push(format!("{metric} exceeds its bound: {d}"));
                }
            }
        }
        for _ in 0..1000 {
            let (p, q) = random_pair(s, &mut rng);
            let r = flat_dirichlet(s, &mut rng);
            for metric in [Metric::TotalVariation, Metric::Hellinger] {
                let pr = metric.eval(&p, &r).unwrap();
                let via = metric.eval(&p, &q).unwrap() + metric.eval(&q, &r).unwrap();
                if pr > via + 1e-15 {
                    failures.push(format!("{metric} triangle: {pr} > {via}"));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "6 metrics x 5 dimensions x 1000 pairs; 2 x 5 x 1000 triples".to_string()
        } else {
            format!("{} violations, first: {}", failures.len(), failures[0])
        },
    )
}

fn cross_identities() -> Outcome {
    let mut rng = rng_stream(200, 0);
    let mut worst_h: f64 = 0.0;
    let mut worst_k: f64 = 0.0;
    for i in 0..5000 {
        let (p, q) = random_pair(2 + i % 5, &mut rng);
        let h = hellinger(&p, &q).unwrap();
        let f = fisher(&p, &q).unwrap();
        worst_h = worst_h.max((h * h - (1.0 - (f.sqrt() / 2.0).cos())).abs());
        worst_k = worst_k.max((kaniadakis(&p, &q, 1e-3).unwrap() - total_kl(&p, &q).unwrap()).abs());
    }
    outcome(
        worst_h <= 1e-10 && worst_k <= 1e-2,
        format!("max hellinger/fisher gap {worst_h:.1e}, max kaniadakis/total KL gap {worst_k:.1e}"),
    )
}

fn random_matrix(n: usize, rng: &mut sevt::SimRng, ties: bool) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in i + 1..n {
            let v = if ties {
                rng.gen_range(1..4) as f64
            } else {
                rng.gen::<f64>()
            };
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

fn clustering_oracle() -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    for seed in 0..200u64 {
        let mut rng = rng_stream(300, seed);
        for n in 1..=7 {
            for (ties, linkages) in [
                (false, &[Linkage::Complete, Linkage::Average][..]),
                (true, &[Linkage::Complete][..]),
            ] {
                let d = random_matrix(n, &mut rng, ties);
                let matrix = DissimilarityMatrix::from_rows(d.clone()).unwrap();
                for &linkage in linkages {
                    let dendrogram = agglomerate(&matrix, linkage).unwrap();
                    let oracle = common::naive_partitions(&d, linkage);
                    for k in 1..=n {
                        checked += 1;
                        if dendrogram.cut(k).unwrap() != oracle[n - k] {
                            failures.push(format!("seed {seed} n {n} {linkage} k {k} ties {ties}"));
                        }
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        match failures.first() {
            None => format!("{checked} cuts agree with the naive oracle"),
            Some(f) => format!("{} of {checked} cuts differ, first: {f}", failures.len()),
        },
    )
}

fn hamming_oracle() -> Outcome {
    let shapes: [&[usize]; 5] = [&[2, 2, 2], &[2, 3, 2], &[3, 2, 2], &[6, 2], &[2, 2, 3]];
    let trees: Vec<EventTree> = shapes
        .iter()
        .map(|levels| {
            EventTree::new(
                levels
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| VariableSpec::new(format!("X{}", i + 1), (0..k).map(|v| v.to_string())))
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    let mut rng = rng_stream(400, 0);
    let mut failures = 0;
    for i in 0..500 {
        let tree = &trees[i % trees.len()];
        let mut draw = || {
            let labels = (0..tree.p())
                .map(|d| {
                    let m = tree.n_situations(d);
                    (0..m).map(|_| rng.gen_range(0..m)).collect()
                })
                .collect();
            Staging::new(tree, labels).unwrap()
        };
        let (a, b) = (draw(), draw());
        if hamming_distance(&a, &b).unwrap() != common::brute_hamming(&a, &b) {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("{failures} of 500 pairs differ from exhaustive search"),
    )
}

fn fit_counts(p: usize, method: GenMethod, n: usize, seed: u64) -> (Staging, EventTree, sevt::CountTable) {
    let config = GenConfig {
        p,
        levels: 2,
        method,
        seed,
    };
    let (truth, data) = simulate(&config, n).unwrap();
    let tree = truth.tree().clone();
    let counts = count_transitions(&data, &tree).unwrap();
    (truth.staging().clone(), tree, counts)
}

fn structure_recovery() -> Outcome {
    let cfg = LearnConfig {
        metric: Metric::TotalVariation,
        linkage: Linkage::WardD2,
        kspec: KSpec::fixed(2),
        alpha: Smoothing::LAPLACE,
    };
    let hds: Vec<f64> = (0..20)
        .map(|rep| {
            let (truth, tree, counts) = fit_counts(5, GenMethod::Split { k0: 2 }, 1 << 13, 5000 + rep);
            let model = learn_hclust(&counts, &tree, &cfg).unwrap();
            hamming_distance(model.staging(), &truth).unwrap() as f64
        })
        .collect();
    let med = median(&hds).unwrap();
    outcome(
        med <= 2.0,
        format!(
            "median HD to truth {med} over 20 replications (max {})",
            hds.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn bhc_parity() -> Outcome {
    let cfg = LearnConfig::default();
    let mut deltas = Vec::new();
    let mut bics = Vec::new();
    let mut saturated = Vec::new();
    for rep in 0..20 {
        let (_, tree, counts) = fit_counts(5, GenMethod::Join { q: 0.9 }, 1 << 11, 6000 + rep);
        let h = score_bic(&learn_hclust(&counts, &tree, &cfg).unwrap(), &counts).unwrap();
        let b = score_bic(&learn_bhc(&counts, &tree, cfg.alpha).unwrap(), &counts).unwrap();
        let s = score_bic(&fit_saturated(&counts, &tree, cfg.alpha).unwrap(), &counts).unwrap();
        deltas.push(relative_bic(&h, &b).unwrap());
        bics.push(h.bic);
        saturated.push(s.bic);
    }
    let md = median(&deltas).unwrap();
    let (mb, ms) = (median(&bics).unwrap(), median(&saturated).unwrap());
    outcome(
        md <= 0.05 && mb < ms,
        format!("median delta BIC vs BHC {md:.4}; median BIC {mb:.1} vs saturated {ms:.1}"),
    )
}

fn runtime_scaling() -> Outcome {
    let cfg = LearnConfig::default();
    let mut th = Vec::new();
    let mut tb = Vec::new();
    for rep in 0..10 {
        let (_, tree, counts) = fit_counts(9, GenMethod::Join { q: 0.9 }, 512, 7000 + rep);
        let start = Instant::now();
        learn_hclust(&counts, &tree, &cfg).unwrap();
        th.push(start.elapsed().as_secs_f64());
        let start = Instant::now();
        learn_bhc(&counts, &tree, cfg.alpha).unwrap();
        tb.push(start.elapsed().as_secs_f64());
    }
    let (mh, mb) = (median(&th).unwrap(), median(&tb).unwrap());
    let slowest = th.iter().cloned().fold(0.0, f64::max);
    outcome(
        mh <= mb / 10.0 && slowest < 1.0,
        format!(
            "median hclust {mh:.2e} s, median BHC {mb:.2e} s (ratio {:.1}), slowest hclust {slowest:.2e} s",
            mb / mh
        ),
    )
}

fn classifier_sanity() -> Outcome {
    let config = GenConfig {
        p: 5,
        levels: 2,
        method: GenMethod::Split { k0: 2 },
        seed: 8000,
    };
    let truth = config.model().unwrap();
    let bayes = bayes_rate(&truth);
    let train_set = sample(&truth, 1 << 13, &mut rng_stream(config.seed, 1)).unwrap();
    let test_set = sample(&truth, 1 << 11, &mut rng_stream(config.seed, 2)).unwrap();
    let cfg = LearnConfig {
        kspec: KSpec::fixed(2),
        ..LearnConfig::default()
    };
    let model = train(&train_set, "X1", &cfg).unwrap();
    let scores = sevt::evaluate(&model, &test_set).unwrap();
    let mut worst_sum: f64 = 0.0;
    for row in test_set.rows() {
        let (_, post) = predict(&model, &row[1..]).unwrap();
        worst_sum = worst_sum.max((post.iter().sum::<f64>() - 1.0).abs());
    }
    let protocol = run_classification(&[("sim".into(), train_set)], "X1", 10, 0.8, &[cfg], 1).unwrap();
    let protocol_ok = protocol.len() == 11 && protocol[10].split == "median";
    let gap = (scores.accuracy - bayes).abs();
    outcome(
        gap <= 0.02 && worst_sum <= 1e-12 && protocol_ok,
        format!(
            "accuracy {:.4} vs Bayes rate {bayes:.4} (gap {gap:.4}); max |sum posterior - 1| {worst_sum:.1e}; median 80/20 accuracy {:.4}",
            scores.accuracy, protocol[10].accuracy
        ),
    )
}

fn grid_accounting() -> Outcome {
    let mut spec = GridSpec::full_scale(1);
    spec.dry_run = true;
    let out = run_grid(&spec).unwrap();
    let mut per_dataset: BTreeMap<(usize, String, String, usize), (usize, usize)> = BTreeMap::new();
    for r in &out.rows {
        let e = per_dataset
            .entry((r.p, r.gen_method.clone(), format!("{:?}{:?}", r.q, r.k0), r.n))
            .or_default();
        if r.is_baseline() {
            e.1 += 1;
        } else {
            e.0 += 1;
        }
    }
    let bad: Vec<_> = per_dataset
        .iter()
        .filter(|((p, ..), &(l, b))| l != 48 || b != if *p <= 7 { 2 } else { 1 })
        .collect();
    outcome(
        per_dataset.len() == 48 && bad.is_empty(),
        format!(
            "{} datasets, {} rows, {} with wrong counts",
            per_dataset.len(),
            out.rows.len(),
            bad.len()
        ),
    )
}

type Criterion = (&'static str, f64, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("table1-golden", 1.0, table1_golden),
        ("metric-axioms", 10.0, metric_axioms),
        ("cross-metric-identities", f64::INFINITY, cross_identities),
        ("clustering-oracle", 30.0, clustering_oracle),
        ("hamming-oracle", 30.0, hamming_oracle),
        ("structure-recovery", 60.0, structure_recovery),
        ("bhc-parity", f64::INFINITY, bhc_parity),
        ("runtime-scaling", f64::INFINITY, runtime_scaling),
        ("classifier-sanity", f64::INFINITY, classifier_sanity),
        ("grid-accounting", f64::INFINITY, grid_accounting),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed().as_secs_f64();
        let in_time = elapsed < budget;
        let pass = result.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget_note = if budget.is_finite() {
            format!(" (budget {budget} s)")
        } else {
            String::new()
        };
        println!(
            "{} {name}: {} [{elapsed:.2} s{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
