//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`). Oracles (naive estimator sums,
//! finite differences, brute-force neighbors) are implemented here,
//! independent of the library code paths they check.
//!
//! Stated runtime bounds are asserted with wall-clock checks.

use std::process::Command;
use std::time::Instant;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use projerase::linalg::{frobenius, thin_svd};
use projerase::{
    default_mdl_schedule, demographic_parity, fit_linear_eraser, gen_linear_concept,
    gen_nonlinear_concept, loss_and_grad, mdl_online, mean_bandwidth, mmd2_unbiased,
    neighborhood_overlap, probe_accuracy, projection_loss, similarity_spearman, snap_to_projector,
    tpr_gaps, train_cascaded, train_probe, train_standard, Bandwidth, BatchSize, Dataset,
    KernelSpec, ProbeConfig, ProbeKind, ProjectionCandidate, Projector, SimilarityPair,
    TrainConfig,
};

fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal))
}

fn heldout_probe(ds: &Dataset, labels: &[usize], cfg: &ProbeConfig) -> f64 {
    let n = ds.n();
    let cut = 3 * n / 4;
    let train: Vec<usize> = (0..cut).collect();
    let test: Vec<usize> = (cut..n).collect();
    let k = 1 + labels.iter().max().unwrap();
    let xt = ds.x().select(Axis(0), &train);
    let lt: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let xe = ds.x().select(Axis(0), &test);
    let le: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let model = train_probe(xt.view(), &lt, k, cfg).unwrap();
    probe_accuracy(&model, xe.view(), &le).unwrap()
}

fn erased(ds: &Dataset, p: &Projector) -> Dataset {
    ds.with_coordinates(p.apply(ds.x()).unwrap()).unwrap()
}

#[test]
fn acceptance_01_gradient_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..20 {
        let d = 2 + (rng.random::<u32>() % 7) as usize;
        let r = 1 + (rng.random::<u32>() as usize % 4.min(d));
        let k = 2 + (trial % 2);
        let n = (2 * k).max(6 + (rng.random::<u32>() % 7) as usize);
        let x = random_rows(&mut rng, n, d);
        let z: Vec<usize> = (0..n).map(|i| i % k).collect();
        let gamma = 0.5 + rng.random::<f64>();
        let mut candidate = ProjectionCandidate::new(random_rows(&mut rng, d, r)).unwrap();
        candidate.u_mut().mapv_inplace(|v| 0.7 * v);

        // Freeze the heuristic bandwidth so the comparison differentiates
        // exactly what the analytic gradient differentiates.
        let spec = KernelSpec::default();
        let probe = loss_and_grad(&spec, &candidate, x.view(), &z, k, gamma).unwrap();
        let frozen =
            KernelSpec::new(spec.alphas().to_vec(), Bandwidth::Fixed(probe.sigma2)).unwrap();
        let out = loss_and_grad(&frozen, &candidate, x.view(), &z, k, gamma).unwrap();
        assert!(out.loss_p > 0.0 && out.loss_mmd.abs() > 0.0);

        let step = 1e-5;
        for i in 0..d {
            for j in 0..r {
                let mut up = candidate.clone();
                up.u_mut()[[i, j]] += step;
                let mut down = candidate.clone();
                down.u_mut()[[i, j]] -= step;
                let fu = loss_and_grad(&frozen, &up, x.view(), &z, k, gamma).unwrap().total;
                let fd = loss_and_grad(&frozen, &down, x.view(), &z, k, gamma)
                    .unwrap()
                    .total;
                let numeric = (fu - fd) / (2.0 * step);
                let rel = (out.grad[[i, j]] - numeric).abs() / numeric.abs().max(1e-10);
                assert!(
                    rel <= 1e-5,
                    "trial {trial} ({i},{j}): analytic {} vs fd {numeric}, rel {rel}",
                    out.grad[[i, j]]
                );
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, bound 10 s");
    println!("criterion 1 (gradient correctness, 20 instances, <10 s): PASS ({elapsed:?})");
}

/// Literal triple sum with direct subtraction distances.
fn mmd2_naive(
    spec: &KernelSpec,
    sigma2: f64,
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
) -> f64 {
    let k = |p: ArrayView1<'_, f64>, q: ArrayView1<'_, f64>| {
        let d2: f64 = p.iter().zip(q.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        spec.alphas()
            .iter()
            .map(|&al| (-d2 / (2.0 * al * al * sigma2)).exp())
            .sum::<f64>()
    };
    let (n1, n2) = (a.nrows(), b.nrows());
    let mut t1 = 0.0;
    for i in 0..n1 {
        for j in 0..n1 {
            if i != j {
                t1 += k(a.row(i), a.row(j));
            }
        }
    }
    let mut t2 = 0.0;
    for i in 0..n2 {
        for j in 0..n2 {
            if i != j {
                t2 += k(b.row(i), b.row(j));
            }
        }
    }
    let mut t3 = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            t3 += k(a.row(i), b.row(j));
        }
    }
    t1 / ((n1 * (n1 - 1)) as f64) + t2 / ((n2 * (n2 - 1)) as f64) - 2.0 * t3 / ((n1 * n2) as f64)
}

#[test]
fn acceptance_02_mmd_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let spec = KernelSpec::default();
    for _ in 0..100 {
        let n1 = 2 + (rng.random::<u32>() % 15) as usize;
        let n2 = 2 + (rng.random::<u32>() % 15) as usize;
        let d = 1 + (rng.random::<u32>() % 6) as usize;
        let a = random_rows(&mut rng, n1, d);
        let b = random_rows(&mut rng, n2, d);
        let pooled = ndarray::concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
        let sigma2 = mean_bandwidth(pooled.view()).unwrap();
        let fast = mmd2_unbiased(&spec, sigma2, a.view(), b.view()).unwrap();
        let naive = mmd2_naive(&spec, sigma2, a.view(), b.view());
        assert!((fast - naive).abs() <= 1e-12, "{fast} vs {naive}");
    }

    // Worked example: A = {0, 1}, B = {2, 3}, single kernel, sigma^2 = 1.
    let single = KernelSpec::new(vec![1.0], Bandwidth::Fixed(1.0)).unwrap();
    let a = ndarray::arr2(&[[0.0], [1.0]]);
    let b = ndarray::arr2(&[[2.0], [3.0]]);
    let oracle = mmd2_naive(&single, 1.0, a.view(), b.view());
    let value = mmd2_unbiased(&single, 1.0, a.view(), b.view()).unwrap();
    assert!((value - oracle).abs() <= 1e-12);
    assert!((value - 0.76890).abs() <= 1e-4, "worked example gave {value}");
    println!("criterion 2 (MMD oracle equivalence, 100 instances + worked example): PASS");
}

#[test]
fn acceptance_03_snap_distance_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut checked = 0;
    while checked < 50 {
        let d = 2 + (rng.random::<u32>() % 9) as usize;
        let r = 1 + (rng.random::<u32>() as usize % d.min(5));
        let candidate = ProjectionCandidate::new(random_rows(&mut rng, d, r)).unwrap();
        let Ok(p) = snap_to_projector(&candidate) else {
            continue; // rank-deficient draw
        };
        let loss = projection_loss(&candidate);
        let uut = candidate.u().dot(&candidate.u().t());
        let dist = frobenius(&(&uut - &p.matrix()).view()).powi(2);
        let rel = (dist - loss).abs() / loss.max(1e-12);
        assert!(rel <= 1e-8, "relative gap {rel} at d={d}, r={r}");
        checked += 1;
    }
    println!("criterion 3 (snap distance equals projection penalty, 50 instances): PASS");
}

#[test]
fn acceptance_04_trained_projector_validity() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut runs: Vec<(Projector, usize)> = Vec::new();

    let linear = gen_linear_concept(600, 7, 2, 3.0, 41).unwrap();
    let ring = gen_nonlinear_concept(600, 7, 42).unwrap();
    for (data, rank, cascaded) in [
        (&linear, 4usize, false),
        (&linear, 5, true),
        (&ring, 3, false),
        (&ring, 5, true),
    ] {
        let mut cfg = TrainConfig::new(rank);
        cfg.epochs = 30;
        cfg.lr = 5e-3;
        cfg.batch = BatchSize::Fixed(200);
        cfg.seed = 17;
        let (p, _) = if cascaded {
            train_cascaded(data, &cfg).unwrap()
        } else {
            train_standard(data, &cfg).unwrap()
        };
        runs.push((p, rank));
    }

    for (p, rank) in &runs {
        let basis = p.basis();
        let gram = basis.t().dot(basis);
        let eye = Array2::<f64>::eye(p.rank());
        assert!(frobenius(&(&gram - &eye).view()) <= 1e-10);

        let pm = p.matrix();
        assert!(frobenius(&(&pm.dot(&pm) - &pm).view()) <= 1e-9);

        let svd = thin_svd(pm.view()).unwrap();
        let spectral_rank = svd.s.iter().filter(|&&s| s > 0.5).count();
        assert_eq!(spectral_rank, *rank);

        for _ in 0..100 {
            let a = random_rows(&mut rng, 1, p.d());
            let b = random_rows(&mut rng, 1, p.d());
            let pa = p.apply(a.view()).unwrap();
            let pb = p.apply(b.view()).unwrap();
            let orig = frobenius(&(&a - &b).view());
            let proj = frobenius(&(&pa - &pb).view());
            assert!(proj <= orig + 1e-9, "distance expanded: {proj} > {orig}");
        }
    }
    println!("criterion 4 (projector validity for both training modes): PASS");
}

#[test]
fn acceptance_05_linear_erasure_guarantee() {
    let start = Instant::now();
    let ds = gen_linear_concept(2000, 8, 2, 4.0, 0).unwrap();
    let p = fit_linear_eraser(&ds).unwrap();
    let after = erased(&ds, &p);

    // Projected class means agree with the grand mean, relative to the data
    // magnitude.
    let x = after.x();
    let grand = x.mean_axis(Axis(0)).unwrap();
    let counts = after.class_counts();
    let mut worst = 0.0f64;
    for (c, &count) in counts.iter().enumerate() {
        let mut mean = vec![0.0; after.d()];
        for (i, &zi) in after.z().iter().enumerate() {
            if zi == c {
                for j in 0..after.d() {
                    mean[j] += x[[i, j]];
                }
            }
        }
        for j in 0..after.d() {
            worst = worst.max((mean[j] / count as f64 - grand[j]).abs());
        }
    }
    let magnitude = ds.x().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(
        worst / magnitude.max(1.0) <= 1e-8,
        "relative mean gap {}",
        worst / magnitude.max(1.0)
    );

    // The concept is not predictable from the erased embeddings: probe
    // trained on the erased data, evaluated on an independent erased draw.
    let cfg = ProbeConfig {
        kind: ProbeKind::Linear,
        epochs: 100,
        ..ProbeConfig::default()
    };
    let model = train_probe(after.x(), after.z(), 2, &cfg).unwrap();
    let fresh = gen_linear_concept(2000, 8, 2, 4.0, 1000).unwrap();
    let fresh_erased = erased(&fresh, &p);
    let acc = probe_accuracy(&model, fresh_erased.x(), fresh_erased.z()).unwrap();
    assert!(
        (acc - 0.5).abs() <= 0.03,
        "logistic probe after linear erasure: {acc}"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, bound 30 s");
    println!(
        "criterion 5 (linear-erasure guarantee, probe at {acc:.4}, <30 s): PASS ({elapsed:?})"
    );
}

fn cascade(ds: &Dataset, rank: usize) -> Projector {
    let mut cfg = TrainConfig::new(rank);
    cfg.epochs = 150;
    cfg.lr = 1e-2;
    cfg.batch = BatchSize::Fixed(512);
    cfg.seed = 3;
    train_cascaded(ds, &cfg).unwrap().0
}

#[test]
fn acceptance_06_nonlinear_erasure_end_to_end() {
    let start = Instant::now();
    let ds = gen_nonlinear_concept(4000, 8, 7).unwrap();
    let probe_cfg = ProbeConfig::default();

    let pre = heldout_probe(&ds, ds.z(), &probe_cfg);
    assert!(pre >= 0.90, "pre-erasure mlp probe {pre}");

    let linear_only = erased(&ds, &fit_linear_eraser(&ds).unwrap());
    let lin_acc = heldout_probe(&linear_only, linear_only.z(), &probe_cfg);
    assert!(lin_acc >= 0.85, "mlp probe after linear stage alone {lin_acc}");

    let full = erased(&ds, &cascade(&ds, 5));
    let post = heldout_probe(&full, full.z(), &probe_cfg);
    assert!(post <= 0.60, "mlp probe after cascaded erasure {post}");

    let task = heldout_probe(&full, full.y().unwrap(), &probe_cfg);
    assert!(task >= 0.85, "task probe after erasure {task}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}, bound 5 min");
    println!(
        "criterion 6 (nonlinear erasure: pre {pre:.3}, linear-only {lin_acc:.3}, \
         erased {post:.3}, task {task:.3}, <5 min): PASS ({elapsed:?})"
    );
}

#[test]
fn acceptance_07_erasure_monotonic_in_rank() {
    let ds = gen_nonlinear_concept(4000, 8, 7).unwrap();
    let probe_cfg = ProbeConfig::default();
    let mdl_cfg = ProbeConfig {
        epochs: 60,
        ..ProbeConfig::default()
    };

    let mut accs = Vec::new();
    let mut mdls = Vec::new();
    for rank in [7usize, 5, 3] {
        let after = erased(&ds, &cascade(&ds, rank));
        accs.push(heldout_probe(&after, after.z(), &probe_cfg));
        let schedule = default_mdl_schedule(after.n(), 2);
        mdls.push(
            mdl_online(after.x(), after.z(), 2, &mdl_cfg, &schedule)
                .unwrap()
                .bits,
        );
    }
    for w in accs.windows(2) {
        assert!(
            w[1] <= w[0] + 0.02,
            "probe accuracy rose with stronger erasure: {accs:?}"
        );
    }
    for w in mdls.windows(2) {
        assert!(w[1] >= w[0], "mdl decreased with stronger erasure: {mdls:?}");
    }
    println!(
        "criterion 7 (rank monotonicity: acc {accs:?}, mdl {mdls:?}): PASS"
    );
}

#[test]
fn acceptance_08_mdl_sanity() {
    // Random labels: within 10% of N log2 K.
    let n = 2048;
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let x = random_rows(&mut rng, n, 4);
    let z: Vec<usize> = (0..n).map(|_| (rng.random::<u32>() % 2) as usize).collect();
    let cfg = ProbeConfig {
        epochs: 40,
        ..ProbeConfig::default()
    };
    let schedule = default_mdl_schedule(n, 2);
    let report = mdl_online(x.view(), &z, 2, &cfg, &schedule).unwrap();
    assert!(
        (report.bits - 2048.0).abs() <= 0.10 * 2048.0,
        "random labels cost {} bits",
        report.bits
    );

    // Degenerate one-block schedule: exactly N log2 K.
    let one_block = mdl_online(x.view(), &z, 2, &cfg, &[n]).unwrap();
    assert_eq!(one_block.bits, 2048.0);
    println!(
        "criterion 8 (MDL sanity: random {:.1} bits, degenerate {} bits): PASS",
        report.bits, one_block.bits
    );
}

#[test]
fn acceptance_09_metric_unit_checks() {
    // A_k reflexivity, exact.
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let x = random_rows(&mut rng, 64, 5);
    assert_eq!(neighborhood_overlap(x.view(), x.view(), 32).unwrap(), 1.0);

    // A_k against an O(N^2) brute force at N = 64.
    let mut xp = x.clone();
    for i in 0..64 {
        for j in 3..5 {
            xp[[i, j]] = 0.0;
        }
    }
    let fast = neighborhood_overlap(x.view(), xp.view(), 32).unwrap();
    let slow = {
        let knn = |m: &Array2<f64>, i: usize| -> Vec<usize> {
            let mut d: Vec<(f64, usize)> = (0..64)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = &m.row(i) - &m.row(j);
                    (diff.dot(&diff), j)
                })
                .collect();
            d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            d[..32].iter().map(|&(_, j)| j).collect()
        };
        let mut total = 0.0;
        for i in 0..64 {
            let a = knn(&x, i);
            let b = knn(&xp, i);
            total += a.iter().filter(|j| b.contains(j)).count() as f64 / 32.0;
        }
        total / 64.0
    };
    assert!((fast - slow).abs() <= 1e-12);

    // Hand-computed fairness values, exact.
    let mut y_true = vec![0; 20];
    let mut y_pred = Vec::new();
    let mut group = Vec::new();
    for j in 0..10 {
        y_pred.push(if j < 9 { 0 } else { 1 });
        group.push(1);
    }
    for j in 0..10 {
        y_pred.push(if j < 6 { 0 } else { 1 });
        group.push(0);
    }
    y_true.extend(vec![1; 10]);
    for _ in 0..5 {
        y_pred.push(1);
        group.push(1);
    }
    for j in 0..5 {
        y_pred.push(if j < 3 { 1 } else { 0 });
        group.push(0);
    }
    let gaps = tpr_gaps(&y_true, &y_pred, &group).unwrap();
    assert_eq!(gaps.per_label[0].gap, Some(0.9 - 0.6));
    assert_eq!(gaps.per_label[1].gap, Some(1.0 - 0.6));
    assert!((gaps.rms - (0.125f64).sqrt()).abs() < 1e-15);

    let dp = demographic_parity(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap();
    assert_eq!(dp, 2.0);

    // Spearman monotone cases return exactly +/-1.
    let emb = ndarray::arr2(&[[1.0, 0.0], [0.8, 0.6], [0.0, 1.0], [-1.0, 0.0]]);
    let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    let ds = Dataset::new(ids, emb, vec![0, 1, 0, 1], None).unwrap();
    let make = |scores: [f64; 3]| -> Vec<SimilarityPair> {
        [("a", "b"), ("a", "c"), ("a", "d")]
            .iter()
            .zip(scores.iter())
            .map(|(&(p, q), &s)| SimilarityPair {
                id1: p.into(),
                id2: q.into(),
                score: s,
            })
            .collect()
    };
    assert_eq!(similarity_spearman(&ds, &make([3.0, 2.0, 1.0])).unwrap(), 1.0);
    assert_eq!(
        similarity_spearman(&ds, &make([1.0, 2.0, 3.0])).unwrap(),
        -1.0
    );
    println!("criterion 9 (metric unit checks): PASS");
}

#[test]
fn acceptance_10_cli_pipeline_determinism() {
    let bin = env!("CARGO_BIN_EXE_projerase");
    let dir = tempfile::tempdir().unwrap();

    let run_pipeline = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let base = dir.path().join(tag);
        std::fs::create_dir_all(&base).unwrap();
        let p = |name: &str| base.join(name).to_str().unwrap().to_string();
        let steps: Vec<Vec<String>> = vec![
            vec![
                "generate", "--kind", "nonlinear", "--n", "500", "--d", "6", "--seed", "7",
                "--out", &p("data.csv"),
            ],
            vec![
                "train", "--mode", "cascaded", "--rank", "3", "--epochs", "15", "--batch", "128",
                "--lr", "0.01", "--seed", "5", "--data", &p("data.csv"), "--out-projector",
                &p("eraser.proj"), "--out-trace", &p("trace.csv"),
            ],
            vec![
                "erase", "--data", &p("data.csv"), "--projector", &p("eraser.proj"), "--out",
                &p("erased.csv"),
            ],
            vec![
                "probe", "--data", &p("erased.csv"), "--target", "z", "--epochs", "25", "--seed",
                "2", "--out", &p("probe.csv"),
            ],
            vec![
                "mdl", "--data", &p("erased.csv"), "--epochs", "8", "--seed", "2", "--out",
                &p("mdl.csv"),
            ],
            vec![
                "overlap", "--original", &p("data.csv"), "--erased", &p("erased.csv"), "--k",
                "50", "--out", &p("overlap.csv"),
            ],
            vec![
                "downstream", "--data", &p("erased.csv"), "--epochs", "25", "--seed", "2",
                "--out-predictions", &p("preds.csv"), "--out", &p("task.csv"),
            ],
            vec![
                "fairness", "--predictions", &p("preds.csv"), "--out", &p("fair.csv"),
            ],
            vec!["pca-dump", "--data", &p("erased.csv"), "--out", &p("pca.csv")],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(|s| s.to_string()).collect())
        .collect();

        for step in &steps {
            let out = Command::new(bin).args(step).output().expect("spawn");
            assert!(
                out.status.success(),
                "step {:?} failed: {}",
                step,
                String::from_utf8_lossy(&out.stderr)
            );
        }

        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&base)
            .unwrap()
            .map(|e| {
                let path = e.unwrap().path();
                (
                    path.file_name().unwrap().to_str().unwrap().to_string(),
                    std::fs::read(&path).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };

    let first = run_pipeline("run1");
    let second = run_pipeline("run2");
    assert_eq!(first.len(), second.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(second.iter()) {
        assert_eq!(name_a, name_b);
        assert_eq!(
            bytes_a, bytes_b,
            "{name_a} differs between identically-seeded runs"
        );
    }
    assert!(first.len() >= 10);
    println!(
        "criterion 10 (CLI pipeline determinism over {} output files): PASS",
        first.len()
    );
}
