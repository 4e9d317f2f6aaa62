//! Command handlers: thin orchestration over the library, CSV reports on
//! explicit `--out` paths, human summaries on stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use projerase::{
    default_mdl_schedule, demographic_parity, gen_linear_concept, gen_nonlinear_concept,
    load_dataset, load_predictions, load_projector, load_similarity_pairs, mdl_online,
    neighborhood_overlap, probe_accuracy, save_dataset, save_predictions, save_projector,
    similarity_spearman, tpr_gaps, train_cascaded, train_probe, train_standard, Bandwidth,
    BatchSize, Dataset, KernelSpec, PredictionRow, ProbeConfig, ProbeKind, TrainConfig,
};

use crate::args::*;
use crate::config::{resolve, resolve_required, Config};
use crate::CliError;

const DEFAULT_ALPHAS: &str = "0.125,0.25,0.5,1.0,2.0";

fn write_report(path: &Path, rows: &[(String, String)]) -> Result<(), CliError> {
    let mut out = String::from("metric,value\n");
    for (k, v) in rows {
        writeln!(out, "{k},{v}").unwrap();
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn row(key: &str, value: impl std::fmt::Display) -> (String, String) {
    (key.to_string(), value.to_string())
}

/// Seeded shuffle split into (train, test) index lists.
fn split_indices(n: usize, test_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    if !(0.0..1.0).contains(&test_frac) || test_frac <= 0.0 {
        return Err(CliError::Usage(format!(
            "--test-frac {test_frac} must lie strictly between 0 and 1"
        )));
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_test = ((n as f64) * test_frac).round().max(1.0) as usize;
    if n_test >= n {
        return Err(CliError::Usage(format!(
            "--test-frac {test_frac} leaves no training data"
        )));
    }
    let test = order.split_off(n - n_test);
    Ok((order, test))
}

fn target_labels<'d>(ds: &'d Dataset, target: &str) -> Result<(&'d [usize], usize), CliError> {
    match target {
        "z" => Ok((ds.z(), ds.k())),
        "y" => {
            let y = ds.y().ok_or_else(|| {
                CliError::Usage("--target y, but the dataset has no task labels".into())
            })?;
            let k = 1 + y.iter().max().copied().unwrap_or(0);
            Ok((y, k))
        }
        other => Err(CliError::Usage(format!(
            "--target must be z or y, got {other:?}"
        ))),
    }
}

fn parse_probe_kind(kind: &str) -> Result<ProbeKind, CliError> {
    match kind {
        "linear" => Ok(ProbeKind::Linear),
        "mlp" => Ok(ProbeKind::Mlp),
        other => Err(CliError::Usage(format!(
            "--kind must be linear or mlp, got {other:?}"
        ))),
    }
}

fn probe_config(common: &ProbeCommonArgs, config: &Config) -> Result<ProbeConfig, CliError> {
    let kind = parse_probe_kind(&resolve(
        common.kind.clone(),
        config,
        "kind",
        "mlp".to_string(),
    )?)?;
    Ok(ProbeConfig {
        kind,
        hidden: resolve(common.hidden, config, "hidden", 64)?,
        lr: resolve(common.lr, config, "lr", 1e-2)?,
        epochs: resolve(common.epochs, config, "epochs", 200)?,
        batch: resolve(common.batch, config, "batch", 128)?,
        seed: resolve(common.seed, config, "seed", 0)?,
    })
}

pub fn generate(args: GenerateArgs, config: &Config) -> Result<(), CliError> {
    let kind: String = resolve_required(args.kind, config, "kind")?;
    let n = resolve_required(args.n, config, "n")?;
    let d = resolve_required(args.d, config, "d")?;
    let seed = resolve(args.seed, config, "seed", 0)?;
    let out: PathBuf = resolve_required(args.out, config, "out")?;

    let ds = match kind.as_str() {
        "linear" => {
            let k = resolve(args.k, config, "k", 2)?;
            let separation = resolve(args.separation, config, "separation", 4.0)?;
            gen_linear_concept(n, d, k, separation, seed)?
        }
        "nonlinear" => {
            if args.k.is_some() {
                return Err(CliError::Usage(
                    "--k only applies to --kind linear (the nonlinear concept is binary)".into(),
                ));
            }
            if args.separation.is_some() {
                return Err(CliError::Usage(
                    "--separation only applies to --kind linear".into(),
                ));
            }
            gen_nonlinear_concept(n, d, seed)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "--kind must be linear or nonlinear, got {other:?}"
            )))
        }
    };
    save_dataset(&ds, &out)?;
    println!(
        "wrote {} samples (d = {}, K = {}) to {}",
        ds.n(),
        ds.d(),
        ds.k(),
        out.display()
    );
    Ok(())
}

fn parse_batch(raw: &str) -> Result<BatchSize, CliError> {
    if raw == "full" {
        Ok(BatchSize::Full)
    } else {
        raw.parse::<usize>()
            .map(BatchSize::Fixed)
            .map_err(|_| CliError::Usage(format!("--batch must be a number or `full`, got {raw:?}")))
    }
}

fn parse_alphas(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad bandwidth multiplier {s:?} in --alphas")))
        })
        .collect()
}

pub fn train(args: TrainArgs, config: &Config) -> Result<(), CliError> {
    let mode: String = resolve_required(args.mode, config, "mode")?;
    let data: PathBuf = resolve_required(args.data, config, "data")?;
    let rank = resolve_required(args.rank, config, "rank")?;
    let out_projector: PathBuf = resolve_required(args.out_projector, config, "out-projector")?;

    let alphas = parse_alphas(&resolve(
        args.alphas,
        config,
        "alphas",
        DEFAULT_ALPHAS.to_string(),
    )?)?;
    let bandwidth = match resolve(args.sigma2, config, "sigma2", f64::NAN)? {
        s2 if s2.is_nan() => Bandwidth::MeanHeuristic,
        s2 => Bandwidth::Fixed(s2),
    };
    let kernel = KernelSpec::new(alphas, bandwidth)?;

    let cfg = TrainConfig {
        rank,
        gamma_c: resolve(args.gamma_c, config, "gamma-c", 100.0)?,
        epochs: resolve(args.epochs, config, "epochs", 100)?,
        lr: resolve(args.lr, config, "lr", 1e-3)?,
        batch: parse_batch(&resolve(args.batch, config, "batch", "full".to_string())?)?,
        seed: resolve(args.seed, config, "seed", 0)?,
        stratified: !args.no_stratify,
        kernel,
        adam: Default::default(),
    };

    let ds = load_dataset(&data)?;
    let (projector, report) = match mode.as_str() {
        "standard" => train_standard(&ds, &cfg)?,
        "cascaded" => train_cascaded(&ds, &cfg)?,
        other => {
            return Err(CliError::Usage(format!(
                "--mode must be standard or cascaded, got {other:?}"
            )))
        }
    };
    save_projector(&projector, &out_projector)?;
    let out_trace: Option<PathBuf> = match args.out_trace {
        Some(p) => Some(p),
        None => config.get("out-trace")?,
    };
    if let Some(trace) = out_trace {
        report.write_trace(&trace)?;
    }
    let last = report.trace.last().expect("at least one epoch");
    println!(
        "trained {mode} rank-{} projector in {:.2?} ({} epochs, {} skipped class pairs)",
        projector.rank(),
        report.wall,
        report.trace.len(),
        report.skipped_pairs
    );
    println!("final L_p = {}", report.final_loss_p);
    println!("final L_MMD = {}", last.loss_mmd);
    println!("wrote projector to {}", out_projector.display());
    Ok(())
}

pub fn erase(args: EraseArgs, config: &Config) -> Result<(), CliError> {
    let data: PathBuf = resolve_required(args.data, config, "data")?;
    let projector: PathBuf = resolve_required(args.projector, config, "projector")?;
    let out: PathBuf = resolve_required(args.out, config, "out")?;

    let ds = load_dataset(&data)?;
    let p = load_projector(&projector)?;
    let erased = ds.with_coordinates(p.apply(ds.x())?)?;
    save_dataset(&erased, &out)?;
    println!(
        "projected {} samples through the rank-{} projector into {}",
        erased.n(),
        p.rank(),
        out.display()
    );
    Ok(())
}

pub fn probe(args: ProbeArgs, config: &Config) -> Result<(), CliError> {
    let data: PathBuf = resolve_required(args.data, config, "data")?;
    let target: String = resolve(args.target, config, "target", "z".to_string())?;
    let test_frac = resolve(args.test_frac, config, "test-frac", 0.25)?;
    let out: PathBuf = resolve_required(args.out, config, "out")?;
    let cfg = probe_config(&args.probe, config)?;

    let ds = load_dataset(&data)?;
    let (labels, k) = target_labels(&ds, &target)?;
    let (train_idx, test_idx) = split_indices(ds.n(), test_frac, cfg.seed)?;

    let xt = ds.x().select(Axis(0), &train_idx);
    let lt: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let xe = ds.x().select(Axis(0), &test_idx);
    let le: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();

    let mut probe_cfg = cfg.clone();
    probe_cfg.seed = cfg.seed.wrapping_add(0x517c_c1b7_2722_0a95);
    let model = train_probe(xt.view(), &lt, k, &probe_cfg)?;
    let train_acc = probe_accuracy(&model, xt.view(), &lt)?;
    let test_acc = probe_accuracy(&model, xe.view(), &le)?;
    let majority = {
        let mut counts = vec![0usize; k];
        for &l in &le {
            counts[l] += 1;
        }
        counts.iter().copied().max().unwrap_or(0) as f64 / le.len() as f64
    };

    write_report(
        &out,
        &[
            row("target", &target),
            row("n_train", lt.len()),
            row("n_test", le.len()),
            row("train_accuracy", train_acc),
            row("test_accuracy", test_acc),
            row("majority_rate", majority),
        ],
    )?;
    println!(
        "{target} probe: train accuracy {train_acc:.4}, test accuracy {test_acc:.4} (majority {majority:.4})"
    );
    Ok(())
}

pub fn mdl(args: MdlArgs, config: &Config) -> Result<(), CliError> {
    let data: PathBuf = resolve_required(args.data, config, "data")?;
    let target: String = resolve(args.target, config, "target", "z".to_string())?;
    let out: PathBuf = resolve_required(args.out, config, "out")?;
    let mut cfg = probe_config(&args.probe, config)?;
    if args.probe.epochs.is_none() {
        // Online coding trains one probe per block; keep the default budget
        // moderate.
        cfg.epochs = config.get("epochs")?.unwrap_or(60);
    }

    let ds = load_dataset(&data)?;
    let (labels, k) = target_labels(&ds, &target)?;
    let schedule = match resolve(args.schedule, config, "schedule", String::new())? {
        s if s.is_empty() => default_mdl_schedule(ds.n(), k),
        s => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("bad schedule entry {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?,
    };

    let report = mdl_online(ds.x(), labels, k, &cfg, &schedule)?;
    write_report(
        &out,
        &[
            row("target", &target),
            row("n", ds.n()),
            row("k", k),
            row("blocks", report.blocks.len()),
            row("mdl_bits", report.bits),
            row("mdl_kbits", report.kbits()),
        ],
    )?;
    println!(
        "mdl({target}) = {:.1} bits ({:.4} kBits) over {} blocks",
        report.bits,
        report.kbits(),
        report.blocks.len()
    );
    Ok(())
}

pub fn overlap(args: OverlapArgs, config: &Config) -> Result<(), CliError> {
    let original: PathBuf = resolve_required(args.original, config, "original")?;
    let erased: PathBuf = resolve_required(args.erased, config, "erased")?;
    let k = resolve_required(args.k, config, "k")?;
    let out: PathBuf = resolve_required(args.out, config, "out")?;

    let a = load_dataset(&original)?;
    let b = load_dataset(&erased)?;
    if a.ids() != b.ids() {
        return Err(CliError::Usage(
            "datasets are not aligned: sample ids differ".into(),
        ));
    }
    let value = neighborhood_overlap(a.x(), b.x(), k)?;
    write_report(&out, &[row("k", k), row("a_k", value)])?;
    println!("A_{k} = {value:.6}");
    Ok(())
}

pub fn similarity(args: SimilarityArgs, config: &Config) -> Result<(), CliError> {
    let data: PathBuf = resolve_required(args.data, config, "data")?;
    let pairs_path: PathBuf = resolve_required(args.pairs, config, "pairs")?;
    let out: PathBuf = resolve_required(args.out, config, "out")?;

    let ds = load_dataset(&data)?;
    let pairs = load_similarity_pairs(&pairs_path)?;
    let rho = similarity_spearman(&ds, &pairs)?;
    write_report(&out, &[row("pairs", pairs.len()), row("spearman", rho)])?;
    println!("spearman over {} pairs = {rho:.6}", pairs.len());
    Ok(())
}

pub fn downstream(args: DownstreamArgs, config: &Config) -> Result<(), CliError> {
    let data: PathBuf = resolve_required(args.data, config, "data")?;
    let test_frac = resolve(args.test_frac, config, "test-frac", 0.25)?;
    let out_predictions: PathBuf =
        resolve_required(args.out_predictions, config, "out-predictions")?;
    let cfg = probe_config(&args.probe, config)?;

    let ds = load_dataset(&data)?;
    let (labels, k) = target_labels(&ds, "y")?;
    let (train_idx, test_idx) = split_indices(ds.n(), test_frac, cfg.seed)?;

    let xt = ds.x().select(Axis(0), &train_idx);
    let lt: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let xe = ds.x().select(Axis(0), &test_idx);
    let le: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();

    let mut probe_cfg = cfg.clone();
    probe_cfg.seed = cfg.seed.wrapping_add(0x517c_c1b7_2722_0a95);
    let model = train_probe(xt.view(), &lt, k, &probe_cfg)?;
    let predictions = model.predict(xe.view())?;
    let accuracy = predictions
        .iter()
        .zip(le.iter())
        .filter(|(p, l)| p == l)
        .count() as f64
        / le.len() as f64;

    let rows: Vec<PredictionRow> = test_idx
        .iter()
        .enumerate()
        .map(|(row_i, &i)| PredictionRow {
            id: ds.ids()[i].clone(),
            y_true: labels[i],
            y_pred: predictions[row_i],
            z: ds.z()[i],
        })
        .collect();
    save_predictions(&rows, &out_predictions)?;

    if let Some(out) = args.out {
        write_report(
            &out,
            &[
                row("n_train", lt.len()),
                row("n_test", le.len()),
                row("accuracy", accuracy),
            ],
        )?;
    }
    println!(
        "task classifier: test accuracy {accuracy:.4}; wrote {} predictions to {}",
        rows.len(),
        out_predictions.display()
    );
    Ok(())
}

pub fn fairness(args: FairnessArgs, config: &Config) -> Result<(), CliError> {
    let predictions: PathBuf = resolve_required(args.predictions, config, "predictions")?;
    let out: PathBuf = resolve_required(args.out, config, "out")?;

    let rows = load_predictions(&predictions)?;
    let y_true: Vec<usize> = rows.iter().map(|r| r.y_true).collect();
    let y_pred: Vec<usize> = rows.iter().map(|r| r.y_pred).collect();
    let group: Vec<usize> = rows.iter().map(|r| r.z).collect();

    let gaps = tpr_gaps(&y_true, &y_pred, &group)?;
    let dp = demographic_parity(&y_pred, &group)?;

    let mut report = Vec::new();
    for lg in &gaps.per_label {
        let key = format!("tpr_gap_{}", lg.label);
        match lg.gap {
            Some(g) => report.push((key, g.to_string())),
            None => report.push((key, "undefined".to_string())),
        }
    }
    report.push(row("tpr_gap_rms", gaps.rms));
    match gaps.correlation {
        Some(c) => report.push(row("gap_pct_correlation", c)),
        None => report.push(row("gap_pct_correlation", "undefined")),
    }
    report.push(row("dp", dp));
    write_report(&out, &report)?;
    println!(
        "TPR-gap RMS = {:.6}, DP = {dp:.6}{}",
        gaps.rms,
        match gaps.correlation {
            Some(c) => format!(", gap/% correlation = {c:.6}"),
            None => String::new(),
        }
    );
    if !gaps.undefined_labels.is_empty() {
        println!(
            "note: labels without support in both groups were excluded: {:?}",
            gaps.undefined_labels
        );
    }
    Ok(())
}

pub fn inspect(args: InspectArgs, config: &Config) -> Result<(), CliError> {
    let projector: PathBuf = resolve_required(args.projector, config, "projector")?;
    let p = load_projector(&projector)?;

    let basis = p.basis();
    let gram = basis.t().dot(basis);
    let eye = Array2::<f64>::eye(p.rank());
    let ortho_residual = projerase::linalg::frobenius(&(&gram - &eye).view());
    let pm = p.matrix();
    let idem_residual = projerase::linalg::frobenius(&(&pm.dot(&pm) - &pm).view());
    let svd = projerase::linalg::thin_svd(basis.view())?;

    println!("projector {}", projector.display());
    println!("  d = {}, rank = {}", p.d(), p.rank());
    println!("  ||U^T U - I||_F = {ortho_residual:e}");
    println!("  ||P^2 - P||_F  = {idem_residual:e}");
    println!(
        "  singular values of U in [{}, {}]",
        svd.s[svd.s.len() - 1],
        svd.s[0]
    );

    if let Some(out) = args.out {
        let mut rows = vec![
            row("d", p.d()),
            row("rank", p.rank()),
            row("ortho_residual", ortho_residual),
            row("idempotence_residual", idem_residual),
        ];
        for (i, s) in svd.s.iter().enumerate() {
            rows.push(row(&format!("sv_{i}"), s));
        }
        write_report(&out, &rows)?;
    }
    Ok(())
}

pub fn pca_dump(args: PcaDumpArgs, config: &Config) -> Result<(), CliError> {
    let data: PathBuf = resolve_required(args.data, config, "data")?;
    let out: PathBuf = resolve_required(args.out, config, "out")?;

    let ds = load_dataset(&data)?;
    let coords = projerase::linalg::pca_top2(ds.x())?;
    let mut text = String::from("id,z,pc1,pc2\n");
    for i in 0..ds.n() {
        writeln!(
            text,
            "{},{},{},{}",
            ds.ids()[i],
            ds.z()[i],
            coords[[i, 0]],
            coords[[i, 1]]
        )
        .unwrap();
    }
    std::fs::write(&out, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote top-2 principal components for {} samples", ds.n());
    Ok(())
}
