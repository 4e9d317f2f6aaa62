//! Evaluation metrics: local-geometry preservation (k-NN overlap), semantic
//! similarity correlation, and downstream fairness gaps.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView2;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Average overlap of the k-nearest-neighbor sets of matching rows in `x`
/// and `xp`, in `[0, 1]`.
///
/// Neighbors by Euclidean distance, self excluded, distance ties broken by
/// the lower row index. `1.0` means the local neighborhood structure is
/// perfectly preserved.
pub fn neighborhood_overlap(
    x: ArrayView2<'_, f64>,
    xp: ArrayView2<'_, f64>,
    k: usize,
) -> Result<f64> {
    let n = x.nrows();
    if xp.nrows() != n {
        return Err(Error::Invalid(format!(
            "row counts differ: {n} vs {}",
            xp.nrows()
        )));
    }
    if n < 2 {
        return Err(Error::Invalid("need at least 2 rows".into()));
    }
    if k == 0 || k > n - 1 {
        return Err(Error::Invalid(format!(
            "k = {k} out of range 1..={}",
            n - 1
        )));
    }

    let knn_a = knn_sets(x, k);
    let knn_b = knn_sets(xp, k);
    let mut total = 0.0;
    for i in 0..n {
        let mut a = knn_a[i].clone();
        let mut b = knn_b[i].clone();
        a.sort_unstable();
        b.sort_unstable();
        let mut shared = 0usize;
        let (mut ia, mut ib) = (0usize, 0usize);
        while ia < a.len() && ib < b.len() {
            match a[ia].cmp(&b[ib]) {
                std::cmp::Ordering::Less => ia += 1,
                std::cmp::Ordering::Greater => ib += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    ia += 1;
                    ib += 1;
                }
            }
        }
        total += shared as f64 / k as f64;
    }
    Ok(total / n as f64)
}

/// Exact k-NN per row, O(N^2) with row-blocked distance evaluation.
fn knn_sets(x: ArrayView2<'_, f64>, k: usize) -> Vec<Vec<usize>> {
    const BLOCK: usize = 256;
    let n = x.nrows();
    let norms: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut result = Vec::with_capacity(n);
    for block_start in (0..n).step_by(BLOCK) {
        let block_end = (block_start + BLOCK).min(n);
        let block = x.slice(ndarray::s![block_start..block_end, ..]);
        let cross = block.dot(&x.t()); // (block, n)
        for bi in 0..(block_end - block_start) {
            let i = block_start + bi;
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d2 = (norms[i] + norms[j] - 2.0 * cross[[bi, j]]).max(0.0);
                    (d2, j)
                })
                .collect();
            cand.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            result.push(cand[..k].iter().map(|&(_, j)| j).collect());
        }
    }
    result
}

/// A similarity-benchmark pair: two sample ids and a human rating.
#[derive(Debug, Clone)]
pub struct SimilarityPair {
    pub id1: String,
    pub id2: String,
    pub score: f64,
}

/// Reads a `id1,id2,score` CSV (header required).
pub fn load_similarity_pairs(path: impl AsRef<Path>) -> Result<Vec<SimilarityPair>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line.trim() != "id1,id2,score" {
                return Err(Error::parse(path, 1, "expected header id1,id2,score"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("expected 3 columns, got {}", fields.len()),
            ));
        }
        let score: f64 = fields[2].trim().parse().map_err(|_| {
            Error::parse(path, idx + 1, format!("score {:?} is not a number", fields[2]))
        })?;
        pairs.push(SimilarityPair {
            id1: fields[0].to_string(),
            id2: fields[1].to_string(),
            score,
        });
    }
    Ok(pairs)
}

/// Spearman rank correlation between per-pair cosine similarities of the
/// embeddings and the human scores, with average-rank tie handling.
pub fn similarity_spearman(data: &Dataset, pairs: &[SimilarityPair]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 similarity pairs, got {}",
            pairs.len()
        )));
    }
    let index = data.id_index();
    let missing: Vec<&str> = pairs
        .iter()
        .flat_map(|p| [p.id1.as_str(), p.id2.as_str()])
        .filter(|id| !index.contains_key(id))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Invalid(format!(
            "unknown ids in similarity pairs: {}",
            missing.join(", ")
        )));
    }

    let x = data.x();
    let mut model_scores = Vec::with_capacity(pairs.len());
    for p in pairs {
        let a = x.row(index[p.id1.as_str()]);
        let b = x.row(index[p.id2.as_str()]);
        let na = a.dot(&a).sqrt();
        let nb = b.dot(&b).sqrt();
        if na == 0.0 || nb == 0.0 {
            return Err(Error::Numerical(format!(
                "zero-norm vector for pair ({}, {})",
                p.id1, p.id2
            )));
        }
        model_scores.push(a.dot(&b) / (na * nb));
    }
    let human_scores: Vec<f64> = pairs.iter().map(|p| p.score).collect();
    spearman(&model_scores, &human_scores)
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap().then(i.cmp(&j)));
    let mut ranks = vec![0.0; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos;
        while end + 1 < n && values[order[end + 1]] == values[order[pos]] {
            end += 1;
        }
        let mean_rank = (pos + end) as f64 / 2.0 + 1.0;
        for &idx in &order[pos..=end] {
            ranks[idx] = mean_rank;
        }
        pos = end + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Numerical(
            "correlation undefined: a score list has zero variance".into(),
        ));
    }
    // (va * vb).sqrt() rather than va.sqrt() * vb.sqrt(): identical rank
    // lists then divide out exactly, giving +/-1.0 with no rounding.
    Ok(cov / (va * vb).sqrt())
}

fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// TPR gap of one task label between the two groups.
#[derive(Debug, Clone)]
pub struct LabelGap {
    pub label: usize,
    /// `TPR(group 1) - TPR(group 0)`; `None` when a group has no true
    /// samples of this label.
    pub gap: Option<f64>,
    /// Fraction of group-1 members among true samples of this label.
    pub group1_fraction: f64,
}

/// Fairness summary of a predictions table against a binary group.
#[derive(Debug, Clone)]
pub struct TprGapReport {
    pub per_label: Vec<LabelGap>,
    /// Root mean square of the defined gaps.
    pub rms: f64,
    /// Pearson correlation between gaps and group-1 fractions over labels
    /// with defined gaps; `None` with fewer than 2 such labels or zero
    /// variance.
    pub correlation: Option<f64>,
    pub undefined_labels: Vec<usize>,
}

/// Per-label true-positive-rate gaps between two groups, their RMS, and the
/// gap/percentage correlation.
///
/// Labels with no true samples in either group have undefined TPR and are
/// excluded from the RMS and the correlation but reported as undefined.
pub fn tpr_gaps(y_true: &[usize], y_pred: &[usize], group: &[usize]) -> Result<TprGapReport> {
    let n = y_true.len();
    if y_pred.len() != n || group.len() != n {
        return Err(Error::Invalid(format!(
            "misaligned inputs: {n} true, {} pred, {} group",
            y_pred.len(),
            group.len()
        )));
    }
    if n == 0 {
        return Err(Error::Invalid("empty predictions".into()));
    }
    if let Some(&bad) = group.iter().find(|&&g| g > 1) {
        return Err(Error::Invalid(format!(
            "group labels must be binary 0/1, found {bad}"
        )));
    }

    let labels: BTreeSet<usize> = y_true.iter().copied().collect();
    let mut per_label = Vec::new();
    let mut defined = Vec::new();
    let mut undefined_labels = Vec::new();
    for &label in &labels {
        let mut support = [0usize; 2];
        let mut correct = [0usize; 2];
        let mut group1_true = 0usize;
        let mut total_true = 0usize;
        for i in 0..n {
            if y_true[i] == label {
                total_true += 1;
                if group[i] == 1 {
                    group1_true += 1;
                }
                support[group[i]] += 1;
                if y_pred[i] == label {
                    correct[group[i]] += 1;
                }
            }
        }
        let group1_fraction = group1_true as f64 / total_true as f64;
        if support[0] == 0 || support[1] == 0 {
            undefined_labels.push(label);
            per_label.push(LabelGap {
                label,
                gap: None,
                group1_fraction,
            });
            continue;
        }
        let tpr1 = correct[1] as f64 / support[1] as f64;
        let tpr0 = correct[0] as f64 / support[0] as f64;
        let gap = tpr1 - tpr0;
        defined.push((gap, group1_fraction));
        per_label.push(LabelGap {
            label,
            gap: Some(gap),
            group1_fraction,
        });
    }
    if defined.is_empty() {
        return Err(Error::Invalid(
            "no task label has support in both groups".into(),
        ));
    }

    let rms = (defined.iter().map(|(g, _)| g * g).sum::<f64>() / defined.len() as f64).sqrt();
    let correlation = if defined.len() >= 2 {
        let gaps: Vec<f64> = defined.iter().map(|&(g, _)| g).collect();
        let fracs: Vec<f64> = defined.iter().map(|&(_, f)| f).collect();
        pearson(&gaps, &fracs).ok()
    } else {
        None
    };

    Ok(TprGapReport {
        per_label,
        rms,
        correlation,
        undefined_labels,
    })
}

/// Demographic parity: total variation-style sum of per-label prediction
/// rate differences between the two groups, in `[0, 2]`.
pub fn demographic_parity(y_pred: &[usize], group: &[usize]) -> Result<f64> {
    let n = y_pred.len();
    if group.len() != n {
        return Err(Error::Invalid(format!(
            "misaligned inputs: {n} predictions, {} group labels",
            group.len()
        )));
    }
    if let Some(&bad) = group.iter().find(|&&g| g > 1) {
        return Err(Error::Invalid(format!(
            "group labels must be binary 0/1, found {bad}"
        )));
    }
    let counts = [
        group.iter().filter(|&&g| g == 0).count(),
        group.iter().filter(|&&g| g == 1).count(),
    ];
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::Invalid("a group has no samples".into()));
    }

    let labels: BTreeSet<usize> = y_pred.iter().copied().collect();
    let mut dp = 0.0;
    for &label in &labels {
        let mut hits = [0usize; 2];
        for i in 0..n {
            if y_pred[i] == label {
                hits[group[i]] += 1;
            }
        }
        dp += (hits[1] as f64 / counts[1] as f64 - hits[0] as f64 / counts[0] as f64).abs();
    }
    Ok(dp)
}

/// One row of a predictions table.
#[derive(Debug, Clone)]
pub struct PredictionRow {
    pub id: String,
    pub y_true: usize,
    pub y_pred: usize,
    pub z: usize,
}

/// Reads an `id,y_true,y_pred,z` CSV (header required).
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line.trim() != "id,y_true,y_pred,z" {
                return Err(Error::parse(path, 1, "expected header id,y_true,y_pred,z"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("expected 4 columns, got {}", fields.len()),
            ));
        }
        let parse_col = |name: &str, v: &str| -> Result<usize> {
            v.trim().parse().map_err(|_| {
                Error::parse(
                    path,
                    idx + 1,
                    format!("column {name} value {v:?} is not a non-negative integer"),
                )
            })
        };
        rows.push(PredictionRow {
            id: fields[0].to_string(),
            y_true: parse_col("y_true", fields[1])?,
            y_pred: parse_col("y_pred", fields[2])?,
            z: parse_col("z", fields[3])?,
        });
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "no prediction rows"));
    }
    Ok(rows)
}

/// Writes a predictions table in the format read by [`load_predictions`].
pub fn save_predictions(rows: &[PredictionRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("id,y_true,y_pred,z\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.id, r.y_true, r.y_pred, r.z).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn brute_force_overlap(x: &Array2<f64>, xp: &Array2<f64>, k: usize) -> f64 {
        let n = x.nrows();
        let knn = |m: &Array2<f64>, i: usize| -> Vec<usize> {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = &m.row(i) - &m.row(j);
                    (diff.dot(&diff), j)
                })
                .collect();
            d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            d[..k].iter().map(|&(_, j)| j).collect()
        };
        let mut total = 0.0;
        for i in 0..n {
            let a = knn(x, i);
            let b = knn(xp, i);
            let shared = a.iter().filter(|j| b.contains(j)).count();
            total += shared as f64 / k as f64;
        }
        total / n as f64
    }

    #[test]
    fn identical_coordinates_give_full_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let x = Array2::from_shape_fn((30, 4), |_| rng.sample::<f64, _>(StandardNormal));
        let a = neighborhood_overlap(x.view(), x.view(), 15).unwrap();
        assert_eq!(a, 1.0);
    }

    #[test]
    fn collinear_reversal_keeps_nearest_neighbors() {
        // Points 0,1,2,3 on a line; reversing the order preserves each
        // point's nearest neighbor.
        let x = arr2(&[[0.0], [1.0], [2.0], [3.0]]);
        let rev = arr2(&[[3.0], [2.0], [1.0], [0.0]]);
        assert_eq!(neighborhood_overlap(x.view(), rev.view(), 1).unwrap(), 1.0);

        // Re-pairing (0,10,1,11): nearest sets by hand are
        // x: [1, 0, 3, 2] (0-1 and 2-3 pair up), xp: [2, 3, 0, 1].
        let xp = arr2(&[[0.0], [10.0], [1.0], [11.0]]);
        assert_eq!(neighborhood_overlap(x.view(), xp.view(), 1).unwrap(), 0.0);
    }

    #[test]
    fn overlap_matches_brute_force_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let n = 40;
        let x = Array2::from_shape_fn((n, 5), |_| rng.sample::<f64, _>(StandardNormal));
        // Project onto the first two coordinates.
        let mut xp = x.clone();
        for i in 0..n {
            for j in 2..5 {
                xp[[i, j]] = 0.0;
            }
        }
        let k = n / 2;
        let fast = neighborhood_overlap(x.view(), xp.view(), k).unwrap();
        let slow = brute_force_overlap(&x, &xp, k);
        assert!((fast - slow).abs() <= 1e-12);
        assert!(fast > 0.0 && fast < 1.0);
    }

    #[test]
    fn overlap_is_isometry_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let n = 25;
        let x = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let xp = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let base = neighborhood_overlap(x.view(), xp.view(), 5).unwrap();

        // Rotate x by a rotation in the (0,1) plane and translate it.
        let theta: f64 = 0.83;
        let rot = arr2(&[
            [theta.cos(), -theta.sin(), 0.0],
            [theta.sin(), theta.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ]);
        let mut moved = x.dot(&rot);
        moved.mapv_inplace(|v| v + 7.5);
        let after = neighborhood_overlap(moved.view(), xp.view(), 5).unwrap();
        assert!((base - after).abs() <= 1e-12);
    }

    #[test]
    fn overlap_range_checks() {
        let x = arr2(&[[0.0], [1.0]]);
        assert!(neighborhood_overlap(x.view(), x.view(), 0).is_err());
        assert!(neighborhood_overlap(x.view(), x.view(), 2).is_err());
    }

    fn toy_dataset() -> Dataset {
        // Five unit-norm-ish vectors with distinct pairwise cosines.
        let x = arr2(&[
            [1.0, 0.0],
            [0.8, 0.6],
            [0.0, 1.0],
            [-0.6, 0.8],
            [-1.0, 0.0],
        ]);
        let ids = vec!["a".into(), "b".into(), "c".into(), "d".into(), "e".into()];
        Dataset::new(ids, x, vec![0, 1, 0, 1, 0], None).unwrap()
    }

    fn pair(a: &str, b: &str, s: f64) -> SimilarityPair {
        SimilarityPair {
            id1: a.into(),
            id2: b.into(),
            score: s,
        }
    }

    #[test]
    fn monotone_scores_give_unit_correlation() {
        let data = toy_dataset();
        // Cosines: (a,b) = 0.8, (a,c) = 0, (a,d) = -0.6, (a,e) = -1.
        let increasing = vec![
            pair("a", "e", 1.0),
            pair("a", "d", 2.0),
            pair("a", "c", 3.5),
            pair("a", "b", 10.0),
        ];
        assert_eq!(similarity_spearman(&data, &increasing).unwrap(), 1.0);

        let decreasing = vec![
            pair("a", "e", 4.0),
            pair("a", "d", 3.0),
            pair("a", "c", 2.0),
            pair("a", "b", 1.0),
        ];
        assert_eq!(similarity_spearman(&data, &decreasing).unwrap(), -1.0);
    }

    #[test]
    fn tied_scores_use_average_ranks() {
        let data = toy_dataset();
        // Model cosines strictly increasing:
        //   (a,e) = -1 < (a,d) = -0.6 < (a,c) = 0 < (a,b) = 0.8.
        // Human scores with a tie between the middle two pairs.
        let pairs = vec![
            pair("a", "e", 1.0),
            pair("a", "d", 2.0),
            pair("a", "c", 2.0),
            pair("a", "b", 3.0),
        ];
        // Model ranks: 1,2,3,4; human ranks: 1, 2.5, 2.5, 4.
        // Pearson of those rank lists = 0.9486832980505138 by hand.
        let rho = similarity_spearman(&data, &pairs).unwrap();
        assert!((rho - 0.948_683_298_050_513_8).abs() < 1e-12);
    }

    #[test]
    fn unknown_ids_are_listed() {
        let data = toy_dataset();
        let pairs = vec![pair("a", "nope", 1.0), pair("zz", "b", 2.0)];
        let err = similarity_spearman(&data, &pairs).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nope") && msg.contains("zz"));
    }

    #[test]
    fn zero_norm_vector_is_rejected() {
        let x = arr2(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let ids = vec!["o".into(), "u".into(), "v".into()];
        let data = Dataset::new(ids, x, vec![0, 1, 0], None).unwrap();
        let pairs = vec![pair("o", "u", 1.0), pair("u", "v", 2.0)];
        assert!(similarity_spearman(&data, &pairs).is_err());
    }

    #[test]
    fn equal_tprs_give_zero_gaps() {
        // Both groups 100% correct on both labels.
        let y_true = vec![0, 0, 1, 1];
        let y_pred = vec![0, 0, 1, 1];
        let group = vec![0, 1, 0, 1];
        let report = tpr_gaps(&y_true, &y_pred, &group).unwrap();
        assert_eq!(report.rms, 0.0);
        assert!(report.per_label.iter().all(|l| l.gap == Some(0.0)));
    }

    #[test]
    fn single_label_gap_by_hand() {
        // One label; group 1 gets 9/10 right, group 0 gets 6/10.
        let mut y_true = Vec::new();
        let mut y_pred = Vec::new();
        let mut group = Vec::new();
        for i in 0..10 {
            y_true.push(0);
            y_pred.push(if i < 9 { 0 } else { 7 });
            group.push(1);
        }
        for i in 0..10 {
            y_true.push(0);
            y_pred.push(if i < 6 { 0 } else { 7 });
            group.push(0);
        }
        let report = tpr_gaps(&y_true, &y_pred, &group).unwrap();
        let gap = report.per_label[0].gap.unwrap();
        assert!((gap - 0.3).abs() < 1e-15);
        // GAP_{c;y} = -GAP_{c';y}: flipping the group flips the sign.
        let flipped: Vec<usize> = group.iter().map(|&g| 1 - g).collect();
        let report2 = tpr_gaps(&y_true, &y_pred, &flipped).unwrap();
        assert!((report2.per_label[0].gap.unwrap() + 0.3).abs() < 1e-15);
    }

    #[test]
    fn rms_of_two_gaps_by_hand() {
        // Label 0 gap 0.3 (10 vs 10 samples), label 1 gap 0.4 (5 vs 5).
        let mut y_true = Vec::new();
        let mut y_pred = Vec::new();
        let mut group = Vec::new();
        // Label 0: group 1 9/10, group 0 6/10.
        for i in 0..10 {
            y_true.push(0);
            y_pred.push(if i < 9 { 0 } else { 1 });
            group.push(1);
        }
        for i in 0..10 {
            y_true.push(0);
            y_pred.push(if i < 6 { 0 } else { 1 });
            group.push(0);
        }
        // Label 1: group 1 5/5, group 0 3/5.
        for _ in 0..5 {
            y_true.push(1);
            y_pred.push(1);
            group.push(1);
        }
        for i in 0..5 {
            y_true.push(1);
            y_pred.push(if i < 3 { 1 } else { 0 });
            group.push(0);
        }
        let report = tpr_gaps(&y_true, &y_pred, &group).unwrap();
        let expected = ((0.09f64 + 0.16) / 2.0).sqrt();
        assert!((report.rms - expected).abs() < 1e-15);
        assert!((expected - 0.35355).abs() < 1e-4);
    }

    #[test]
    fn zero_support_labels_are_reported_not_averaged() {
        // Label 1 only occurs in group 0.
        let y_true = vec![0, 0, 0, 0, 1];
        let y_pred = vec![0, 0, 0, 0, 1];
        let group = vec![0, 1, 0, 1, 0];
        let report = tpr_gaps(&y_true, &y_pred, &group).unwrap();
        assert_eq!(report.undefined_labels, vec![1]);
        assert_eq!(report.rms, 0.0);
    }

    #[test]
    fn non_binary_group_is_rejected() {
        assert!(tpr_gaps(&[0, 0], &[0, 0], &[0, 2]).is_err());
        assert!(demographic_parity(&[0, 0], &[0, 2]).is_err());
    }

    #[test]
    fn demographic_parity_examples() {
        // Identical prediction distributions.
        let dp = demographic_parity(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(dp, 0.0);

        // Maximal disparity: group 1 always predicts 0, group 0 always 1.
        let dp = demographic_parity(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(dp, 2.0);

        // Hand-built 10-sample case.
        // Group 1 (6 samples): predictions 0,0,0,1,1,2 -> rates 1/2, 1/3, 1/6.
        // Group 0 (4 samples): predictions 0,1,1,1 -> rates 1/4, 3/4, 0.
        // DP = |1/2-1/4| + |1/3-3/4| + |1/6-0| = 1/4 + 5/12 + 1/6 = 5/6.
        let y_pred = vec![0, 0, 0, 1, 1, 2, 0, 1, 1, 1];
        let group = vec![1, 1, 1, 1, 1, 1, 0, 0, 0, 0];
        let dp = demographic_parity(&y_pred, &group).unwrap();
        assert!((dp - 5.0 / 6.0).abs() < 1e-15);

        // Symmetric under relabeling the groups.
        let flipped: Vec<usize> = group.iter().map(|&g| 1 - g).collect();
        let dp2 = demographic_parity(&y_pred, &flipped).unwrap();
        assert!((dp - dp2).abs() < 1e-15);

        // Empty group.
        assert!(demographic_parity(&[0, 1], &[1, 1]).is_err());
    }

    #[test]
    fn predictions_round_trip() {
        let rows = vec![
            PredictionRow {
                id: "a".into(),
                y_true: 1,
                y_pred: 0,
                z: 1,
            },
            PredictionRow {
                id: "b".into(),
                y_true: 0,
                y_pred: 0,
                z: 0,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.csv");
        save_predictions(&rows, &path).unwrap();
        let back = load_predictions(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].id, "a");
        assert_eq!(back[0].y_true, 1);
        assert_eq!(back[1].z, 0);
    }
}
