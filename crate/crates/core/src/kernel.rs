//! Gaussian-mixture kernel, unbiased MMD^2 estimator, the multiclass erasure
//! loss, and its analytic gradient with respect to the candidate matrix.
//!
//! The kernel is a sum of `M` Gaussians with bandwidths `alpha_i^2 * sigma^2`
//! where `sigma^2` defaults to the mean pairwise squared distance of the
//! (projected) batch. The erasure loss sums the unbiased MMD^2 estimator over
//! all pairs of concept classes; minimizing it pushes the projected
//! class-conditional distributions together.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::projector::ProjectionCandidate;

/// Bandwidth selection for the Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    /// `sigma^2` = mean pairwise squared distance of the projected batch,
    /// recomputed per batch and held constant under differentiation.
    MeanHeuristic,
    /// Fixed `sigma^2 > 0`.
    Fixed(f64),
}

/// Gaussian-mixture kernel configuration.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    alphas: Vec<f64>,
    bandwidth: Bandwidth,
}

impl Default for KernelSpec {
    /// Five components with multipliers 1/8, 1/4, 1/2, 1, 2 and the mean
    /// bandwidth heuristic.
    fn default() -> Self {
        KernelSpec {
            alphas: vec![0.125, 0.25, 0.5, 1.0, 2.0],
            bandwidth: Bandwidth::MeanHeuristic,
        }
    }
}

impl KernelSpec {
    pub fn new(alphas: Vec<f64>, bandwidth: Bandwidth) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Invalid(
                "kernel mixture needs at least one component".into(),
            ));
        }
        if let Some(bad) = alphas.iter().find(|&&a| !a.is_finite() || a <= 0.0) {
            return Err(Error::Invalid(format!(
                "bandwidth multiplier {bad} must be positive"
            )));
        }
        if let Bandwidth::Fixed(s2) = bandwidth {
            if !s2.is_finite() || s2 <= 0.0 {
                return Err(Error::Invalid(format!(
                    "fixed sigma^2 = {s2} must be positive"
                )));
            }
        }
        Ok(KernelSpec { alphas, bandwidth })
    }

    /// Number of mixture components.
    pub fn m(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn bandwidth(&self) -> &Bandwidth {
        &self.bandwidth
    }

    /// Mixture value at squared distance `d2`.
    fn eval_d2(&self, d2: f64, sigma2: f64) -> f64 {
        self.alphas
            .iter()
            .map(|&a| (-d2 / (2.0 * a * a * sigma2)).exp())
            .sum()
    }

    /// Derivative of the mixture with respect to the squared distance.
    fn eval_d2_prime(&self, d2: f64, sigma2: f64) -> f64 {
        self.alphas
            .iter()
            .map(|&a| {
                let denom = 2.0 * a * a * sigma2;
                -(-d2 / denom).exp() / denom
            })
            .sum()
    }

    /// Resolves the batch bandwidth for already-projected rows.
    fn resolve_sigma2(&self, projected: ArrayView2<'_, f64>) -> Result<f64> {
        match self.bandwidth {
            Bandwidth::Fixed(s2) => Ok(s2),
            Bandwidth::MeanHeuristic => mean_bandwidth(projected),
        }
    }
}

/// Mean pairwise squared distance over all distinct ordered pairs:
/// `sigma^2 = sum_{x != x'} ||x - x'||^2 / (n^2 - n)`.
///
/// Fails for `n < 2` and for degenerate batches (all rows identical), where
/// the heuristic bandwidth would be zero.
pub fn mean_bandwidth(x: ArrayView2<'_, f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Invalid(format!(
            "bandwidth heuristic needs at least 2 samples, got {n}"
        )));
    }
    // sum_{a,b} ||x_a - x_b||^2 = 2 n sum_a ||x_a||^2 - 2 ||sum_a x_a||^2
    let mut sum_sq = 0.0;
    for row in x.rows() {
        sum_sq += row.dot(&row);
    }
    let total = x.sum_axis(Axis(0));
    let pair_sum = 2.0 * (n as f64) * sum_sq - 2.0 * total.dot(&total);
    let sigma2 = pair_sum / ((n * n - n) as f64);
    let scale = sum_sq / n as f64;
    if sigma2 <= 1e-12 * scale {
        return Err(Error::Numerical(
            "degenerate batch: all samples identical, kernel bandwidth undefined".into(),
        ));
    }
    Ok(sigma2)
}

/// Mixture kernel value between two vectors at bandwidth `sigma^2`.
pub fn kernel_value(
    spec: &KernelSpec,
    sigma2: f64,
    x: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
) -> f64 {
    let mut d2 = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        let delta = a - b;
        d2 += delta * delta;
    }
    spec.eval_d2(d2, sigma2)
}

/// Squared-distance matrix between rows of `a` and rows of `b` via the
/// expanded form, clamped at zero.
fn squared_distances(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let a_norms: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
    let b_norms: Vec<f64> = b.rows().into_iter().map(|r| r.dot(&r)).collect();
    let cross = a.dot(&b.t());
    let mut d2 = Array2::<f64>::zeros((a.nrows(), b.nrows()));
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            d2[[i, j]] = (a_norms[i] + b_norms[j] - 2.0 * cross[[i, j]]).max(0.0);
        }
    }
    d2
}

/// Unbiased estimator of MMD^2 between the samples `a` (n1 rows) and `b`
/// (n2 rows), both already living in the space the kernel acts on.
///
/// The estimator excludes same-index pairs in the within-sample terms and
/// may be negative. Symmetric in its sample arguments.
pub fn mmd2_unbiased(
    spec: &KernelSpec,
    sigma2: f64,
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
) -> Result<f64> {
    let n1 = a.nrows();
    let n2 = b.nrows();
    if n1 < 2 || n2 < 2 {
        return Err(Error::Invalid(format!(
            "insufficient samples for unbiased estimate: n1 = {n1}, n2 = {n2} (need >= 2 each)"
        )));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::Invalid(format!(
            "sample dimensions differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }

    let daa = squared_distances(a, a);
    let dbb = squared_distances(b, b);
    let dab = squared_distances(a, b);

    let mut within_a = 0.0;
    for i in 0..n1 {
        for j in (i + 1)..n1 {
            within_a += spec.eval_d2(daa[[i, j]], sigma2);
        }
    }
    let mut within_b = 0.0;
    for i in 0..n2 {
        for j in (i + 1)..n2 {
            within_b += spec.eval_d2(dbb[[i, j]], sigma2);
        }
    }
    let mut cross = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            cross += spec.eval_d2(dab[[i, j]], sigma2);
        }
    }

    Ok(2.0 * within_a / ((n1 * (n1 - 1)) as f64)
        + 2.0 * within_b / ((n2 * (n2 - 1)) as f64)
        - 2.0 * cross / ((n1 * n2) as f64))
}

/// Value of the erasure loss on a batch, with bookkeeping about skipped
/// class pairs.
#[derive(Debug, Clone)]
pub struct ErasureEval {
    /// Sum of pairwise unbiased MMD^2 over evaluated class pairs.
    pub mmd: f64,
    /// Bandwidth actually used.
    pub sigma2: f64,
    /// Class pairs skipped because one side had fewer than 2 batch samples.
    pub skipped_pairs: usize,
    /// Class pairs that entered the sum.
    pub evaluated_pairs: usize,
}

fn class_rows(z: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut rows = vec![Vec::new(); k];
    for (i, &zi) in z.iter().enumerate() {
        rows[zi].push(i);
    }
    rows
}

/// Sum of pairwise unbiased MMD^2 between the class-conditional samples of a
/// batch after projecting through `U U^T`.
///
/// The bandwidth is resolved on the projected batch (all classes pooled).
/// Class pairs in which either class has fewer than two batch samples are
/// skipped and counted; if no pair can be evaluated the batch is an error.
pub fn erasure_loss(
    spec: &KernelSpec,
    candidate: &ProjectionCandidate,
    x: ArrayView2<'_, f64>,
    z: &[usize],
    k: usize,
) -> Result<ErasureEval> {
    if x.nrows() != z.len() {
        return Err(Error::Invalid(format!(
            "{} rows vs {} labels",
            x.nrows(),
            z.len()
        )));
    }
    if x.ncols() != candidate.d() {
        return Err(Error::Invalid(format!(
            "candidate acts on R^{}, batch rows have dimension {}",
            candidate.d(),
            x.ncols()
        )));
    }
    let u = candidate.u();
    let projected = x.dot(u).dot(&u.t());
    let sigma2 = spec.resolve_sigma2(projected.view())?;

    let rows = class_rows(z, k);
    let mut mmd = 0.0;
    let mut skipped = 0usize;
    let mut evaluated = 0usize;
    for i in 0..k {
        for j in (i + 1)..k {
            if rows[i].len() < 2 || rows[j].len() < 2 {
                skipped += 1;
                continue;
            }
            let a = projected.select(Axis(0), &rows[i]);
            let b = projected.select(Axis(0), &rows[j]);
            mmd += mmd2_unbiased(spec, sigma2, a.view(), b.view())?;
            evaluated += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::Invalid(
            "erasure loss needs at least two classes with >= 2 batch samples".into(),
        ));
    }
    Ok(ErasureEval {
        mmd,
        sigma2,
        skipped_pairs: skipped,
        evaluated_pairs: evaluated,
    })
}

/// Loss and gradient of `gamma * L_p(U) + L_MMD(U)` on a batch.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss_p: f64,
    pub loss_mmd: f64,
    pub total: f64,
    pub grad: Array2<f64>,
    pub sigma2: f64,
    pub skipped_pairs: usize,
}

/// Analytic gradient of the combined objective with respect to every entry
/// of the candidate matrix, treating the heuristic bandwidth as a constant.
///
/// Each kernel term depends on `U` through `s = ||U U^T (x - x')||^2` with
/// `ds/dU = 2 (delta delta^T U U^T + U U^T delta delta^T) U`; summed over
/// weighted pairs this collapses to matrix products through the graph
/// Laplacian of the pair-weight matrix. The penalty contributes
/// `4 gamma U (U^T U - I)`.
pub fn loss_and_grad(
    spec: &KernelSpec,
    candidate: &ProjectionCandidate,
    x: ArrayView2<'_, f64>,
    z: &[usize],
    k: usize,
    gamma: f64,
) -> Result<LossGrad> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::Invalid(format!("gamma = {gamma} must be positive")));
    }
    if x.nrows() != z.len() {
        return Err(Error::Invalid(format!(
            "{} rows vs {} labels",
            x.nrows(),
            z.len()
        )));
    }
    if x.ncols() != candidate.d() {
        return Err(Error::Invalid(format!(
            "candidate acts on R^{}, batch rows have dimension {}",
            candidate.d(),
            x.ncols()
        )));
    }

    let n = x.nrows();
    let u = candidate.u();
    let gram = u.t().dot(u); // r x r
    let y = x.dot(u); // n x r, reduced coordinates
    let projected = y.dot(&u.t()); // n x d, rows U U^T x_i
    let sigma2 = spec.resolve_sigma2(projected.view())?;
    let d2 = squared_distances(projected.view(), projected.view());

    // Pair weights of the summed unbiased estimators: W is symmetric with
    // zero diagonal; the ordered-pair sum of W_ab k(s_ab) is the erasure loss.
    let rows = class_rows(z, k);
    let mut w = Array2::<f64>::zeros((n, n));
    let mut skipped = 0usize;
    let mut evaluated = 0usize;
    for i in 0..k {
        for j in (i + 1)..k {
            let (ni, nj) = (rows[i].len(), rows[j].len());
            if ni < 2 || nj < 2 {
                skipped += 1;
                continue;
            }
            evaluated += 1;
            let wi = 1.0 / ((ni * (ni - 1)) as f64);
            for &a in &rows[i] {
                for &b in &rows[i] {
                    if a != b {
                        w[[a, b]] += wi;
                    }
                }
            }
            let wj = 1.0 / ((nj * (nj - 1)) as f64);
            for &a in &rows[j] {
                for &b in &rows[j] {
                    if a != b {
                        w[[a, b]] += wj;
                    }
                }
            }
            let wc = -1.0 / ((ni * nj) as f64);
            for &a in &rows[i] {
                for &b in &rows[j] {
                    w[[a, b]] += wc;
                    w[[b, a]] += wc;
                }
            }
        }
    }
    if evaluated == 0 {
        return Err(Error::Invalid(
            "erasure loss needs at least two classes with >= 2 batch samples".into(),
        ));
    }

    // Loss over unordered pairs (factor 2 restores the ordered sum) and the
    // kernel-derivative weights V_ab = W_ab * k'(s_ab).
    let mut loss_mmd = 0.0;
    let mut v = Array2::<f64>::zeros((n, n));
    for a in 0..n {
        for b in (a + 1)..n {
            let wab = w[[a, b]];
            if wab == 0.0 {
                continue;
            }
            loss_mmd += 2.0 * wab * spec.eval_d2(d2[[a, b]], sigma2);
            let vab = wab * spec.eval_d2_prime(d2[[a, b]], sigma2);
            v[[a, b]] = vab;
            v[[b, a]] = vab;
        }
    }

    // Graph Laplacian L = diag(V 1) - V, so that
    //   grad L_MMD = 4 X^T L Y G + 4 U Y^T L Y.
    let row_sums = v.sum_axis(Axis(1));
    let mut lap = -v;
    for a in 0..n {
        lap[[a, a]] += row_sums[a];
    }
    let ly = lap.dot(&y); // n x r
    let xt_ly = x.t().dot(&ly); // d x r
    let yt_ly = y.t().dot(&ly); // r x r
    let grad_mmd = xt_ly.dot(&gram).mapv(|g| 4.0 * g) + u.dot(&yt_ly).mapv(|g| 4.0 * g);

    // Penalty: L_p = ||G - I||_F^2, grad = 4 U (G - I).
    let r = candidate.r();
    let eye = Array2::<f64>::eye(r);
    let gram_minus_i = &gram - &eye;
    let loss_p: f64 = gram_minus_i.iter().map(|g| g * g).sum();
    let grad_p = u.dot(&gram_minus_i).mapv(|g| 4.0 * gamma * g);

    let grad = grad_mmd + grad_p;
    let total = gamma * loss_p + loss_mmd;
    Ok(LossGrad {
        loss_p,
        loss_mmd,
        total,
        grad,
        sigma2,
        skipped_pairs: skipped,
    })
}
