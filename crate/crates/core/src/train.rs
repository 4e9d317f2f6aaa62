//! Training loops: Adam on the combined objective over stratified
//! minibatches, with the standard (one-stage) and cascaded (linear stage
//! first) variants.
//!
//! Runs are bit-reproducible for a fixed seed: all shuffling flows from one
//! seeded generator and every reduction has a fixed order.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{Array, ArrayView2, Axis, Dimension, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{loss_and_grad, KernelSpec};
use crate::linear::{factor, fit_linear_eraser};
use crate::projector::{snap_to_projector, ProjectionCandidate, Projector};

/// Classic Adam constants; weight decay stays zero so it cannot fight the
/// projection penalty.
#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam state over one parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam<D: Dimension> {
    m: Array<f64, D>,
    v: Array<f64, D>,
    t: i32,
    params: AdamParams,
}

impl<D: Dimension> Adam<D> {
    pub fn new(dim: D, params: AdamParams) -> Self {
        Adam {
            m: Array::zeros(dim.clone()),
            v: Array::zeros(dim),
            t: 0,
            params,
        }
    }

    pub fn step(&mut self, param: &mut Array<f64, D>, grad: &Array<f64, D>, lr: f64) {
        self.t += 1;
        let p = self.params;
        let bc1 = 1.0 - p.beta1.powi(self.t);
        let bc2 = 1.0 - p.beta2.powi(self.t);
        Zip::from(param)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|w, m, v, &g| {
                let g = g + p.weight_decay * *w;
                *m = p.beta1 * *m + (1.0 - p.beta1) * g;
                *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + p.epsilon);
            });
    }
}

/// Batch size per optimization step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    /// One batch per epoch holding the whole dataset.
    Full,
    Fixed(usize),
}

/// Configuration of a training run. `gamma = gamma_c / rank^2`.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub rank: usize,
    pub gamma_c: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch: BatchSize,
    pub seed: u64,
    pub stratified: bool,
    pub kernel: KernelSpec,
    pub adam: AdamParams,
}

impl TrainConfig {
    pub fn new(rank: usize) -> Self {
        TrainConfig {
            rank,
            gamma_c: 100.0,
            epochs: 100,
            lr: 1e-3,
            batch: BatchSize::Full,
            seed: 0,
            stratified: true,
            kernel: KernelSpec::default(),
            adam: AdamParams::default(),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_c / (self.rank * self.rank) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Invalid("rank must be at least 1".into()));
        }
        if !self.gamma_c.is_finite() || self.gamma_c <= 0.0 {
            return Err(Error::Invalid(format!(
                "gamma coefficient {} must be positive",
                self.gamma_c
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Invalid("epoch count must be at least 1".into()));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::Invalid(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if let BatchSize::Fixed(b) = self.batch {
            if b < 4 {
                return Err(Error::Invalid(format!(
                    "batch size {b} is too small for the pairwise estimator (need >= 4)"
                )));
            }
        }
        Ok(())
    }
}

/// Loss components averaged over the batches of one epoch.
#[derive(Debug, Clone, Copy)]
pub struct EpochLoss {
    pub loss_p: f64,
    pub loss_mmd: f64,
    pub total: f64,
}

/// Outcome bookkeeping of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// One entry per epoch.
    pub trace: Vec<EpochLoss>,
    /// Projection penalty of the last iterate, before the snap.
    pub final_loss_p: f64,
    /// Total number of class pairs skipped across all steps.
    pub skipped_pairs: usize,
    pub wall: Duration,
}

impl TrainReport {
    /// Writes the loss trace as `epoch,loss_p,loss_mmd,loss_total`.
    pub fn write_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("epoch,loss_p,loss_mmd,loss_total\n");
        for (i, e) in self.trace.iter().enumerate() {
            writeln!(out, "{},{},{},{}", i + 1, e.loss_p, e.loss_mmd, e.total).unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Splits each epoch into batches whose class composition tracks the
/// dataset's proportions within one sample per class. Largest-remainder
/// allocation with carry keeps the cumulative quota aligned.
fn stratified_batches(
    rng: &mut ChaCha8Rng,
    z: &[usize],
    k: usize,
    batch_size: usize,
) -> Vec<Vec<usize>> {
    let n = z.len();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &zi) in z.iter().enumerate() {
        per_class[zi].push(i);
    }
    for list in per_class.iter_mut() {
        list.shuffle(rng);
    }

    let num_batches = n.div_ceil(batch_size);
    let counts: Vec<usize> = per_class.iter().map(|l| l.len()).collect();
    let props: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();

    let mut taken = vec![0usize; k];
    let mut carry = vec![0.0f64; k];
    let mut batches = Vec::with_capacity(num_batches);
    for b in 0..num_batches {
        // Batch sizes from the cumulative quota of n over num_batches.
        let size = (n * (b + 1)) / num_batches - (n * b) / num_batches;
        let mut alloc = vec![0usize; k];
        if b + 1 == num_batches {
            for j in 0..k {
                alloc[j] = counts[j] - taken[j];
            }
        } else {
            let mut fracs: Vec<(f64, usize)> = Vec::with_capacity(k);
            let mut assigned = 0usize;
            for j in 0..k {
                let target = size as f64 * props[j] + carry[j];
                let whole = (target.floor().max(0.0) as usize).min(counts[j] - taken[j]);
                alloc[j] = whole;
                assigned += whole;
                fracs.push((target - whole as f64, j));
            }
            fracs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let mut leftover = size.saturating_sub(assigned);
            while leftover > 0 {
                let mut progressed = false;
                for &(_, j) in &fracs {
                    if leftover == 0 {
                        break;
                    }
                    if taken[j] + alloc[j] < counts[j] {
                        alloc[j] += 1;
                        leftover -= 1;
                        progressed = true;
                    }
                }
                if !progressed {
                    break;
                }
            }
            for j in 0..k {
                carry[j] = size as f64 * props[j] + carry[j] - alloc[j] as f64;
            }
        }
        let mut batch = Vec::with_capacity(size);
        for j in 0..k {
            batch.extend_from_slice(&per_class[j][taken[j]..taken[j] + alloc[j]]);
            taken[j] += alloc[j];
        }
        batches.push(batch);
    }
    batches
}

fn plain_batches(rng: &mut ChaCha8Rng, n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// Core optimization loop shared by both training modes. The rank may go up
/// to the full dimension of `x`; mode-specific bounds are enforced by the
/// callers.
fn optimize_candidate(
    x: ArrayView2<'_, f64>,
    z: &[usize],
    k: usize,
    cfg: &TrainConfig,
) -> Result<(ProjectionCandidate, Vec<EpochLoss>, usize)> {
    let (n, d) = x.dim();
    if cfg.rank > d {
        return Err(Error::Invalid(format!(
            "rank {} exceeds the dimension {d} of the training space",
            cfg.rank
        )));
    }
    let gamma = cfg.gamma();
    let mut candidate = ProjectionCandidate::truncated_identity(d, cfg.rank)?;
    let mut adam = Adam::new(candidate.u().raw_dim(), cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let batch_size = match cfg.batch {
        BatchSize::Full => n,
        BatchSize::Fixed(b) => b.min(n),
    };
    // The learning rate drops by 10x after the first half of the epochs.
    let drop_at = cfg.epochs.div_ceil(2);

    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut skipped_total = 0usize;
    for epoch in 1..=cfg.epochs {
        let lr = if epoch <= drop_at { cfg.lr } else { cfg.lr / 10.0 };
        let batches = if batch_size >= n {
            vec![(0..n).collect::<Vec<usize>>()]
        } else if cfg.stratified {
            stratified_batches(&mut rng, z, k, batch_size)
        } else {
            plain_batches(&mut rng, n, batch_size)
        };

        let mut sums = EpochLoss {
            loss_p: 0.0,
            loss_mmd: 0.0,
            total: 0.0,
        };
        for idx in &batches {
            let xb = x.select(Axis(0), idx);
            let zb: Vec<usize> = idx.iter().map(|&i| z[i]).collect();
            let out = loss_and_grad(&cfg.kernel, &candidate, xb.view(), &zb, k, gamma)?;
            if !out.total.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch} (loss_p = {}, loss_mmd = {})",
                    out.loss_p, out.loss_mmd
                )));
            }
            skipped_total += out.skipped_pairs;
            adam.step(candidate.u_mut(), &out.grad, lr);
            sums.loss_p += out.loss_p;
            sums.loss_mmd += out.loss_mmd;
            sums.total += out.total;
        }
        let nb = batches.len() as f64;
        trace.push(EpochLoss {
            loss_p: sums.loss_p / nb,
            loss_mmd: sums.loss_mmd / nb,
            total: sums.total / nb,
        });
    }
    Ok((candidate, trace, skipped_total))
}

fn check_common(data: &Dataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if data.k() < 2 {
        return Err(Error::Invalid(format!(
            "training needs at least 2 concept classes, got {}",
            data.k()
        )));
    }
    if let Some(small) = data.class_counts().iter().position(|&c| c < 2) {
        return Err(Error::Invalid(format!(
            "concept class {small} has fewer than 2 samples"
        )));
    }
    Ok(())
}

/// One-stage training: Adam on `gamma L_p + L_MMD` from a truncated-identity
/// start, snapped to the nearest rank-`r` projector at the end.
pub fn train_standard(data: &Dataset, cfg: &TrainConfig) -> Result<(Projector, TrainReport)> {
    check_common(data, cfg)?;
    let d = data.d();
    if cfg.rank >= d {
        return Err(Error::Invalid(if cfg.rank == d {
            format!("rank {d} leaves nothing to remove (r must be < d)")
        } else {
            format!("rank {} exceeds the embedding dimension {d}", cfg.rank)
        }));
    }
    let start = Instant::now();
    let (candidate, trace, skipped) = optimize_candidate(data.x(), data.z(), data.k(), cfg)?;
    let final_loss_p = crate::projector::projection_loss(&candidate);
    let projector = snap_to_projector(&candidate)?;
    Ok((
        projector,
        TrainReport {
            trace,
            final_loss_p,
            skipped_pairs: skipped,
            wall: start.elapsed(),
        },
    ))
}

/// Two-stage training: the closed-form linear eraser first, then the
/// one-stage optimizer inside its image, composed into a single rank-`r`
/// projector `U_L P' U_L^T`.
pub fn train_cascaded(data: &Dataset, cfg: &TrainConfig) -> Result<(Projector, TrainReport)> {
    check_common(data, cfg)?;
    let (d, k) = (data.d(), data.k());
    let max_rank = d - k + 1;
    if cfg.rank > max_rank {
        return Err(Error::Invalid(format!(
            "rank {} exceeds d - K + 1 = {max_rank} available after the linear stage",
            cfg.rank
        )));
    }
    let start = Instant::now();
    let linear = fit_linear_eraser(data)?;
    let u_l = factor(&linear);
    let reduced = data.x().dot(u_l);
    let (candidate, trace, skipped) =
        optimize_candidate(reduced.view(), data.z(), data.k(), cfg)?;
    let final_loss_p = crate::projector::projection_loss(&candidate);
    let inner = snap_to_projector(&candidate)?;
    let projector = Projector::new(u_l.dot(inner.basis()))?;
    Ok((
        projector,
        TrainReport {
            trace,
            final_loss_p,
            skipped_pairs: skipped,
            wall: start.elapsed(),
        },
    ))
}
