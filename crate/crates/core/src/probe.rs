//! Post-hoc classifiers ("probes") used to measure how recoverable a concept
//! is, plus minimum description length via prequential online coding.
//!
//! Probes are either multinomial logistic regression or a one-hidden-layer
//! ReLU MLP, trained with Adam on cross-entropy. Training is deterministic
//! per seed.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::train::{Adam, AdamParams};

/// Probe family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    /// Multinomial logistic regression.
    Linear,
    /// One hidden ReLU layer of configurable width.
    Mlp,
}

/// Probe training configuration.
#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub kind: ProbeKind,
    /// Hidden width, MLP only.
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            kind: ProbeKind::Mlp,
            hidden: 64,
            lr: 1e-2,
            epochs: 200,
            batch: 128,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn linear() -> Self {
        ProbeConfig {
            kind: ProbeKind::Linear,
            ..ProbeConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kind == ProbeKind::Mlp && self.hidden == 0 {
            return Err(Error::Invalid("mlp hidden width must be at least 1".into()));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 || self.epochs == 0 || self.batch == 0 {
            return Err(Error::Invalid(
                "probe needs positive lr, epochs, and batch size".into(),
            ));
        }
        Ok(())
    }
}

/// Trained classifier exposing class-probability prediction.
#[derive(Debug, Clone)]
pub struct ProbeModel {
    pub(crate) w1: Option<Array2<f64>>,
    pub(crate) b1: Option<Array1<f64>>,
    pub(crate) w2: Array2<f64>,
    pub(crate) b2: Array1<f64>,
    pub(crate) input_dim: usize,
    pub(crate) num_classes: usize,
}

impl ProbeModel {
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match (&self.w1, &self.b1) {
            (Some(w1), Some(b1)) => {
                let mut h = x.dot(w1);
                for mut row in h.rows_mut() {
                    row += b1;
                    row.mapv_inplace(|v| v.max(0.0));
                }
                let mut out = h.dot(&self.w2);
                for mut row in out.rows_mut() {
                    row += &self.b2;
                }
                out
            }
            _ => {
                let mut out = x.dot(&self.w2);
                for mut row in out.rows_mut() {
                    row += &self.b2;
                }
                out
            }
        }
    }

    /// Class probabilities per row.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::Invalid(format!(
                "probe expects dimension {}, rows have {}",
                self.input_dim,
                x.ncols()
            )));
        }
        let mut logits = self.logits(x);
        softmax_rows(&mut logits);
        Ok(logits)
    }

    /// Top-1 class per row; probability ties resolve to the lowest index.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let proba = self.predict_proba(x)?;
        Ok(proba
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0usize;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Trains a probe on `(x, labels)` by minimizing cross-entropy with Adam.
///
/// `num_classes` fixes the output arity (labels must lie below it); training
/// requires at least two distinct labels to be present.
pub fn train_probe(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    cfg: &ProbeConfig,
) -> Result<ProbeModel> {
    cfg.validate()?;
    let n = x.nrows();
    let d = x.ncols();
    if labels.len() != n {
        return Err(Error::Invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            n
        )));
    }
    if n == 0 {
        return Err(Error::Invalid("cannot train a probe on no data".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Invalid(format!(
            "label {bad} out of range 0..{num_classes}"
        )));
    }
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Err(Error::Invalid(
            "probe training needs at least two distinct labels".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut w1, mut b1, mut w2, mut b2) = match cfg.kind {
        ProbeKind::Mlp => {
            let h = cfg.hidden;
            let std1 = (2.0 / d as f64).sqrt();
            let std2 = (2.0 / (h + num_classes) as f64).sqrt();
            let n1 = Normal::new(0.0, std1).unwrap();
            let n2 = Normal::new(0.0, std2).unwrap();
            (
                Some(Array2::from_shape_fn((d, h), |_| n1.sample(&mut rng))),
                Some(Array1::<f64>::zeros(h)),
                Array2::from_shape_fn((h, num_classes), |_| n2.sample(&mut rng)),
                Array1::<f64>::zeros(num_classes),
            )
        }
        ProbeKind::Linear => {
            let std = (1.0 / d as f64).sqrt();
            let dist = Normal::new(0.0, std).unwrap();
            (
                None,
                None,
                Array2::from_shape_fn((d, num_classes), |_| dist.sample(&mut rng)),
                Array1::<f64>::zeros(num_classes),
            )
        }
    };

    let adam_params = AdamParams::default();
    let mut opt_w1 = w1.as_ref().map(|w| Adam::new(w.raw_dim(), adam_params));
    let mut opt_b1 = b1.as_ref().map(|b| Adam::new(b.raw_dim(), adam_params));
    let mut opt_w2 = Adam::new(w2.raw_dim(), adam_params);
    let mut opt_b2 = Adam::new(b2.raw_dim(), adam_params);

    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let xb = x.select(Axis(0), chunk);
            let m = chunk.len() as f64;

            // Forward.
            let (h_opt, mut probs) = match (&w1, &b1) {
                (Some(w1m), Some(b1m)) => {
                    let mut h = xb.dot(w1m);
                    for mut row in h.rows_mut() {
                        row += b1m;
                        row.mapv_inplace(|v| v.max(0.0));
                    }
                    let mut logits = h.dot(&w2);
                    for mut row in logits.rows_mut() {
                        row += &b2;
                    }
                    (Some(h), logits)
                }
                _ => {
                    let mut logits = xb.dot(&w2);
                    for mut row in logits.rows_mut() {
                        row += &b2;
                    }
                    (None, logits)
                }
            };
            softmax_rows(&mut probs);

            // d(loss)/d(logits) for mean cross-entropy.
            let mut dlogits = probs;
            for (row_i, &orig) in chunk.iter().enumerate() {
                dlogits[[row_i, labels[orig]]] -= 1.0;
            }
            dlogits.mapv_inplace(|v| v / m);

            match (&mut w1, &mut b1, h_opt) {
                (Some(w1m), Some(b1m), Some(h)) => {
                    let dw2 = h.t().dot(&dlogits);
                    let db2 = dlogits.sum_axis(Axis(0));
                    let mut dh = dlogits.dot(&w2.t());
                    ndarray::Zip::from(&mut dh).and(&h).for_each(|g, &hv| {
                        if hv <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    let dw1 = xb.t().dot(&dh);
                    let db1 = dh.sum_axis(Axis(0));
                    opt_w2.step(&mut w2, &dw2, cfg.lr);
                    opt_b2.step(&mut b2, &db2, cfg.lr);
                    opt_w1.as_mut().unwrap().step(w1m, &dw1, cfg.lr);
                    opt_b1.as_mut().unwrap().step(b1m, &db1, cfg.lr);
                }
                _ => {
                    let dw2 = xb.t().dot(&dlogits);
                    let db2 = dlogits.sum_axis(Axis(0));
                    opt_w2.step(&mut w2, &dw2, cfg.lr);
                    opt_b2.step(&mut b2, &db2, cfg.lr);
                }
            }
        }
    }

    Ok(ProbeModel {
        w1,
        b1,
        w2,
        b2,
        input_dim: d,
        num_classes,
    })
}

/// Top-1 accuracy of a trained probe.
pub fn probe_accuracy(model: &ProbeModel, x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    if labels.len() != x.nrows() {
        return Err(Error::Invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            x.nrows()
        )));
    }
    let pred = model.predict(x)?;
    let hits = pred
        .iter()
        .zip(labels.iter())
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Codelength accounting for one block of the online code.
#[derive(Debug, Clone)]
pub struct MdlBlock {
    /// Training prefix length for this block's probe.
    pub prefix: usize,
    /// Samples coded in this block.
    pub size: usize,
    pub model_bits: f64,
    pub uniform_bits: f64,
    /// Whether the uniform fallback was cheaper (or the probe untrainable).
    pub used_uniform: bool,
}

/// Prequential online-coding result, in bits.
#[derive(Debug, Clone)]
pub struct MdlReport {
    pub bits: f64,
    pub blocks: Vec<MdlBlock>,
}

impl MdlReport {
    pub fn kbits(&self) -> f64 {
        self.bits / 1000.0
    }
}

/// Default block schedule: geometric doubling from
/// `t_1 = max(2K, ceil(0.001 N))` up to `N`.
pub fn default_mdl_schedule(n: usize, num_classes: usize) -> Vec<usize> {
    let t1 = (2 * num_classes).max(n.div_ceil(1000)).max(1);
    if t1 >= n {
        return vec![n];
    }
    let mut schedule = vec![t1];
    let mut t = t1;
    while t < n {
        t = (2 * t).min(n);
        schedule.push(t);
    }
    schedule
}

/// Minimum description length of `labels` given `x` under prequential
/// online coding.
///
/// The first `t_1` samples of a seed-fixed shuffle are paid at the uniform
/// rate `log2 K`; each subsequent block `(t_i, t_{i+1}]` is coded by a probe
/// trained on the first `t_i` samples, with probabilities clamped to
/// `[1e-12, 1]`. Per block the code is `min(model, uniform) + 1` signalling
/// bit, so adversarial blocks cost at most one bit over uniform. The
/// degenerate schedule `[N]` prices everything at the uniform rate exactly.
pub fn mdl_online(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    cfg: &ProbeConfig,
    schedule: &[usize],
) -> Result<MdlReport> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::Invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            n
        )));
    }
    if num_classes < 2 {
        return Err(Error::Invalid("mdl needs at least 2 classes".into()));
    }
    if n < 2 * num_classes {
        return Err(Error::Invalid(format!(
            "mdl needs at least 2K = {} samples, got {n}",
            2 * num_classes
        )));
    }
    if schedule.is_empty() {
        return Err(Error::Invalid("empty mdl schedule".into()));
    }
    if schedule[0] == 0 {
        return Err(Error::Invalid("schedule entries must be positive".into()));
    }
    for w in schedule.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Invalid(format!(
                "schedule must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if *schedule.last().unwrap() > n {
        return Err(Error::Invalid(format!(
            "schedule reaches {} but the dataset has {n} samples",
            schedule.last().unwrap()
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order.shuffle(&mut rng);

    let log2k = (num_classes as f64).log2();
    let mut bits = schedule[0] as f64 * log2k;
    let mut blocks = Vec::new();

    for (i, w) in schedule.windows(2).enumerate() {
        let (t_start, t_end) = (w[0], w[1]);
        let train_idx = &order[..t_start];
        let block_idx = &order[t_start..t_end];
        let size = block_idx.len();
        let uniform_bits = size as f64 * log2k;

        let train_x = x.select(Axis(0), train_idx);
        let train_labels: Vec<usize> = train_idx.iter().map(|&j| labels[j]).collect();
        let trainable = train_labels.iter().any(|&l| l != train_labels[0]);

        let model_bits = if trainable {
            let mut block_cfg = cfg.clone();
            block_cfg.seed = cfg
                .seed
                .wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let model = train_probe(train_x.view(), &train_labels, num_classes, &block_cfg)?;
            let block_x = x.select(Axis(0), block_idx);
            let proba = model.predict_proba(block_x.view())?;
            let mut acc = 0.0;
            for (row_i, &j) in block_idx.iter().enumerate() {
                let p = proba[[row_i, labels[j]]].clamp(1e-12, 1.0);
                acc -= p.log2();
            }
            acc
        } else {
            f64::INFINITY
        };

        // Infinite model_bits (untrainable prefix) also selects uniform.
        let used_uniform = model_bits >= uniform_bits || model_bits.is_nan();
        bits += model_bits.min(uniform_bits) + 1.0;
        blocks.push(MdlBlock {
            prefix: t_start,
            size,
            model_bits,
            uniform_bits,
            used_uniform,
        });
    }

    Ok(MdlReport { bits, blocks })
}
