//! Seeded generators of datasets with known concept-encoding structure.
//!
//! Both generators attach a task label `y` that survives concept erasure, so
//! post-erasure utility is measurable. They are bit-deterministic per seed.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Concept encoded purely in class means.
///
/// Standard normal rows; class `j > 0` is shifted by `separation` along axis
/// `j - 1`, so the class means differ along the first `K - 1` axes only.
/// The task label is the sign of coordinate `K - 1`, orthogonal to every
/// concept axis. Classes are assigned round-robin, hence exactly balanced.
pub fn gen_linear_concept(
    n: usize,
    d: usize,
    k: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if d < 2 || k < 2 {
        return Err(Error::Invalid(format!(
            "need d >= 2 and K >= 2, got d = {d}, K = {k}"
        )));
    }
    if k > d {
        return Err(Error::Invalid(format!(
            "K = {k} concept classes do not fit in {d} dimensions"
        )));
    }
    if n < 2 * k {
        return Err(Error::Invalid(format!(
            "need at least 2K = {} samples, got {n}",
            2 * k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut x = Array2::<f64>::zeros((n, d));
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..d {
            x[[i, j]] = normal.sample(&mut rng);
        }
        let class = i % k;
        // Task label from the raw coordinate, before any concept shift.
        y.push(usize::from(x[[i, k - 1]] > 0.0));
        if class > 0 {
            x[[i, class - 1]] += separation;
        }
        z.push(class);
    }
    let ids = (0..n).map(|i| format!("s{i}")).collect();
    Dataset::new(ids, x, z, Some(y))
}

/// Binary concept encoded radially in coordinates 0 and 1: `z = 1` inside
/// the ring whose radii are the empirical 25% and 75% quantiles, so classes
/// are balanced and both class means coincide at the origin by symmetry.
/// Remaining coordinates are standard normal; the task label is the sign of
/// coordinate 2. The rank-(d-2) projector dropping coordinates 0 and 1 is a
/// ground-truth eraser for this dataset.
pub fn gen_nonlinear_concept(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if d < 3 {
        return Err(Error::Invalid(format!("need d >= 3, got {d}")));
    }
    if n < 8 {
        return Err(Error::Invalid(format!("need at least 8 samples, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut x = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            x[[i, j]] = normal.sample(&mut rng);
        }
    }
    let radii: Vec<f64> = (0..n)
        .map(|i| (x[[i, 0]] * x[[i, 0]] + x[[i, 1]] * x[[i, 1]]).sqrt())
        .collect();
    let mut sorted = radii.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = sorted[n / 4];
    let hi = sorted[(3 * n) / 4];

    let z: Vec<usize> = radii.iter().map(|&r| usize::from(r >= lo && r <= hi)).collect();
    let y: Vec<usize> = (0..n).map(|i| usize::from(x[[i, 2]] > 0.0)).collect();
    let ids = (0..n).map(|i| format!("s{i}")).collect();
    Dataset::new(ids, x, z, Some(y))
}
