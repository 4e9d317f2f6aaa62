//! Closed-form linear eraser: the orthogonal projector onto the complement
//! of the span of centered class means.
//!
//! After applying it, every class-conditional mean equals the grand mean,
//! which is the condition for a concept to be unrecoverable by linear
//! predictors acting on means. Used on its own or as the first stage of
//! cascaded training.

use ndarray::{Array2, Axis};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_complement, thin_svd};
use crate::projector::Projector;

/// Relative singular-value threshold for the effective rank of the
/// centered-means span.
const SPAN_TOL: f64 = 1e-10;

/// Fits the mean-matching linear eraser.
///
/// Computes the per-class means and the grand mean, then returns the
/// orthogonal projector onto the orthogonal complement of
/// `span{mu_j - mu_bar}`. With `K` classes in general position the span has
/// rank `K - 1`, so the projector has rank `d - K + 1`. When all class
/// means coincide there is nothing to remove and the identity projector is
/// returned with a warning.
pub fn fit_linear_eraser(data: &Dataset) -> Result<Projector> {
    let k = data.k();
    let d = data.d();
    if k < 2 {
        return Err(Error::Invalid(format!(
            "linear erasure needs at least 2 concept classes, got {k}"
        )));
    }
    if d < k {
        return Err(Error::Invalid(format!(
            "embedding dimension {d} is smaller than the class count {k}"
        )));
    }

    let x = data.x();
    let grand = x.mean_axis(Axis(0)).expect("non-empty dataset");
    let counts = data.class_counts();
    let mut centered = Array2::<f64>::zeros((d, k));
    for (i, &zi) in data.z().iter().enumerate() {
        for j in 0..d {
            centered[[j, zi]] += x[[i, j]];
        }
    }
    for c in 0..k {
        for j in 0..d {
            centered[[j, c]] = centered[[j, c]] / counts[c] as f64 - grand[j];
        }
    }

    // Effective rank of the mean-difference span.
    let svd = thin_svd(centered.view())?;
    let cutoff = SPAN_TOL * svd.s[0];
    let span_rank = svd.s.iter().filter(|&&s| s > cutoff && s > 0.0).count();
    if span_rank == 0 {
        log::warn!("all class means coincide; linear eraser is the identity");
        return Ok(Projector::identity(d));
    }

    let span_basis = svd.u.slice(ndarray::s![.., 0..span_rank]);
    let complement = orthonormal_complement(span_basis)?;
    Projector::new(complement)
}

/// Semi-orthogonal factor `U_L` of a projector, `P = U_L U_L^T`.
///
/// Free given the stored representation; exposed for the cascaded pipeline.
pub fn factor(p: &Projector) -> &Array2<f64> {
    p.basis()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use ndarray::{arr2, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn dataset_from(x: Array2<f64>, z: Vec<usize>) -> Dataset {
        let ids = (0..x.nrows()).map(|i| format!("s{i}")).collect();
        Dataset::new(ids, x, z, None).unwrap()
    }

    /// Largest deviation of any projected class mean from the projected
    /// grand mean, relative to the data magnitude when that exceeds 1.
    fn mean_gap(data: &Dataset, p: &Projector) -> f64 {
        let projected = p.apply(data.x()).unwrap();
        let grand = projected.mean_axis(Axis(0)).unwrap();
        let counts = data.class_counts();
        let mut worst = 0.0f64;
        for (c, &count) in counts.iter().enumerate() {
            let mut mean = vec![0.0; data.d()];
            for (i, &zi) in data.z().iter().enumerate() {
                if zi == c {
                    for j in 0..data.d() {
                        mean[j] += projected[[i, j]];
                    }
                }
            }
            for j in 0..data.d() {
                worst = worst.max((mean[j] / count as f64 - grand[j]).abs());
            }
        }
        let magnitude = data.x().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst / magnitude.max(1.0)
    }

    #[test]
    fn two_opposed_means_give_the_coordinate_projector() {
        // mu_0 = (1, 0), mu_1 = (-1, 0): the span is e0, so P = diag(0, 1).
        let x = arr2(&[[1.0, 2.0], [1.0, -2.0], [-1.0, 1.0], [-1.0, -1.0]]);
        let data = dataset_from(x, vec![0, 0, 1, 1]);
        let p = fit_linear_eraser(&data).unwrap();
        let expected = arr2(&[[0.0, 0.0], [0.0, 1.0]]);
        assert!(frobenius(&(&p.matrix() - &expected).view()) < 1e-12);
        assert!(mean_gap(&data, &p) <= 1e-8);
    }

    #[test]
    fn coincident_means_give_the_identity() {
        let x = arr2(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]);
        let data = dataset_from(x, vec![0, 0, 1, 1]);
        let p = fit_linear_eraser(&data).unwrap();
        assert_eq!(p.rank(), 2);
        assert!(frobenius(&(&p.matrix() - &Array2::<f64>::eye(2)).view()) < 1e-12);
    }

    #[test]
    fn generic_three_class_rank() {
        // K = 3 generic means in d = 5: rank d - K + 1 = 3.
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let n = 90;
        let d = 5;
        let mut x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
        let z: Vec<usize> = (0..n).map(|i| i % 3).collect();
        for (i, &zi) in z.iter().enumerate() {
            x[[i, zi]] += 3.0 * (zi as f64 + 1.0);
            x[[i, (zi + 1) % 3]] -= 1.5;
        }
        let data = dataset_from(x, z);
        let p = fit_linear_eraser(&data).unwrap();
        assert_eq!(p.rank(), 3);
        assert!(mean_gap(&data, &p) <= 1e-8);
    }

    #[test]
    fn dimension_below_class_count_is_rejected() {
        let x = arr2(&[[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]);
        let data = dataset_from(x, vec![0, 1, 2]);
        assert!(fit_linear_eraser(&data).is_err());
    }

    #[test]
    fn factor_reconstructs_the_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 60;
        let d = 6;
        let mut x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
        let z: Vec<usize> = (0..n).map(|i| i % 2).collect();
        for (i, &zi) in z.iter().enumerate() {
            x[[i, 0]] += if zi == 0 { 2.0 } else { -2.0 };
        }
        let data = dataset_from(x, z);
        let p = fit_linear_eraser(&data).unwrap();
        let u = factor(&p);
        let gram = u.t().dot(u);
        let eye = Array2::<f64>::eye(p.rank());
        assert!(frobenius(&(&gram - &eye).view()) < 1e-10);
        let rec = u.dot(&u.t());
        assert!(frobenius(&(&rec - &p.matrix()).view()) < 1e-10);
    }

    #[test]
    fn mean_equality_on_random_datasets() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for &(n, d, k) in &[(40, 4, 2), (75, 8, 3), (120, 10, 4)] {
            let mut x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
            let z: Vec<usize> = (0..n).map(|i| i % k).collect();
            for (i, &zi) in z.iter().enumerate() {
                x[[i, zi]] += 10.0 * (zi as f64) - 3.0;
            }
            let data = dataset_from(x, z);
            let p = fit_linear_eraser(&data).unwrap();
            assert!(mean_gap(&data, &p) <= 1e-8, "gap {}", mean_gap(&data, &p));
        }
    }
}
