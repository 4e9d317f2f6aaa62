//! Dense decompositions used by the projection machinery.
//!
//! Everything here is pure Rust and deterministic: one-sided Jacobi SVD for
//! the tall skinny matrices this crate produces (projection bases, centered
//! class means), a Householder construction of orthonormal complements, and
//! a cyclic Jacobi eigensolver for small symmetric matrices (PCA).

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Thin singular value decomposition `a = u * diag(s) * v^T`.
///
/// `u` is m x n with orthonormal columns (columns matching zero singular
/// values are zero), `s` is length n sorted descending, `v` is n x n
/// orthogonal.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

const JACOBI_SWEEPS: usize = 60;
const JACOBI_TOL: f64 = 1e-15;

/// One-sided Jacobi SVD of an m x n matrix with m >= n.
///
/// Iteratively orthogonalizes pairs of columns; converges to high relative
/// accuracy for the small column counts used here.
pub fn thin_svd(a: ArrayView2<'_, f64>) -> Result<Svd> {
    let (m, n) = a.dim();
    if n == 0 || m == 0 {
        return Err(Error::Invalid("svd of an empty matrix".into()));
    }
    if m < n {
        return Err(Error::Invalid(format!(
            "thin_svd expects m >= n, got {m} x {n}"
        )));
    }
    let mut w = a.to_owned();
    let mut v = Array2::<f64>::eye(n);

    for _ in 0..JACOBI_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let col_p = w.column(p);
                let col_q = w.column(q);
                let app = col_p.dot(&col_p);
                let aqq = col_q.dot(&col_q);
                let apq = col_p.dot(&col_q);
                if apq.abs() <= JACOBI_TOL * (app * aqq).sqrt() {
                    continue;
                }
                off = off.max(apq.abs() / (app * aqq).sqrt().max(f64::MIN_POSITIVE));

                // Givens rotation zeroing the (p,q) inner product.
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s_ = c * t;

                for i in 0..m {
                    let wp = w[[i, p]];
                    let wq = w[[i, q]];
                    w[[i, p]] = c * wp - s_ * wq;
                    w[[i, q]] = s_ * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[[i, p]];
                    let vq = v[[i, q]];
                    v[[i, p]] = c * vp - s_ * vq;
                    v[[i, q]] = s_ * vp + c * vq;
                }
            }
        }
        if off <= JACOBI_TOL {
            break;
        }
    }

    let mut sv: Vec<f64> = (0..n).map(|j| w.column(j).dot(&w.column(j)).sqrt()).collect();

    // Sort columns by singular value, descending; stable order for ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap().then(i.cmp(&j)));

    let mut u = Array2::<f64>::zeros((m, n));
    let mut v_sorted = Array2::<f64>::zeros((n, n));
    let mut s_sorted = Array1::<f64>::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        s_sorted[dst] = sv[src];
        if sv[src] > 0.0 {
            let col = w.column(src).mapv(|x| x / sv[src]);
            u.column_mut(dst).assign(&col);
        }
        v_sorted.column_mut(dst).assign(&v.column(src));
    }
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());

    Ok(Svd {
        u,
        s: s_sorted,
        v: v_sorted,
    })
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// `basis` (d x s, orthonormal columns). Returns a d x (d-s) matrix.
///
/// Built from the full Q factor of a Householder QR of `basis`.
pub fn orthonormal_complement(basis: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (d, s) = basis.dim();
    if s > d {
        return Err(Error::Invalid(format!(
            "complement of a {d} x {s} basis: more columns than rows"
        )));
    }
    if s == 0 {
        return Ok(Array2::eye(d));
    }

    // Householder vectors for QR of `basis`.
    let mut a = basis.to_owned();
    let mut reflectors: Vec<Array1<f64>> = Vec::with_capacity(s);
    for k in 0..s {
        let mut v = a.slice(s![k.., k]).to_owned();
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
        }
        let vtv = v.dot(&v);
        if vtv > 0.0 {
            for j in k..s {
                let col = a.slice(s![k.., j]).to_owned();
                let coeff = 2.0 * v.dot(&col) / vtv;
                let mut col_mut = a.slice_mut(s![k.., j]);
                for (i, ci) in col_mut.iter_mut().enumerate() {
                    *ci -= coeff * v[i];
                }
            }
        }
        reflectors.push(v);
    }

    // Complement columns: Q e_j for j = s..d, applying reflectors in reverse.
    let mut comp = Array2::<f64>::zeros((d, d - s));
    for (out_j, j) in (s..d).enumerate() {
        let mut q = Array1::<f64>::zeros(d);
        q[j] = 1.0;
        for k in (0..s).rev() {
            let v = &reflectors[k];
            let vtv = v.dot(v);
            if vtv > 0.0 {
                let tail = q.slice(s![k..]).to_owned();
                let coeff = 2.0 * v.dot(&tail) / vtv;
                let mut tail_mut = q.slice_mut(s![k..]);
                for (i, qi) in tail_mut.iter_mut().enumerate() {
                    *qi -= coeff * v[i];
                }
            }
        }
        comp.column_mut(out_j).assign(&q);
    }
    Ok(comp)
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// eigenvectors are the columns of the returned matrix.
pub fn sym_eig(a: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (n, n2) = a.dim();
    if n != n2 {
        return Err(Error::Invalid(format!("sym_eig of a {n} x {n2} matrix")));
    }
    let mut m = a.to_owned();
    let mut vecs = Array2::<f64>::eye(n);

    for _ in 0..JACOBI_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() <= JACOBI_TOL * frobenius(&m.view()).max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s_ = c * t;

                for i in 0..n {
                    let mip = m[[i, p]];
                    let miq = m[[i, q]];
                    m[[i, p]] = c * mip - s_ * miq;
                    m[[i, q]] = s_ * mip + c * miq;
                }
                for j in 0..n {
                    let mpj = m[[p, j]];
                    let mqj = m[[q, j]];
                    m[[p, j]] = c * mpj - s_ * mqj;
                    m[[q, j]] = s_ * mpj + c * mqj;
                }
                for i in 0..n {
                    let vip = vecs[[i, p]];
                    let viq = vecs[[i, q]];
                    vecs[[i, p]] = c * vip - s_ * viq;
                    vecs[[i, q]] = s_ * vip + c * viq;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap().then(i.cmp(&j)));

    let mut vals = Array1::<f64>::zeros(n);
    let mut sorted_vecs = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = diag[src];
        sorted_vecs.column_mut(dst).assign(&vecs.column(src));
    }
    Ok((vals, sorted_vecs))
}

/// Top-2 principal-component coordinates of the rows of `x`.
///
/// Components carry a deterministic sign: the entry of largest magnitude in
/// each axis is made positive.
pub fn pca_top2(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::Invalid("pca needs at least 2 rows".into()));
    }
    if d < 2 {
        return Err(Error::Invalid("pca needs at least 2 columns".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &x - &mean.broadcast((n, d)).unwrap();
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let (_, vecs) = sym_eig(cov.view())?;
    let mut axes = vecs.slice(s![.., 0..2]).to_owned();
    for mut col in axes.columns_mut() {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok(centered.dot(&axes))
}

/// Frobenius norm.
pub fn frobenius(a: &ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((m, n), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn svd_reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(m, n) in &[(3, 3), (8, 3), (10, 10), (16, 5)] {
            let a = random_matrix(&mut rng, m, n);
            let svd = thin_svd(a.view()).unwrap();
            let rec = svd.u.dot(&Array2::from_diag(&svd.s)).dot(&svd.v.t());
            let err = frobenius(&(&rec - &a).view());
            assert!(err < 1e-10, "reconstruction error {err} for {m}x{n}");

            let utu = svd.u.t().dot(&svd.u);
            let gram_err = frobenius(&(&utu - &Array2::<f64>::eye(n)).view());
            assert!(gram_err < 1e-12, "u not orthonormal: {gram_err}");
            let vtv = svd.v.t().dot(&svd.v);
            let v_err = frobenius(&(&vtv - &Array2::<f64>::eye(n)).view());
            assert!(v_err < 1e-12, "v not orthogonal: {v_err}");

            for i in 1..n {
                assert!(svd.s[i - 1] >= svd.s[i]);
            }
        }
    }

    #[test]
    fn svd_handles_rank_deficiency() {
        // Second column is a multiple of the first.
        let a = arr2(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]);
        let svd = thin_svd(a.view()).unwrap();
        assert!(svd.s[1] < 1e-12 * svd.s[0]);
        let rec = svd.u.dot(&Array2::from_diag(&svd.s)).dot(&svd.v.t());
        assert!(frobenius(&(&rec - &a).view()) < 1e-10);
    }

    #[test]
    fn complement_completes_the_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(d, s) in &[(4, 1), (8, 3), (6, 6), (5, 0)] {
            let raw = random_matrix(&mut rng, d, s.max(1));
            let basis = if s == 0 {
                Array2::<f64>::zeros((d, 0))
            } else {
                thin_svd(raw.view()).unwrap().u
            };
            let comp = orthonormal_complement(basis.view()).unwrap();
            assert_eq!(comp.dim(), (d, d - s));
            // Orthonormal and orthogonal to the basis.
            let ctc = comp.t().dot(&comp);
            assert!(frobenius(&(&ctc - &Array2::<f64>::eye(d - s)).view()) < 1e-12);
            if s > 0 {
                let cross = basis.t().dot(&comp);
                assert!(frobenius(&cross.view()) < 1e-12);
            }
        }
    }

    #[test]
    fn sym_eig_recovers_known_spectrum() {
        // diag(5, 2, -1) conjugated by a rotation.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = thin_svd(random_matrix(&mut rng, 3, 3).view()).unwrap().u;
        let lam = Array2::from_diag(&ndarray::arr1(&[5.0, 2.0, -1.0]));
        let a = q.dot(&lam).dot(&q.t());
        let (vals, vecs) = sym_eig(a.view()).unwrap();
        assert!((vals[0] - 5.0).abs() < 1e-10);
        assert!((vals[1] - 2.0).abs() < 1e-10);
        assert!((vals[2] + 1.0).abs() < 1e-10);
        let rec = vecs.dot(&Array2::from_diag(&vals)).dot(&vecs.t());
        assert!(frobenius(&(&rec - &a).view()) < 1e-9);
    }

    #[test]
    fn pca_finds_dominant_direction() {
        // Points stretched along (1, 1)/sqrt(2) in 2-d.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 500;
        let mut x = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            let a = rng.random::<f64>() * 10.0 - 5.0;
            let b = rng.random::<f64>() * 0.1 - 0.05;
            x[[i, 0]] = a + b;
            x[[i, 1]] = a - b;
        }
        let coords = pca_top2(x.view()).unwrap();
        let var0: f64 = coords.column(0).iter().map(|v| v * v).sum();
        let var1: f64 = coords.column(1).iter().map(|v| v * v).sum();
        assert!(var0 > 100.0 * var1);
    }
}
