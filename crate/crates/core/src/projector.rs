//! Orthogonal projectors, the trainable candidate matrix, and the snap from
//! one to the other.
//!
//! A rank-`r` orthogonal projector `P` is stored as a `d x r` semi-orthogonal
//! basis `U_r` with `P = U_r U_r^T`; symmetry is exact by construction and
//! idempotence holds to machine precision. Training works on an
//! unconstrained candidate `U` that is pulled toward orthonormality by the
//! projection penalty and snapped to the nearest projector at the end.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, thin_svd};

/// Orthonormality residual permitted at construction time.
const ORTHO_TOL: f64 = 1e-10;
/// Residual beyond which a loaded projector file is considered corrupt.
const LOAD_TOL: f64 = 1e-6;
/// Smallest singular value accepted when snapping a candidate.
const RANK_TOL: f64 = 1e-10;

/// Rank-`r` orthogonal projector `P = U_r U_r^T` on `R^d`.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: Array2<f64>,
}

impl Projector {
    /// Wraps a `d x r` matrix with orthonormal columns.
    pub fn new(basis: Array2<f64>) -> Result<Self> {
        let (d, r) = basis.dim();
        if r == 0 || r > d {
            return Err(Error::Invalid(format!(
                "projector rank {r} out of range 1..={d}"
            )));
        }
        let residual = ortho_residual(&basis.view());
        if residual > ORTHO_TOL {
            return Err(Error::Invalid(format!(
                "basis columns are not orthonormal: residual {residual:.3e} > {ORTHO_TOL:.0e}"
            )));
        }
        Ok(Projector { basis })
    }

    /// Identity projector on `R^d` (erases nothing).
    pub fn identity(d: usize) -> Self {
        Projector {
            basis: Array2::eye(d),
        }
    }

    pub fn d(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Semi-orthogonal basis `U_r` of the preserved subspace.
    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    /// Dense `P = U_r U_r^T`; prefer [`Projector::apply`] for data.
    pub fn matrix(&self) -> Array2<f64> {
        self.basis.dot(&self.basis.t())
    }

    /// Projects each row of `x` (an `N x d` matrix) onto the preserved
    /// subspace: row `i` becomes `P x_i`.
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.d() {
            return Err(Error::Invalid(format!(
                "projector acts on R^{}, rows have dimension {}",
                self.d(),
                x.ncols()
            )));
        }
        Ok(x.dot(&self.basis).dot(&self.basis.t()))
    }
}

/// Unconstrained `d x r` matrix optimized during training.
#[derive(Debug, Clone)]
pub struct ProjectionCandidate {
    u: Array2<f64>,
}

impl ProjectionCandidate {
    pub fn new(u: Array2<f64>) -> Result<Self> {
        let (d, r) = u.dim();
        if r == 0 || r > d {
            return Err(Error::Invalid(format!(
                "candidate rank {r} out of range 1..={d}"
            )));
        }
        if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite candidate entry {bad}")));
        }
        Ok(ProjectionCandidate { u })
    }

    /// The initialization used by training: first `r` columns of `I_d`.
    /// Its projection penalty is exactly zero.
    pub fn truncated_identity(d: usize, r: usize) -> Result<Self> {
        let mut u = Array2::<f64>::zeros((d, r));
        for j in 0..r.min(d) {
            u[[j, j]] = 1.0;
        }
        ProjectionCandidate::new(u)
    }

    pub fn d(&self) -> usize {
        self.u.nrows()
    }

    pub fn r(&self) -> usize {
        self.u.ncols()
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn u_mut(&mut self) -> &mut Array2<f64> {
        &mut self.u
    }
}

/// Squared Frobenius distance of `U^T U` from `I_r`.
///
/// Zero exactly when the candidate's columns are orthonormal; also equal to
/// the squared Frobenius distance from `U U^T` to its nearest rank-`r`
/// orthogonal projector (see [`snap_to_projector`]).
pub fn projection_loss(candidate: &ProjectionCandidate) -> f64 {
    let gram = candidate.u.t().dot(&candidate.u);
    let r = candidate.r();
    let mut acc = 0.0;
    for i in 0..r {
        for j in 0..r {
            let delta = gram[[i, j]] - if i == j { 1.0 } else { 0.0 };
            acc += delta * delta;
        }
    }
    acc
}

/// Frobenius-nearest rank-`r` orthogonal projector to `U U^T`, obtained from
/// the left singular vectors of `U`.
///
/// Fails when the candidate is numerically rank deficient (smallest singular
/// value at or below `1e-10`), as the nearest projector of rank `r` is then
/// ill-defined.
pub fn snap_to_projector(candidate: &ProjectionCandidate) -> Result<Projector> {
    let svd = thin_svd(candidate.u.view())?;
    let r = candidate.r();
    let numerical_rank = svd.s.iter().filter(|&&s| s > RANK_TOL).count();
    if numerical_rank < r {
        return Err(Error::Numerical(format!(
            "candidate is rank deficient: numerical rank {numerical_rank} < requested rank {r}"
        )));
    }
    Projector::new(svd.u)
}

fn ortho_residual(basis: &ArrayView2<'_, f64>) -> f64 {
    let gram = basis.t().dot(basis);
    let r = basis.ncols();
    let eye = Array2::<f64>::eye(r);
    frobenius(&(&gram - &eye).view())
}

/// Writes a projector as text: optional `#` comments, a `d r` header line,
/// then the `d` rows of `U_r`. Floats use the shortest round-trip form, so
/// save/load reproduces the basis bit-exactly.
pub fn save_projector(p: &Projector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    writeln!(out, "{} {}", p.d(), p.rank()).unwrap();
    for i in 0..p.d() {
        for j in 0..p.rank() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{}", p.basis[[i, j]]).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a projector written by [`save_projector`].
///
/// Rejects files whose basis has orthonormality residual above `1e-6`
/// (corrupt); smaller residuals are re-orthonormalized so the returned
/// value always satisfies the [`Projector`] invariants.
pub fn load_projector(path: impl AsRef<Path>) -> Result<Projector> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<(usize, &str)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        rows.push((idx + 1, trimmed));
    }
    let (header_line, header) = *rows
        .first()
        .ok_or_else(|| Error::parse(path, 1, "no header line"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::parse(path, header_line, "header must be `d r`"));
    }
    let d: usize = dims[0]
        .parse()
        .map_err(|_| Error::parse(path, header_line, format!("bad dimension {:?}", dims[0])))?;
    let r: usize = dims[1]
        .parse()
        .map_err(|_| Error::parse(path, header_line, format!("bad rank {:?}", dims[1])))?;
    if r == 0 || r > d {
        return Err(Error::parse(
            path,
            header_line,
            format!("rank {r} out of range 1..={d}"),
        ));
    }
    if rows.len() != d + 1 {
        return Err(Error::parse(
            path,
            header_line,
            format!("expected {d} basis rows, found {}", rows.len() - 1),
        ));
    }

    let mut basis = Array2::<f64>::zeros((d, r));
    for (i, &(lineno, row)) in rows[1..].iter().enumerate() {
        let vals: Vec<&str> = row.split_whitespace().collect();
        if vals.len() != r {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {r} entries, found {}", vals.len()),
            ));
        }
        for (j, v) in vals.iter().enumerate() {
            let parsed: f64 = v
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad number {v:?}")))?;
            if !parsed.is_finite() {
                return Err(Error::parse(path, lineno, format!("non-finite entry {v:?}")));
            }
            basis[[i, j]] = parsed;
        }
    }

    let residual = ortho_residual(&basis.view());
    if residual > LOAD_TOL {
        return Err(Error::Invalid(format!(
            "corrupt projector {}: orthonormality residual {residual:.3e} > {LOAD_TOL:.0e}",
            path.display()
        )));
    }
    if residual > ORTHO_TOL {
        // Legitimate but imprecise input: restore orthonormality without
        // moving the column space.
        let svd = thin_svd(basis.view())?;
        return Projector::new(svd.u);
    }
    Projector::new(basis)
}
