//! Subspace geometry: orthonormal bases, QR retraction, principal angles,
//! and the projection metric.
//!
//! A point on the Grassmannian Gr(n, k) is the span of an orthonormal
//! basis U (n x k, with Ut U = I). Bases are non-unique: U and U R span
//! the same subspace for any orthogonal k x k R, so every comparison in
//! this module goes through quantities invariant to that choice.
//!
//! Principal angles between subspaces A and B come from the singular
//! values of the k x k Gram matrix:
//!
//! ```text
//!     theta_i = arccos(sigma_i(At B)),   theta_1 <= ... <= theta_k
//! ```
//!
//! and the projection metric is
//!
//! ```text
//!     d(A, B) = sqrt(sum_i sin^2 theta_i)
//!             = sqrt(k - |At B|_F^2)
//!             = |P_A - P_B|_F / sqrt(2),    P = U Ut,
//! ```
//!
//! where the middle form is what this module evaluates: it needs one
//! k x k Gram matrix instead of a singular value decomposition, and with
//! a symmetric accumulation order it makes `grassmann_distance(a, b)`
//! bit-identical to `grassmann_distance(b, a)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frobenius tolerance on `Ut U - I` accepted by [`Subspace::new`].
pub const ORTHONORMALITY_TOL: f64 = 1e-6;

/// Smallest singular value below which [`qr_retract`] rejects its input.
pub const RANK_TOL: f64 = 1e-10;

/// A k-dimensional subspace of R^n held as an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps an orthonormal basis, verifying `|Ut U - I|_F <= 1e-6` and
    /// that every entry is finite.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (n, k) = basis.shape();
        if k == 0 || n < k {
            return Err(Error::DimensionMismatch(format!(
                "basis must be n x k with n >= k >= 1, got {n} x {k}"
            )));
        }
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "basis contains nonfinite entries".into(),
            ));
        }
        let mut defect = 0.0;
        for i in 0..k {
            for j in 0..k {
                let dot = basis.column(i).dot(&basis.column(j));
                let target = if i == j { 1.0 } else { 0.0 };
                defect += (dot - target) * (dot - target);
            }
        }
        if defect.sqrt() > ORTHONORMALITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "basis is not orthonormal: defect {:.3e}",
                defect.sqrt()
            )));
        }
        Ok(Self { basis })
    }

    /// Wraps a basis that is orthonormal by construction (retraction
    /// output); skips the defect check.
    pub(crate) fn new_unchecked(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    /// Ambient dimension n.
    #[must_use]
    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Subspace dimension k.
    #[must_use]
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// The orthonormal basis U, n x k.
    #[must_use]
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// The orthogonal projector P = U Ut, n x n.
    #[must_use]
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

#[derive(Serialize, Deserialize)]
struct SubspaceWire {
    n: usize,
    k: usize,
    /// Basis entries in row-major order, length n * k.
    basis: Vec<f64>,
}

impl Serialize for Subspace {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let (n, k) = self.basis.shape();
        let mut flat = Vec::with_capacity(n * k);
        for i in 0..n {
            for j in 0..k {
                flat.push(self.basis[(i, j)]);
            }
        }
        SubspaceWire { n, k, basis: flat }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let wire = SubspaceWire::deserialize(de)?;
        if wire.basis.len() != wire.n * wire.k {
            return Err(serde::de::Error::custom(format!(
                "basis has {} entries, expected {} x {}",
                wire.basis.len(),
                wire.n,
                wire.k
            )));
        }
        let basis = DMatrix::from_row_slice(wire.n, wire.k, &wire.basis);
        Subspace::new(basis).map_err(serde::de::Error::custom)
    }
}

/// Maps an arbitrary full-rank n x k matrix to the nearest orthonormal
/// basis via thin QR, with the sign convention that every diagonal entry
/// of R is positive. The convention makes the retraction a function of
/// the input matrix rather than of the QR routine's internal choices.
///
/// Fails with [`Error::RankDeficientUpdate`] when the smallest singular
/// value of the input is at or below `1e-10`.
pub fn qr_retract(m: &DMatrix<f64>) -> Result<Subspace> {
    let (n, k) = m.shape();
    if k == 0 || n < k {
        return Err(Error::DimensionMismatch(format!(
            "retraction input must be n x k with n >= k >= 1, got {n} x {k}"
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "retraction input contains nonfinite entries".into(),
        ));
    }
    let sigma_min = m
        .clone()
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(sigma_min > RANK_TOL) {
        return Err(Error::RankDeficientUpdate);
    }
    let (q, _) = thin_qr_positive(m.clone());
    Ok(Subspace::new_unchecked(q))
}

/// Thin QR with positive-diagonal sign fix. Returns the orthonormal
/// factor and the absolute values of the R diagonal, which callers that
/// skip the singular value decomposition can use as a cheap rank guard.
pub(crate) fn thin_qr_positive(m: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let k = m.ncols();
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    let mut rdiag = Vec::with_capacity(k);
    for j in 0..k {
        let d = r[(j, j)];
        if d < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
        rdiag.push(d.abs());
    }
    (q, rdiag)
}

/// Principal angles between two subspaces of the same ambient space,
/// ascending in `[0, pi/2]`. The subspace dimensions may differ; the
/// result has `min(k_a, k_b)` entries.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "ambient dimensions differ: {} vs {}",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    let gram = a.basis().transpose() * b.basis();
    let sv = gram.singular_values();
    let mut angles: Vec<f64> = sv.iter().map(|s| s.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(|x, y| x.total_cmp(y));
    Ok(angles)
}

/// Projection metric between equal-dimension subspaces,
/// `d(A, B) = sqrt(sum_i sin^2 theta_i) = sqrt(k - |At B|_F^2)`.
///
/// The squared Frobenius norm of the Gram matrix is accumulated over
/// symmetric index pairs so that swapping the arguments transposes the
/// Gram matrix without changing a single addition: the result is exactly
/// symmetric, not merely up to rounding.
pub fn grassmann_distance(a: &Subspace, b: &Subspace) -> Result<f64> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "ambient dimensions differ: {} vs {}",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "subspace dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let k = a.dim();
    let ua = a.basis();
    let ub = b.basis();
    let gram = |i: usize, j: usize| ua.column(i).dot(&ub.column(j));
    let mut cos_sq = 0.0;
    for i in 0..k {
        let g = gram(i, i);
        cos_sq += g * g;
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let gij = gram(i, j);
            let gji = gram(j, i);
            cos_sq += gij * gij + gji * gji;
        }
    }
    Ok((k as f64 - cos_sq).max(0.0).sqrt())
}

/// Decides `grassmann_distance(a, b) <= eps` without always paying for
/// the full Gram matrix: the squared distance is `k - sum of squared
/// Gram entries`, and the sum only grows, so once it crosses
/// `k - eps^2` the answer is yes. Diagonal entries are accumulated
/// first because nearly aligned subspaces concentrate their cosines
/// there, which is the common case worth short-circuiting. The
/// accumulation order mirrors [`grassmann_distance`]'s symmetric
/// grouping, so the decision is identical for `(a, b)` and `(b, a)`.
///
/// The caller guarantees matching dimensions.
pub(crate) fn distance_le(a: &Subspace, b: &Subspace, eps: f64) -> bool {
    let k = a.dim();
    let ua = a.basis();
    let ub = b.basis();
    let accept_at = k as f64 - eps * eps;
    if accept_at <= 0.0 {
        return true;
    }
    let gram = |i: usize, j: usize| ua.column(i).dot(&ub.column(j));
    let mut cos_sq = 0.0;
    for i in 0..k {
        let g = gram(i, i);
        cos_sq += g * g;
        if cos_sq >= accept_at {
            return true;
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let gij = gram(i, j);
            let gji = gram(j, i);
            cos_sq += gij * gij + gji * gji;
            if cos_sq >= accept_at {
                return true;
            }
        }
    }
    false
}

/// Draws a uniformly distributed subspace by retracting an n x k matrix
/// of standard normal entries generated from `seed`. The same seed
/// always yields the same basis.
pub fn random_subspace(n: usize, k: usize, seed: u64) -> Result<Subspace> {
    if k == 0 || n < k {
        return Err(Error::DimensionMismatch(format!(
            "requested subspace must satisfy n >= k >= 1, got n = {n}, k = {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            m[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    qr_retract(&m)
}
