//! Metric learning to rank.
//!
//! Learns a positive semi-definite matrix W so that ranking a database by
//! the distance `‖q − x‖_W = √((q−x)ᵀ W (q−x))` reproduces the relevance
//! ordering of the training queries. Training is cutting-plane optimization
//! of the structured margin problem
//!
//!   min tr(W) + C·(1/n)·Σ_q ξ_q
//!   s.t. ⟨W, ψ(q, y_q)⟩ ≥ ⟨W, ψ(q, y)⟩ + Δ(y_q, y) − ξ_q  for all q, y
//!
//! with separation oracles for AUC, MRR, and NDCG losses. At query time the
//! database is sorted by descending point-wise score ⟨W, φ(q, x)⟩, which
//! equals sorting by increasing learned distance.

mod loss;
mod oracle;
mod psi;
mod train;

pub use loss::{ranking_loss, Interleaving, LossKind};
pub use oracle::{oracle_over_scores, separation_oracle, OracleOutcome};
pub use psi::psi;
pub use train::{
    default_c_grid, train, Query, QuerySet, TrainConfig, TrainOutcome,
};

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{self, add_scaled_outer, quadratic_form};
use crate::Real;

/// A symmetric positive semi-definite metric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix<T> {
    w: Array2<T>,
}

impl<T: Real> MetricMatrix<T> {
    /// Validates squareness, finiteness, and symmetry. Positive
    /// semi-definiteness is the caller's responsibility (it holds for
    /// anything produced by [`project_psd`] or [`train`]); use
    /// [`MetricMatrix::min_eigenvalue`] to verify explicitly.
    pub fn new(w: Array2<T>) -> Result<Self> {
        let (rows, cols) = w.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch(format!(
                "metric must be square, got {rows}x{cols}"
            )));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("metric matrix".into()));
        }
        let scale = linalg::frobenius_norm(&w.view()).max(T::one());
        let tol = T::real(1e-10) * scale;
        for i in 0..rows {
            for j in 0..i {
                if (w[[i, j]] - w[[j, i]]).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "metric asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { w })
    }

    pub(crate) fn new_unchecked(w: Array2<T>) -> Self {
        Self { w }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            w: Array2::zeros((dim, dim)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            w: Array2::eye(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.w
    }

    pub fn into_inner(self) -> Array2<T> {
        self.w
    }

    /// Smallest eigenvalue; ≥ −1e-8 for a metric within PSD tolerance.
    pub fn min_eigenvalue(&self) -> Result<T> {
        linalg::min_eigenvalue(&self.w.view())
    }
}

/// The learned distance `‖q − x‖_W`.
pub fn mahalanobis_distance<T: Real>(
    w: &MetricMatrix<T>,
    q: &ArrayView1<T>,
    x: &ArrayView1<T>,
) -> Result<T> {
    let squared = -pointwise_score(w, q, x)?;
    // W is PSD only within tolerance, so clamp rounding noise at zero.
    Ok(squared.max(T::zero()).sqrt())
}

/// Point-wise score `⟨W, φ(q, x)⟩ = −‖q − x‖²_W`, computed without
/// materializing the d×d feature map φ.
pub fn pointwise_score<T: Real>(
    w: &MetricMatrix<T>,
    q: &ArrayView1<T>,
    x: &ArrayView1<T>,
) -> Result<T> {
    if q.len() != x.len() || q.len() != w.dim() {
        return Err(Error::DimensionMismatch(format!(
            "score between {}-dim query, {}-dim item, {}-dim metric",
            q.len(),
            x.len(),
            w.dim()
        )));
    }
    let diff = q.to_owned() - x;
    Ok(-quadratic_form(&w.matrix().view(), &diff.view()))
}

/// Projects a matrix onto the PSD cone: symmetrize, eigendecompose, clamp
/// negative eigenvalues to zero, reconstruct. This is the Frobenius-nearest
/// PSD matrix to the symmetrized input.
pub fn project_psd<T: Real>(m: &ArrayView2<T>) -> Result<MetricMatrix<T>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix for PSD projection".into()));
    }
    let eig = linalg::sym_eigen(m)?;
    let d = m.nrows();
    let mut out = Array2::<T>::zeros((d, d));
    for (k, &value) in eig.values.iter().enumerate() {
        if value > T::zero() {
            let col = eig.vectors.column(k);
            add_scaled_outer(&mut out, value, &col);
        }
    }
    Ok(MetricMatrix::new_unchecked(out))
}

/// Ranks database rows by increasing learned distance from the query;
/// distance ties break by ascending index. Returns `(index, distance)`.
pub fn rank_database<T: Real>(
    w: &MetricMatrix<T>,
    query: &ArrayView1<T>,
    db: &ArrayView2<T>,
) -> Result<Vec<(usize, T)>> {
    let mut ranked: Vec<(usize, T)> = db
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| Ok((i, mahalanobis_distance(w, query, &row)?)))
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("distances are finite")
            .then(a.0.cmp(&b.0))
    });
    Ok(ranked)
}
