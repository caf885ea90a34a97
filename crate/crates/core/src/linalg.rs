//! Small dense linear-algebra helpers: Frobenius products, outer-product
//! accumulation, and a cyclic Jacobi eigensolver for symmetric matrices.
//!
//! The Jacobi solver is the only nontrivial kernel. It is deterministic,
//! generic over the scalar type, and entirely adequate for the matrix sizes
//! this crate works with (metric and covariance matrices up to a few hundred
//! rows). Cost is O(n³) per sweep with quadratic convergence.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::Real;

/// Frobenius inner product `⟨A, B⟩ = Σ_ij A[ij]·B[ij]`.
pub fn frobenius_inner<T: Real>(a: &ArrayView2<T>, b: &ArrayView2<T>) -> T {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

/// Frobenius norm `‖A‖_F`.
pub fn frobenius_norm<T: Real>(a: &ArrayView2<T>) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// `(M + Mᵀ)/2`.
pub fn symmetrize<T: Real>(m: &ArrayView2<T>) -> Array2<T> {
    let half = T::real(0.5);
    let mut out = m.to_owned();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = (m[[i, j]] + m[[j, i]]) * half;
        }
    }
    out
}

/// `acc += coef · u uᵀ`.
pub fn add_scaled_outer<T: Real>(acc: &mut Array2<T>, coef: T, u: &ArrayView1<T>) {
    let n = u.len();
    debug_assert_eq!(acc.dim(), (n, n));
    for i in 0..n {
        let ci = coef * u[i];
        if ci == T::zero() {
            continue;
        }
        for j in 0..n {
            acc[[i, j]] += ci * u[j];
        }
    }
}

/// `M · v` for square or rectangular `M`.
pub fn mat_vec<T: Real>(m: &ArrayView2<T>, v: &ArrayView1<T>) -> Array1<T> {
    debug_assert_eq!(m.ncols(), v.len());
    Array1::from_iter(
        m.rows()
            .into_iter()
            .map(|row| row.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum()),
    )
}

/// Quadratic form `vᵀ M v`.
pub fn quadratic_form<T: Real>(m: &ArrayView2<T>, v: &ArrayView1<T>) -> T {
    let mv = mat_vec(m, v);
    v.iter().zip(mv.iter()).map(|(&a, &b)| a * b).sum()
}

/// Eigendecomposition of a symmetric matrix.
///
/// `values[i]` pairs with column `i` of `vectors`; eigenvalues are sorted
/// descending.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized first, so slight asymmetry from accumulated
/// rounding is tolerated. Fails on non-finite entries.
pub fn sym_eigen<T: Real>(m: &ArrayView2<T>) -> Result<SymEigen<T>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix for eigendecomposition".into()));
    }

    let mut a = symmetrize(m);
    let mut v = Array2::<T>::eye(n);
    if n <= 1 {
        return Ok(SymEigen {
            values: a.diag().to_owned(),
            vectors: v,
        });
    }

    let scale = frobenius_norm(&a.view());
    let tol = T::epsilon() * scale.max(T::one());
    const MAX_SWEEPS: usize = 64;

    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                // Rotation angle zeroing a[p,q].
                let theta = (a[[q, q]] - a[[p, p]]) / (T::real(2.0) * apq);
                let t = {
                    let denom = theta.abs() + (theta * theta + T::one()).sqrt();
                    if theta >= T::zero() {
                        T::one() / denom
                    } else {
                        -T::one() / denom
                    }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = a[[i, p]];
                    let aiq = a[[i, q]];
                    a[[i, p]] = c * aip - s * aiq;
                    a[[i, q]] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[[p, j]];
                    let aqj = a[[q, j]];
                    a[[p, j]] = c * apj - s * aqj;
                    a[[q, j]] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }

    // Sort eigenpairs by descending eigenvalue; stable on ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[[j, j]]
            .partial_cmp(&a[[i, i]])
            .expect("eigenvalues are finite")
    });
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vectors = Array2::<T>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[[i, dst]] = v[[i, src]];
        }
    }
    Ok(SymEigen { values, vectors })
}

fn off_diagonal_norm<T: Real>(a: &Array2<T>) -> T {
    let n = a.nrows();
    let mut sum = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[[i, j]] * a[[i, j]];
            }
        }
    }
    sum.sqrt()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<T: Real>(m: &ArrayView2<T>) -> Result<T> {
    let eig = sym_eigen(m)?;
    Ok(eig
        .values
        .iter()
        .copied()
        .fold(T::infinity(), |acc, x| acc.min(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn reconstruct(eig: &SymEigen<f64>) -> Array2<f64> {
        let n = eig.values.len();
        let mut out = Array2::<f64>::zeros((n, n));
        for k in 0..n {
            let col = eig.vectors.column(k);
            add_scaled_outer(&mut out, eig.values[k], &col);
        }
        out
    }

    #[test]
    fn eigen_diagonal_matrix() {
        let m: Array2<f64> = array![[3.0, 0.0], [0.0, -1.0]];
        let eig = sym_eigen(&m.view()).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-12);
        assert!((eig.values[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_symmetric_input() {
        let m = array![
            [4.0, 1.0, -2.0],
            [1.0, 2.0, 0.5],
            [-2.0, 0.5, 3.0],
        ];
        let eig = sym_eigen(&m.view()).unwrap();
        let back = reconstruct(&eig);
        for (a, b) in m.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn eigen_vectors_orthonormal() {
        let m: Array2<f64> = array![
            [2.0, -1.0, 0.0, 0.3],
            [-1.0, 2.0, -1.0, 0.0],
            [0.0, -1.0, 2.0, -1.0],
            [0.3, 0.0, -1.0, 2.0],
        ];
        let eig = sym_eigen(&m.view()).unwrap();
        let vt_v = eig.vectors.t().dot(&eig.vectors);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vt_v[[i, j]] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eigen_known_2x2() {
        // Eigenvalues of [[2,1],[1,2]] are 3 and 1.
        let m: Array2<f64> = array![[2.0, 1.0], [1.0, 2.0]];
        let eig = sym_eigen(&m.view()).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-12);
        assert!((eig.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_rejects_non_finite() {
        let m = array![[f64::NAN, 0.0], [0.0, 1.0]];
        assert!(sym_eigen(&m.view()).is_err());
    }

    #[test]
    fn eigen_works_in_f32() {
        let m = array![[2.0f32, 1.0], [1.0, 2.0]];
        let eig = sym_eigen(&m.view()).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-5);
    }
}
