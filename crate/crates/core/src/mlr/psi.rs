//! The partial-order feature ψ.
//!
//! ψ(q, y) averages signed differences φ(q,i) − φ(q,j) over all relevant ×
//! irrelevant pairs, where φ(q,x) = −(q−x)(q−x)ᵀ and the sign follows the
//! pair's order under y. Grouping the double sum by item turns it into one
//! rank-one update per item:
//!
//!   ψ = Σ_a (N − 2k_a)/(PN) · φ(q, i_a)  +  Σ_b (2m_b − P)/(PN) · φ(q, j_b)
//!
//! with P = |X⁺|, N = |X⁻|, and m_b the number of relevant items ranked
//! after the b-th irrelevant one. Every correct ranking (all k_a = 0) yields
//! the same ψ, so one representative suffices for the margin constraints.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::add_scaled_outer;
use crate::Real;

use super::loss::Interleaving;

/// Builds ψ(q, y) for items given as database row indices.
///
/// `pos` and `neg` must be listed in the ranked order the interleaving was
/// produced against.
pub fn psi<T: Real>(
    query: &ArrayView1<T>,
    db: &ArrayView2<T>,
    pos: &[usize],
    neg: &[usize],
    y: &Interleaving,
) -> Result<Array2<T>> {
    let d = query.len();
    if db.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "query has {d} dims, database has {}",
            db.ncols()
        )));
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyInput(
            "psi needs non-empty relevant and irrelevant sets".into(),
        ));
    }
    if y.pos_len() != pos.len() || y.neg_len() != neg.len() {
        return Err(Error::DimensionMismatch(format!(
            "interleaving is {}x{}, sets are {}x{}",
            y.pos_len(),
            y.neg_len(),
            pos.len(),
            neg.len()
        )));
    }
    for &i in pos.iter().chain(neg.iter()) {
        if i >= db.nrows() {
            return Err(Error::IndexOutOfBounds(format!(
                "item {i} outside database of {} rows",
                db.nrows()
            )));
        }
    }

    let p = pos.len();
    let n = neg.len();
    let scale = T::real(1.0 / (p as f64 * n as f64));

    // Attach each item's coefficient, then accumulate in database-index
    // order so equivalent rankings produce bit-identical matrices.
    let mut terms: Vec<(usize, T)> = Vec::with_capacity(p + n);

    // Relevant items: coefficient (N - 2k_a) on φ(q, i_a) = -u uᵀ.
    for (a, &i) in pos.iter().enumerate() {
        let coef = T::real(n as f64 - 2.0 * y.counts()[a] as f64) * scale;
        terms.push((i, coef));
    }

    // Irrelevant items: coefficient (2m_b - P), m_b = #{a : k_a >= b}.
    // The counts are non-decreasing, so m_b falls as b rises.
    let counts = y.counts();
    let mut below = 0; // #{a : k_a < b}
    for (b, &j) in neg.iter().enumerate() {
        let rank = b + 1;
        while below < p && counts[below] < rank {
            below += 1;
        }
        let m_b = p - below;
        let coef = T::real(2.0 * m_b as f64 - p as f64) * scale;
        terms.push((j, coef));
    }

    terms.sort_by_key(|&(i, _)| i);
    let mut out = Array2::<T>::zeros((d, d));
    for (i, coef) in terms {
        let u = query.to_owned() - db.row(i);
        add_scaled_outer(&mut out, -coef, &u.view());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_inner;
    use crate::mlr::{pointwise_score, MetricMatrix};
    use ndarray::{array, Array1};
    use rand::Rng;

    fn random_setup(
        seed: u64,
        d: usize,
        p: usize,
        n: usize,
    ) -> (Array1<f64>, Array2<f64>, Vec<usize>, Vec<usize>) {
        let mut rng = crate::seeds::stream(seed, "test-psi", 0);
        let query = Array1::from_iter((0..d).map(|_| rng.gen_range(-1.0..1.0)));
        let db = Array2::from_shape_vec(
            (p + n, d),
            (0..(p + n) * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let pos: Vec<usize> = (0..p).collect();
        let neg: Vec<usize> = (p..p + n).collect();
        (query, db, pos, neg)
    }

    #[test]
    fn psi_identical_for_any_correct_ranking_permutation() {
        let (query, db, pos, neg) = random_setup(1, 4, 3, 4);
        let y = Interleaving::correct(3, 4);
        let base = psi(&query.view(), &db.view(), &pos, &neg, &y).unwrap();

        let pos_perm = vec![2, 0, 1];
        let neg_perm = vec![6, 3, 5, 4];
        let permuted = psi(&query.view(), &db.view(), &pos_perm, &neg_perm, &y).unwrap();
        // Exact: accumulation order is canonical, so any two correct
        // rankings produce the same bits.
        assert_eq!(base, permuted);
    }

    #[test]
    fn psi_of_reversed_ranking_is_negated() {
        let (query, db, pos, neg) = random_setup(2, 3, 2, 3);
        let correct = Interleaving::correct(2, 3);
        let reversed = Interleaving::new(vec![3, 3], 3).unwrap();
        let a = psi(&query.view(), &db.view(), &pos, &neg, &correct).unwrap();
        let b = psi(&query.view(), &db.view(), &pos, &neg, &reversed).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x + y).abs() < 1e-14);
        }
    }

    #[test]
    fn psi_score_matches_pairwise_decomposition() {
        // ⟨W, ψ(q,y)⟩ must equal the signed average of pointwise score
        // differences, evaluated directly from the pair sum.
        let mut rng = crate::seeds::stream(3, "test-psi-pairs", 0);
        for trial in 0..40 {
            let d = 3 + trial % 3;
            let p = 1 + trial % 3;
            let n = 1 + (trial / 3) % 4;
            let (query, db, pos, neg) = random_setup(100 + trial as u64, d, p, n);

            let mut counts: Vec<usize> = (0..p).map(|_| rng.gen_range(0..=n)).collect();
            counts.sort_unstable();
            let y = Interleaving::new(counts.clone(), n).unwrap();

            let mut m = Array2::<f64>::zeros((d, d));
            for i in 0..d {
                for j in 0..=i {
                    let v = rng.gen_range(-1.0..1.0);
                    m[[i, j]] = v;
                    m[[j, i]] = v;
                }
            }
            let w = MetricMatrix::new(m).unwrap();

            let psi_m = psi(&query.view(), &db.view(), &pos, &neg, &y).unwrap();
            let via_matrix = frobenius_inner(&w.matrix().view(), &psi_m.view());

            let mut via_pairs = 0.0;
            for (a, &i) in pos.iter().enumerate() {
                for (b, &j) in neg.iter().enumerate() {
                    let y_ij = if counts[a] < b + 1 { 1.0 } else { -1.0 };
                    let si = pointwise_score(&w, &query.view(), &db.row(i)).unwrap();
                    let sj = pointwise_score(&w, &query.view(), &db.row(j)).unwrap();
                    via_pairs += y_ij * (si - sj) / (p as f64 * n as f64);
                }
            }
            assert!(
                (via_matrix - via_pairs).abs() < 1e-9,
                "matrix {via_matrix} vs pairs {via_pairs}"
            );
        }
    }

    #[test]
    fn psi_rejects_empty_sets_and_bad_indices() {
        let query = array![0.0, 0.0];
        let db = array![[1.0, 0.0], [0.0, 1.0]];
        let y = Interleaving::correct(1, 1);
        assert!(psi(&query.view(), &db.view(), &[], &[1], &y).is_err());
        assert!(psi(&query.view(), &db.view(), &[0], &[], &y).is_err());
        assert!(psi(&query.view(), &db.view(), &[0], &[7], &y).is_err());
    }
}
