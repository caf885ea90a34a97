//! Margin-rescaling separation oracle.
//!
//! For a query with current metric W, the oracle finds the ranking
//! maximizing `Δ(y_q, y) + ⟨W, ψ(q,y)⟩`. With relevant and irrelevant items
//! each held in descending point-wise score order, the maximizer is a
//! non-decreasing interleaving, and both Δ and the score decompose per
//! relevant item:
//!
//!   c_a(k) = δ_a(k) + [(N − 2k)·s_a − (Σ_{b>k} t_b − Σ_{b≤k} t_b)] / (PN)
//!
//! so a dynamic program over `M_a(k) = c_a(k) + max_{k'≤k} M_{a−1}(k')`
//! with running prefix maxima finds the argmax in O(|X⁺|·|X⁻|).

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::Real;

use super::loss::{ideal_dcg, loss_item, ranking_loss, Interleaving, LossKind};
use super::{pointwise_score, MetricMatrix};

/// The most violated ranking for one query, with the item orders the
/// interleaving refers to.
#[derive(Debug, Clone)]
pub struct OracleOutcome<T> {
    pub interleaving: Interleaving,
    /// Relevant database indices, descending point-wise score.
    pub pos_order: Vec<usize>,
    /// Irrelevant database indices, descending point-wise score.
    pub neg_order: Vec<usize>,
    /// Δ(y_q, ŷ).
    pub loss: T,
    /// `Δ + ⟨W, ψ(q,ŷ) − ψ(q,y_q)⟩`; non-positive means no ranking beats
    /// the correct one by more than its margin.
    pub violation: T,
}

/// Core argmax over interleavings, driven only by point-wise scores.
///
/// `pos_scores` and `neg_scores` must be sorted descending. Returns the
/// maximizing interleaving and its violation value.
pub fn oracle_over_scores<T: Real>(
    pos_scores: &[T],
    neg_scores: &[T],
    kind: LossKind,
) -> Result<(Interleaving, T)> {
    let p = pos_scores.len();
    let n = neg_scores.len();
    if p == 0 || n == 0 {
        return Err(Error::EmptyInput(
            "separation oracle needs non-empty relevant and irrelevant sets".into(),
        ));
    }
    debug_assert!(pos_scores.windows(2).all(|w| w[0] >= w[1]));
    debug_assert!(neg_scores.windows(2).all(|w| w[0] >= w[1]));

    let pn = T::real(p as f64 * n as f64);
    let idcg: T = ideal_dcg(p);

    // Prefix sums of irrelevant scores: t_pre[k] = Σ_{b<k} t_b.
    let mut t_pre = vec![T::zero(); n + 1];
    for (b, &t) in neg_scores.iter().enumerate() {
        t_pre[b + 1] = t_pre[b] + t;
    }
    let t_tot = t_pre[n];

    let item = |a: usize, k: usize| -> T {
        let s_a = pos_scores[a];
        let score = (T::real(n as f64 - 2.0 * k as f64) * s_a
            - (t_tot - t_pre[k] - t_pre[k]))
            / pn;
        loss_item(kind, a, k, p, n, idcg) + score
    };

    // DP with backpointers; ties prefer the smaller k.
    let mut current: Vec<T> = (0..=n).map(|k| item(0, k)).collect();
    let mut choices: Vec<Vec<u32>> = Vec::with_capacity(p.saturating_sub(1));
    for a in 1..p {
        // best_prev[k] = max_{k'<=k} current[k'] with its argmin k'.
        let mut best_val = current[0];
        let mut best_k = 0u32;
        let mut choice_row = vec![0u32; n + 1];
        let mut next = vec![T::zero(); n + 1];
        for k in 0..=n {
            if current[k] > best_val {
                best_val = current[k];
                best_k = k as u32;
            }
            choice_row[k] = best_k;
            next[k] = item(a, k) + best_val;
        }
        choices.push(choice_row);
        current = next;
    }

    let mut last_k = 0usize;
    let mut best = current[0];
    for (k, &v) in current.iter().enumerate() {
        if v > best {
            best = v;
            last_k = k;
        }
    }

    let mut counts = vec![0usize; p];
    counts[p - 1] = last_k;
    for a in (1..p).rev() {
        counts[a - 1] = choices[a - 1][counts[a]] as usize;
    }

    // Violation relative to the correct ranking's score (Δ there is 0).
    let n_t = T::real(n as f64);
    let base: T = pos_scores.iter().map(|&s| (n_t * s - t_tot) / pn).sum();
    let violation = best - base;
    Ok((Interleaving::new(counts, n)?, violation))
}

/// Runs the oracle for one query against database rows.
pub fn separation_oracle<T: Real>(
    w: &MetricMatrix<T>,
    query: &ArrayView1<T>,
    db: &ArrayView2<T>,
    pos: &[usize],
    neg: &[usize],
    kind: LossKind,
) -> Result<OracleOutcome<T>> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyInput(
            "separation oracle needs non-empty relevant and irrelevant sets".into(),
        ));
    }

    let score_sorted = |items: &[usize]| -> Result<(Vec<usize>, Vec<T>)> {
        let mut scored: Vec<(usize, T)> = items
            .iter()
            .map(|&i| {
                if i >= db.nrows() {
                    return Err(Error::IndexOutOfBounds(format!(
                        "item {i} outside database of {} rows",
                        db.nrows()
                    )));
                }
                Ok((i, pointwise_score(w, query, &db.row(i))?))
            })
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then(a.0.cmp(&b.0))
        });
        Ok(scored.into_iter().unzip())
    };

    let (pos_order, pos_scores) = score_sorted(pos)?;
    let (neg_order, neg_scores) = score_sorted(neg)?;
    let (interleaving, violation) = oracle_over_scores(&pos_scores, &neg_scores, kind)?;
    let loss = ranking_loss(kind, &interleaving);
    Ok(OracleOutcome {
        interleaving,
        pos_order,
        neg_order,
        loss,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_traced_three_candidate_instance() {
        // |X⁺|=1, |X⁻|=2, s = 0, t = [1, -1], AUC loss. The three
        // interleavings k = 0, 1, 2 score H = 0, 1.5, 1.
        let (y, violation) = oracle_over_scores(&[0.0f64], &[1.0, -1.0], LossKind::Auc).unwrap();
        assert_eq!(y.counts(), &[1]);
        assert!((violation - 1.5).abs() < 1e-12);
    }

    #[test]
    fn separated_scores_leave_no_violation() {
        // Every relevant score beats every irrelevant score by more than 1,
        // so no ranking can outscore the correct one by its margin.
        let pos = [0.0f64, -0.1];
        let neg = [-1.5f64, -2.0, -3.0];
        for kind in LossKind::ALL {
            let (y, violation) = oracle_over_scores(&pos, &neg, kind).unwrap();
            assert!(y.is_correct(), "{kind}: {:?}", y.counts());
            assert!(violation <= 0.0, "{kind}: {violation}");
        }
    }

    #[test]
    fn oracle_rejects_empty_sets() {
        assert!(oracle_over_scores::<f64>(&[], &[1.0], LossKind::Auc).is_err());
        assert!(oracle_over_scores::<f64>(&[1.0], &[], LossKind::Auc).is_err());
    }
}
