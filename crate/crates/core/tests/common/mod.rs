//! Reference implementations used to validate the optimized paths.
//!
//! Everything here is written straight from definitions: full enumeration,
//! explicit pair sums, no shared code with the library internals it checks.

use ndarray::{Array1, Array2};
use qbex_core::mlr::LossKind;

/// An item in a fully spelled-out ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranked {
    /// Index into the relevant feature list.
    Pos(usize),
    /// Index into the irrelevant feature list.
    Neg(usize),
}

/// Point-wise score `-(q-x)ᵀ W (q-x)`, written out longhand.
pub fn raw_score(w: &Array2<f64>, q: &Array1<f64>, x: &Array1<f64>) -> f64 {
    let d = q.len();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            total += (q[i] - x[i]) * w[[i, j]] * (q[j] - x[j]);
        }
    }
    -total
}

/// Loss Δ of a fully spelled-out ranking, straight from each measure's
/// definition.
pub fn loss_of_ranking(kind: LossKind, ranking: &[Ranked], p: usize, n: usize) -> f64 {
    match kind {
        LossKind::Auc => {
            // Fraction of (relevant, irrelevant) pairs in the wrong order.
            let mut swapped = 0usize;
            for (pos_rank, a) in ranking.iter().enumerate() {
                if matches!(a, Ranked::Pos(_)) {
                    swapped += ranking[..pos_rank]
                        .iter()
                        .filter(|r| matches!(r, Ranked::Neg(_)))
                        .count();
                }
            }
            swapped as f64 / (p * n) as f64
        }
        LossKind::Mrr => {
            let first = ranking
                .iter()
                .position(|r| matches!(r, Ranked::Pos(_)))
                .expect("a relevant item exists");
            1.0 - 1.0 / (first as f64 + 1.0)
        }
        LossKind::Ndcg => {
            let mut dcg = 0.0;
            for (idx, r) in ranking.iter().enumerate() {
                if matches!(r, Ranked::Pos(_)) {
                    dcg += 1.0 / ((idx + 2) as f64).log2();
                }
            }
            let idcg: f64 = (0..p).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
            1.0 - dcg / idcg
        }
    }
}

/// `⟨W, ψ(q, y)⟩` via the pairwise decomposition: a signed average of
/// point-wise score differences over all relevant × irrelevant pairs.
pub fn psi_score_of_ranking(
    ranking: &[Ranked],
    pos_scores: &[f64],
    neg_scores: &[f64],
) -> f64 {
    let p = pos_scores.len();
    let n = neg_scores.len();
    let mut position = vec![0usize; p];
    let mut neg_position = vec![0usize; n];
    for (idx, r) in ranking.iter().enumerate() {
        match *r {
            Ranked::Pos(a) => position[a] = idx,
            Ranked::Neg(b) => neg_position[b] = idx,
        }
    }
    let mut total = 0.0;
    for a in 0..p {
        for b in 0..n {
            let y_ij = if position[a] < neg_position[b] { 1.0 } else { -1.0 };
            total += y_ij * (pos_scores[a] - neg_scores[b]);
        }
    }
    total / (p * n) as f64
}

fn permutations(items: &[Ranked]) -> Vec<Vec<Ranked>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// The exact separation-oracle value: maximum of
/// `Δ(y_q, y) + ⟨W, ψ(q,y)⟩ − ⟨W, ψ(q,y_q)⟩` over every permutation of
/// X⁺ ∪ X⁻ (not just monotone interleavings).
pub fn brute_force_max_violation(
    w: &Array2<f64>,
    q: &Array1<f64>,
    pos: &[Array1<f64>],
    neg: &[Array1<f64>],
    kind: LossKind,
) -> f64 {
    let pos_scores: Vec<f64> = pos.iter().map(|x| raw_score(w, q, x)).collect();
    let neg_scores: Vec<f64> = neg.iter().map(|x| raw_score(w, q, x)).collect();
    let p = pos.len();
    let n = neg.len();

    let mut items: Vec<Ranked> = (0..p).map(Ranked::Pos).collect();
    items.extend((0..n).map(Ranked::Neg));

    let correct: Vec<Ranked> = items.clone();
    let correct_score = psi_score_of_ranking(&correct, &pos_scores, &neg_scores);

    let mut best = f64::NEG_INFINITY;
    for ranking in permutations(&items) {
        let h = loss_of_ranking(kind, &ranking, p, n)
            + psi_score_of_ranking(&ranking, &pos_scores, &neg_scores)
            - correct_score;
        if h > best {
            best = h;
        }
    }
    best
}
