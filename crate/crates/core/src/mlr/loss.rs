//! Ranking losses over interleavings.
//!
//! A ranking of X⁺ ∪ X⁻ only matters through how many irrelevant items
//! precede each relevant one, so rankings are encoded as a non-decreasing
//! interleaving vector `k` of length |X⁺| with entries in `[0, |X⁻|]`:
//! `k[a]` irrelevant items sit before the a-th relevant item. The all-zeros
//! interleaving is the correct ranking.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::Real;

/// Which ranking loss Δ to optimize or report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Pairwise misordering rate (one minus the area under the ROC curve).
    Auc,
    /// One minus the reciprocal rank of the first relevant item.
    Mrr,
    /// One minus NDCG with binary gains and `1/log2(1+rank)` discounts,
    /// untruncated.
    Ndcg,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Auc, LossKind::Mrr, LossKind::Ndcg];

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Auc => "auc",
            LossKind::Mrr => "mrr",
            LossKind::Ndcg => "ndcg",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auc" => Ok(LossKind::Auc),
            "mrr" => Ok(LossKind::Mrr),
            "ndcg" => Ok(LossKind::Ndcg),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss {other:?}; expected auc, mrr, or ndcg"
            ))),
        }
    }
}

/// Ranking equivalence class: how many irrelevant items precede each
/// relevant item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaving {
    counts: Vec<usize>,
    neg_len: usize,
}

impl Interleaving {
    /// Validates monotonicity and the `[0, |X⁻|]` range.
    pub fn new(counts: Vec<usize>, neg_len: usize) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyInput("interleaving needs |X⁺| >= 1".into()));
        }
        for pair in counts.windows(2) {
            if pair[0] > pair[1] {
                return Err(Error::InvalidArgument(format!(
                    "interleaving counts must be non-decreasing, got {counts:?}"
                )));
            }
        }
        if *counts.last().unwrap() > neg_len {
            return Err(Error::InvalidArgument(format!(
                "interleaving count {} exceeds |X⁻| = {neg_len}",
                counts.last().unwrap()
            )));
        }
        Ok(Self { counts, neg_len })
    }

    /// The correct ranking: every relevant item before every irrelevant one.
    pub fn correct(pos_len: usize, neg_len: usize) -> Self {
        Self {
            counts: vec![0; pos_len],
            neg_len,
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn pos_len(&self) -> usize {
        self.counts.len()
    }

    pub fn neg_len(&self) -> usize {
        self.neg_len
    }

    pub fn is_correct(&self) -> bool {
        self.counts.iter().all(|&k| k == 0)
    }
}

/// Loss Δ of predicting this interleaving instead of a correct ranking;
/// always in `[0, 1]`, and 0 for the correct ranking.
pub fn ranking_loss<T: Real>(kind: LossKind, y: &Interleaving) -> T {
    let p = y.pos_len();
    let n = y.neg_len();
    match kind {
        LossKind::Auc => {
            if n == 0 {
                return T::zero();
            }
            let swapped: usize = y.counts().iter().sum();
            T::real(swapped as f64 / (p as f64 * n as f64))
        }
        LossKind::Mrr => {
            let first = y.counts()[0];
            T::one() - T::real(1.0 / (first as f64 + 1.0))
        }
        LossKind::Ndcg => {
            let mut dcg = T::zero();
            let mut idcg = T::zero();
            for (a, &k) in y.counts().iter().enumerate() {
                // The a-th relevant item (0-based) ends up at rank k + a + 1.
                dcg += T::real(1.0 / ((k + a + 2) as f64).log2());
                idcg += T::real(1.0 / ((a + 2) as f64).log2());
            }
            T::one() - dcg / idcg
        }
    }
}

/// Per-item loss increment `δ_a(k)` such that
/// `Δ(y) = Σ_a δ_a(k_a)` over a non-decreasing interleaving.
pub(crate) fn loss_item<T: Real>(
    kind: LossKind,
    a: usize,
    k: usize,
    pos_len: usize,
    neg_len: usize,
    idcg: T,
) -> T {
    match kind {
        LossKind::Auc => T::real(k as f64 / (pos_len as f64 * neg_len as f64)),
        LossKind::Mrr => {
            if a == 0 {
                T::one() - T::real(1.0 / (k as f64 + 1.0))
            } else {
                T::zero()
            }
        }
        LossKind::Ndcg => {
            let ideal = T::real(1.0 / ((a + 2) as f64).log2());
            let actual = T::real(1.0 / ((k + a + 2) as f64).log2());
            (ideal - actual) / idcg
        }
    }
}

pub(crate) fn ideal_dcg<T: Real>(pos_len: usize) -> T {
    (0..pos_len)
        .map(|a| T::real(1.0 / ((a + 2) as f64).log2()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correct_ranking_has_zero_loss_for_all_kinds() {
        let y = Interleaving::correct(3, 5);
        for kind in LossKind::ALL {
            assert_eq!(ranking_loss::<f64>(kind, &y), 0.0);
        }
    }

    #[test]
    fn fully_reversed_ranking_losses() {
        let y = Interleaving::new(vec![5, 5, 5], 5).unwrap();
        assert_eq!(ranking_loss::<f64>(LossKind::Auc, &y), 1.0);
        assert!((ranking_loss::<f64>(LossKind::Mrr, &y) - (1.0 - 1.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn single_relevant_item_after_one_irrelevant() {
        // |X⁺|=1, |X⁻|=2, k=(1): AUC loss 1/2, MRR loss 1/2,
        // NDCG loss 1 - 1/log2(3).
        let y = Interleaving::new(vec![1], 2).unwrap();
        assert_eq!(ranking_loss::<f64>(LossKind::Auc, &y), 0.5);
        assert_eq!(ranking_loss::<f64>(LossKind::Mrr, &y), 0.5);
        let ndcg: f64 = ranking_loss(LossKind::Ndcg, &y);
        assert!((ndcg - (1.0 - 1.0 / 3.0f64.log2())).abs() < 1e-12);
        assert!((ndcg - 0.369070246428542).abs() < 1e-9);
    }

    #[test]
    fn losses_decompose_over_items() {
        let cases = [
            Interleaving::new(vec![0, 2, 2, 4], 4).unwrap(),
            Interleaving::new(vec![1, 1], 3).unwrap(),
            Interleaving::new(vec![3], 3).unwrap(),
        ];
        for y in &cases {
            let idcg: f64 = ideal_dcg(y.pos_len());
            for kind in LossKind::ALL {
                let total: f64 = ranking_loss(kind, y);
                let sum: f64 = y
                    .counts()
                    .iter()
                    .enumerate()
                    .map(|(a, &k)| loss_item(kind, a, k, y.pos_len(), y.neg_len(), idcg))
                    .sum();
                assert!((total - sum).abs() < 1e-12, "{kind}: {total} vs {sum}");
            }
        }
    }

    #[test]
    fn interleaving_rejects_decreasing_or_out_of_range() {
        assert!(Interleaving::new(vec![2, 1], 3).is_err());
        assert!(Interleaving::new(vec![0, 4], 3).is_err());
        assert!(Interleaving::new(vec![], 3).is_err());
    }

    #[test]
    fn loss_kind_parses_and_prints() {
        assert_eq!("AUC".parse::<LossKind>().unwrap(), LossKind::Auc);
        assert_eq!("ndcg".parse::<LossKind>().unwrap(), LossKind::Ndcg);
        assert!("dcg".parse::<LossKind>().is_err());
        assert_eq!(LossKind::Mrr.to_string(), "mrr");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_interleaving() -> impl Strategy<Value = Interleaving> {
            (1usize..6, 1usize..7).prop_flat_map(|(p, n)| {
                proptest::collection::vec(0usize..=n, p).prop_map(move |mut counts| {
                    counts.sort_unstable();
                    Interleaving::new(counts, n).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn losses_bounded_and_zero_only_when_expected(y in arb_interleaving()) {
                for kind in LossKind::ALL {
                    let loss: f64 = ranking_loss(kind, &y);
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&loss), "{kind}: {loss}");
                    if y.is_correct() {
                        prop_assert_eq!(loss, 0.0);
                    }
                }
                // AUC and NDCG are positive as soon as any item is displaced;
                // MRR only notices the first relevant item.
                let any_displaced = !y.is_correct();
                if any_displaced {
                    prop_assert!(ranking_loss::<f64>(LossKind::Auc, &y) > 0.0);
                    prop_assert!(ranking_loss::<f64>(LossKind::Ndcg, &y) > 0.0);
                }
                let mrr: f64 = ranking_loss(LossKind::Mrr, &y);
                prop_assert_eq!(mrr > 0.0, y.counts()[0] > 0);
            }
        }
    }
}
