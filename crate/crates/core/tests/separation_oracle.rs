//! The dynamic-programming oracle against exhaustive enumeration.
//!
//! The DP searches only non-decreasing interleavings over score-sorted item
//! lists; the reference maximizes over every permutation of X⁺ ∪ X⁻, so
//! agreement here also validates the score-sorted exchange argument.

mod common;

use common::brute_force_max_violation;
use ndarray::{Array1, Array2};
use qbex_core::mlr::{separation_oracle, LossKind, MetricMatrix};
use qbex_core::seeds;
use rand::Rng;

struct Instance {
    w: Array2<f64>,
    query: Array1<f64>,
    db: Array2<f64>,
    pos: Vec<usize>,
    neg: Vec<usize>,
}

fn random_instance(seed: u64) -> Instance {
    let mut rng = seeds::stream(seed, "oracle-instance", 0);
    let d = rng.gen_range(2..=4);
    let p = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=4);

    // Random PSD W = A Aᵀ, occasionally zero.
    let w = if rng.gen_range(0..10) == 0 {
        Array2::<f64>::zeros((d, d))
    } else {
        let a = Array2::<f64>::from_shape_fn((d, d), |_| rng.gen_range(-1.0..1.0));
        a.dot(&a.t())
    };

    let query = Array1::from_shape_fn(d, |_| rng.gen_range(-2.0..2.0));
    let db = Array2::<f64>::from_shape_fn((p + n, d), |_| rng.gen_range(-2.0..2.0));
    Instance {
        w,
        query,
        db,
        pos: (0..p).collect(),
        neg: (p..p + n).collect(),
    }
}

fn check_instance(inst: &Instance, kind: LossKind) {
    let metric = MetricMatrix::new(inst.w.clone()).unwrap();
    let outcome = separation_oracle(
        &metric,
        &inst.query.view(),
        &inst.db.view(),
        &inst.pos,
        &inst.neg,
        kind,
    )
    .unwrap();

    let pos_features: Vec<Array1<f64>> =
        inst.pos.iter().map(|&i| inst.db.row(i).to_owned()).collect();
    let neg_features: Vec<Array1<f64>> =
        inst.neg.iter().map(|&i| inst.db.row(i).to_owned()).collect();
    let reference =
        brute_force_max_violation(&inst.w, &inst.query, &pos_features, &neg_features, kind);

    assert!(
        (outcome.violation - reference).abs() < 1e-9,
        "{kind}: dp violation {} vs brute force {reference}",
        outcome.violation
    );
}

#[test]
fn dp_matches_brute_force_on_random_instances() {
    for seed in 0..200 {
        let inst = random_instance(seed);
        for kind in LossKind::ALL {
            check_instance(&inst, kind);
        }
    }
}

#[test]
fn dp_matches_brute_force_with_zero_metric() {
    // W = 0 makes every score zero; the oracle must still find the
    // loss-maximizing interleaving.
    for seed in 300..320 {
        let mut inst = random_instance(seed);
        inst.w.fill(0.0);
        for kind in LossKind::ALL {
            check_instance(&inst, kind);
        }
    }
}

#[test]
fn reported_violation_matches_its_own_interleaving() {
    // The violation the oracle reports must equal H evaluated at the
    // interleaving it returns, recomputed from scratch.
    use common::{loss_of_ranking, psi_score_of_ranking, raw_score, Ranked};

    for seed in 500..540 {
        let inst = random_instance(seed);
        let metric = MetricMatrix::new(inst.w.clone()).unwrap();
        for kind in LossKind::ALL {
            let outcome = separation_oracle(
                &metric,
                &inst.query.view(),
                &inst.db.view(),
                &inst.pos,
                &inst.neg,
                kind,
            )
            .unwrap();

            // Spell the interleaving out as a full ranking over the
            // oracle's own item orders.
            let p = outcome.pos_order.len();
            let n = outcome.neg_order.len();
            let counts = outcome.interleaving.counts();
            let mut ranking = Vec::with_capacity(p + n);
            let mut b = 0usize;
            for (a, &k) in counts.iter().enumerate() {
                while b < k {
                    ranking.push(Ranked::Neg(b));
                    b += 1;
                }
                ranking.push(Ranked::Pos(a));
            }
            while b < n {
                ranking.push(Ranked::Neg(b));
                b += 1;
            }

            let pos_scores: Vec<f64> = outcome
                .pos_order
                .iter()
                .map(|&i| raw_score(&inst.w, &inst.query, &inst.db.row(i).to_owned()))
                .collect();
            let neg_scores: Vec<f64> = outcome
                .neg_order
                .iter()
                .map(|&i| raw_score(&inst.w, &inst.query, &inst.db.row(i).to_owned()))
                .collect();

            let correct: Vec<Ranked> = (0..p)
                .map(Ranked::Pos)
                .chain((0..n).map(Ranked::Neg))
                .collect();
            let h = loss_of_ranking(kind, &ranking, p, n)
                + psi_score_of_ranking(&ranking, &pos_scores, &neg_scores)
                - psi_score_of_ranking(&correct, &pos_scores, &neg_scores);
            assert!(
                (outcome.violation - h).abs() < 1e-9,
                "{kind}: reported {} vs recomputed {h}",
                outcome.violation
            );

            let loss_direct = loss_of_ranking(kind, &ranking, p, n);
            assert!((outcome.loss - loss_direct).abs() < 1e-12);
        }
    }
}
