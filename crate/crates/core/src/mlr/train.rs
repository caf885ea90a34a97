//! Cutting-plane training of the metric.
//!
//! The margin constraints of the full problem (one per ranking per query)
//! are approximated with a single aggregated working set: each outer
//! iteration runs the separation oracle for every query, averages the
//! resulting `ψ(q, y_q) − ψ(q, ŷ_q)` matrices and losses into one
//! constraint, and stops once the new constraint is violated by no more
//! than the current slack plus ε. The inner problem
//!
//!   min_{W ⪰ 0}  tr(W) + C · max(0, max_c (δ_c − ⟨W, Ψ_c⟩))
//!
//! is solved by projected subgradient descent with step `η₀/t`, a PSD
//! projection after every step, and step-halving so the objective never
//! increases across accepted steps.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{frobenius_inner, min_eigenvalue};
use crate::Real;

use super::loss::{Interleaving, LossKind};
use super::oracle::separation_oracle;
use super::psi::psi;
use super::{project_psd, MetricMatrix};

/// One training query: its feature vector plus relevant/irrelevant database
/// row indices.
#[derive(Debug, Clone)]
pub struct Query<T> {
    pub features: Array1<T>,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

/// Validated training queries over a fixed database.
///
/// Queries with an empty relevant or irrelevant set, or overlapping sets,
/// cannot constrain the metric and are dropped (see [`QuerySet::dropped`]).
#[derive(Debug, Clone)]
pub struct QuerySet<T> {
    db: Array2<T>,
    queries: Vec<Query<T>>,
    dropped: usize,
}

impl<T: Real> QuerySet<T> {
    pub fn new(db: Array2<T>, raw: Vec<Query<T>>) -> Result<Self> {
        if db.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("training database features".into()));
        }
        let d = db.ncols();
        let n = db.nrows();
        let mut queries = Vec::with_capacity(raw.len());
        let mut dropped = 0;
        for q in raw {
            if q.features.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "query has {} dims, database has {d}",
                    q.features.len()
                )));
            }
            if q.features.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("query features".into()));
            }
            for &i in q.positive.iter().chain(q.negative.iter()) {
                if i >= n {
                    return Err(Error::IndexOutOfBounds(format!(
                        "query references item {i} outside database of {n} rows"
                    )));
                }
            }
            let mut seen = std::collections::HashSet::new();
            let duplicate = q
                .positive
                .iter()
                .chain(q.negative.iter())
                .any(|&i| !seen.insert(i));
            if q.positive.is_empty() || q.negative.is_empty() || duplicate {
                dropped += 1;
                continue;
            }
            queries.push(q);
        }
        if queries.is_empty() {
            return Err(Error::EmptyInput(
                "no valid training queries: every query needs non-empty, disjoint relevant and irrelevant sets".into(),
            ));
        }
        Ok(Self {
            db,
            queries,
            dropped,
        })
    }

    pub fn database(&self) -> &Array2<T> {
        &self.db
    }

    pub fn queries(&self) -> &[Query<T>] {
        &self.queries
    }

    /// Queries discarded for having empty or overlapping relevance sets.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn dim(&self) -> usize {
        self.db.ncols()
    }
}

/// Training hyper-parameters.
#[derive(Debug, Clone)]
pub struct TrainConfig<T> {
    /// Slack trade-off; larger C weighs ranking violations more heavily
    /// against the trace regularizer.
    pub c: T,
    pub loss: LossKind,
    /// Convergence tolerance of the cutting-plane stopping rule.
    pub epsilon: T,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Initial inner step size; step t uses `eta0 / t`.
    pub eta0: T,
    /// Recorded in model metadata; training itself is deterministic.
    pub seed: u64,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            c: T::one(),
            loss: LossKind::Auc,
            epsilon: T::real(0.01),
            max_outer: 100,
            max_inner: 500,
            eta0: T::real(0.1),
            seed: 0,
        }
    }
}

/// The default C grid for model selection, log-spaced from 1e-2 to 1e9.
pub fn default_c_grid<T: Real>() -> Vec<T> {
    (-2..=9).map(|e| T::real(10f64.powi(e))).collect()
}

/// A trained metric plus optimization diagnostics.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub metric: MetricMatrix<T>,
    /// Inner objective value after each outer iteration.
    pub objective_trace: Vec<T>,
    pub outer_iterations: usize,
    /// Whether the stopping rule fired before `max_outer`.
    pub converged: bool,
    /// Working-set slack ξ at termination.
    pub final_slack: T,
    /// Aggregated violation at termination.
    pub final_violation: T,
    /// Smallest eigenvalue of W sampled at every 10th PSD projection.
    pub psd_spot_checks: Vec<T>,
    /// Queries dropped during `QuerySet` construction.
    pub dropped_queries: usize,
}

struct ProjectionMonitor<T> {
    count: usize,
    spot_checks: Vec<T>,
}

impl<T: Real> ProjectionMonitor<T> {
    const EVERY: usize = 10;

    fn new() -> Self {
        Self {
            count: 0,
            spot_checks: Vec::new(),
        }
    }

    fn record(&mut self, w: &Array2<T>) {
        self.count += 1;
        if self.count.is_multiple_of(Self::EVERY) {
            let min = min_eigenvalue(&w.view()).expect("projected matrix is finite");
            self.spot_checks.push(min);
        }
    }
}

/// Learns a PSD metric by 1-slack cutting-plane optimization.
pub fn train<T: Real>(queries: &QuerySet<T>, cfg: &TrainConfig<T>) -> Result<TrainOutcome<T>> {
    if cfg.c.is_nan() || cfg.c <= T::zero() {
        return Err(Error::InvalidArgument(format!("C must be > 0, got {}", cfg.c)));
    }
    if cfg.epsilon.is_nan() || cfg.epsilon <= T::zero() {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be > 0, got {}",
            cfg.epsilon
        )));
    }

    let d = queries.dim();
    let n_queries = queries.queries().len();
    let inv_n = T::real(1.0 / n_queries as f64);
    let db = queries.database();

    let mut w = Array2::<T>::zeros((d, d));
    let mut working: Vec<(Array2<T>, T)> = Vec::new();
    let mut trace = Vec::new();
    let mut monitor = ProjectionMonitor::new();
    let mut converged = false;
    let mut outer_done = 0;
    let mut final_slack = T::zero();
    let mut final_violation = T::zero();

    for outer in 0..cfg.max_outer {
        outer_done = outer + 1;
        let metric = MetricMatrix::new_unchecked(w.clone());

        // Oracle per query; collection order is fixed, so aggregation is
        // deterministic regardless of thread count.
        let outcomes: Vec<(Array2<T>, T)> = queries
            .queries()
            .par_iter()
            .map(|q| -> Result<(Array2<T>, T)> {
                let oracle = separation_oracle(
                    &metric,
                    &q.features.view(),
                    &db.view(),
                    &q.positive,
                    &q.negative,
                    cfg.loss,
                )?;
                let correct =
                    Interleaving::correct(q.positive.len(), q.negative.len());
                let psi_correct =
                    psi(&q.features.view(), &db.view(), &q.positive, &q.negative, &correct)?;
                let psi_hat = psi(
                    &q.features.view(),
                    &db.view(),
                    &oracle.pos_order,
                    &oracle.neg_order,
                    &oracle.interleaving,
                )?;
                Ok((psi_correct - psi_hat, oracle.loss))
            })
            .collect::<Result<_>>()?;

        let mut psi_diff = Array2::<T>::zeros((d, d));
        let mut delta = T::zero();
        for (diff, loss) in &outcomes {
            psi_diff.scaled_add(inv_n, diff);
            delta += *loss * inv_n;
        }

        let violation = delta - frobenius_inner(&w.view(), &psi_diff.view());
        let slack = working
            .iter()
            .map(|(m, dl)| *dl - frobenius_inner(&w.view(), &m.view()))
            .fold(T::zero(), |acc, v| acc.max(v));

        final_slack = slack;
        final_violation = violation;
        if violation <= slack + cfg.epsilon {
            converged = true;
            break;
        }

        working.push((psi_diff, delta));
        let (next_w, objective) = inner_solve(&working, cfg, w, &mut monitor);
        w = next_w;
        trace.push(objective);
    }

    Ok(TrainOutcome {
        metric: MetricMatrix::new_unchecked(w),
        objective_trace: trace,
        outer_iterations: outer_done,
        converged,
        final_slack,
        final_violation,
        psd_spot_checks: monitor.spot_checks,
        dropped_queries: queries.dropped(),
    })
}

fn hinge_term<T: Real>(working: &[(Array2<T>, T)], w: &Array2<T>) -> (T, usize) {
    let mut best = T::zero();
    let mut idx = usize::MAX;
    for (i, (m, delta)) in working.iter().enumerate() {
        let v = *delta - frobenius_inner(&w.view(), &m.view());
        if v > best {
            best = v;
            idx = i;
        }
    }
    (best, idx)
}

fn objective<T: Real>(working: &[(Array2<T>, T)], c: T, w: &Array2<T>) -> T {
    let trace: T = w.diag().iter().copied().sum();
    trace + c * hinge_term(working, w).0
}

/// Projected subgradient descent on the working-set problem.
///
/// Subgradient steps are not guaranteed descent directions, so each step is
/// halved until the objective does not increase; if no halving helps, the
/// current iterate is already as good as this direction gets and the solve
/// stops early.
fn inner_solve<T: Real>(
    working: &[(Array2<T>, T)],
    cfg: &TrainConfig<T>,
    w0: Array2<T>,
    monitor: &mut ProjectionMonitor<T>,
) -> (Array2<T>, T) {
    const MAX_HALVINGS: usize = 24;
    let rel_tol = T::real(1e-6);
    let half = T::real(0.5);
    let d = w0.nrows();

    let mut w = w0;
    let mut obj = objective(working, cfg.c, &w);

    for t in 1..=cfg.max_inner {
        let (hinge, idx) = hinge_term(working, &w);
        let mut grad = Array2::<T>::eye(d);
        if hinge > T::zero() {
            grad.scaled_add(-cfg.c, &working[idx].0);
        }

        let mut eta = cfg.eta0 / T::real(t as f64);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut candidate = w.clone();
            candidate.scaled_add(-eta, &grad);
            let projected = project_psd(&candidate.view())
                .expect("finite iterates stay finite")
                .into_inner();
            monitor.record(&projected);
            let cand_obj = objective(working, cfg.c, &projected);
            if cand_obj <= obj {
                accepted = Some((projected, cand_obj));
                break;
            }
            eta *= half;
        }

        match accepted {
            Some((next, next_obj)) => {
                let change = (obj - next_obj).abs();
                w = next;
                obj = next_obj;
                if change <= rel_tol * obj.abs().max(T::one()) {
                    break;
                }
            }
            None => break,
        }
    }
    (w, obj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlr::{mahalanobis_distance, rank_database};
    use ndarray::array;
    use rand::Rng;

    fn simple_query_set() -> QuerySet<f64> {
        // Dimension 0 carries all the relevance signal; dimension 1 is
        // noise. Queries sit near their relevant items along dim 0.
        let mut rng = crate::seeds::stream(17, "test-train", 0);
        let n = 30;
        let mut rows = Vec::new();
        for i in 0..n {
            let informative = (i % 3) as f64 * 4.0;
            let noise: f64 = rng.gen_range(-3.0..3.0);
            rows.push([informative + rng.gen_range(-0.2..0.2), noise]);
        }
        let db = Array2::from_shape_vec((n, 2), rows.into_iter().flatten().collect()).unwrap();
        let queries = (0..n)
            .map(|i| {
                let positive: Vec<usize> =
                    (0..n).filter(|&j| j != i && j % 3 == i % 3).collect();
                let negative: Vec<usize> =
                    (0..n).filter(|&j| j != i && j % 3 != i % 3).collect();
                Query {
                    features: db.row(i).to_owned(),
                    positive,
                    negative,
                }
            })
            .collect();
        QuerySet::new(db, queries).unwrap()
    }

    #[test]
    fn large_epsilon_returns_zero_metric_after_one_iteration() {
        let qs = simple_query_set();
        let cfg = TrainConfig {
            epsilon: 10.0,
            ..TrainConfig::default()
        };
        let out = train(&qs, &cfg).unwrap();
        assert_eq!(out.outer_iterations, 1);
        assert!(out.converged);
        assert!(out.metric.matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn informative_dimension_dominates_learned_metric() {
        let qs = simple_query_set();
        let cfg = TrainConfig {
            c: 100.0,
            ..TrainConfig::default()
        };
        let out = train(&qs, &cfg).unwrap();
        let w = out.metric.matrix();
        assert!(
            w[[0, 0]] > 10.0 * w[[1, 1]].max(0.0),
            "W00 = {}, W11 = {}",
            w[[0, 0]],
            w[[1, 1]]
        );
    }

    #[test]
    fn cached_constraints_satisfied_within_slack_at_termination() {
        let qs = simple_query_set();
        let cfg = TrainConfig {
            c: 10.0,
            ..TrainConfig::default()
        };
        let out = train(&qs, &cfg).unwrap();
        assert!(out.converged);
        assert!(out.final_violation <= out.final_slack + cfg.epsilon + 1e-6);
    }

    #[test]
    fn psd_spot_checks_stay_above_tolerance() {
        let qs = simple_query_set();
        let out = train(&qs, &TrainConfig { c: 10.0, ..TrainConfig::default() }).unwrap();
        assert!(!out.psd_spot_checks.is_empty());
        for &min_eig in &out.psd_spot_checks {
            assert!(min_eig >= -1e-8, "min eigenvalue {min_eig}");
        }
    }

    #[test]
    fn objective_trace_is_recorded_per_outer_iteration() {
        let qs = simple_query_set();
        let out = train(&qs, &TrainConfig { c: 10.0, ..TrainConfig::default() }).unwrap();
        assert_eq!(out.objective_trace.len(), out.outer_iterations - 1);
        assert!(out.objective_trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn queryset_drops_invalid_queries() {
        let db = array![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let queries = vec![
            Query {
                features: array![0.0, 0.0],
                positive: vec![1],
                negative: vec![2],
            },
            Query {
                features: array![1.0, 0.0],
                positive: vec![],
                negative: vec![2],
            },
            Query {
                features: array![1.0, 0.0],
                positive: vec![1],
                negative: vec![1],
            },
        ];
        let qs = QuerySet::new(db, queries).unwrap();
        assert_eq!(qs.queries().len(), 1);
        assert_eq!(qs.dropped(), 2);
    }

    #[test]
    fn queryset_rejects_all_invalid() {
        let db = array![[0.0], [1.0]];
        let queries = vec![Query {
            features: array![0.0],
            positive: vec![],
            negative: vec![1],
        }];
        assert!(QuerySet::new(db, queries).is_err());
    }

    #[test]
    fn queryset_rejects_non_finite_features() {
        let db = array![[f64::NAN], [1.0]];
        let queries = vec![Query {
            features: array![0.0],
            positive: vec![0],
            negative: vec![1],
        }];
        assert!(QuerySet::new(db, queries).is_err());
    }

    #[test]
    fn feature_and_metric_scaling_cancel() {
        // Scaling features by α and W by 1/α² leaves scores, oracles and
        // rankings unchanged. α = 2 keeps the arithmetic exact.
        let qs = simple_query_set();
        let cfg = TrainConfig { c: 10.0, ..TrainConfig::default() };
        let out = train(&qs, &cfg).unwrap();
        let w = out.metric;

        let alpha = 2.0;
        let scaled_db = qs.database().mapv(|v| v * alpha);
        let scaled_w = MetricMatrix::new(w.matrix().mapv(|v| v / (alpha * alpha))).unwrap();

        for q in qs.queries().iter().take(5) {
            let scaled_q = q.features.mapv(|v| v * alpha);
            let base = rank_database(&w, &q.features.view(), &qs.database().view()).unwrap();
            let scaled =
                rank_database(&scaled_w, &scaled_q.view(), &scaled_db.view()).unwrap();
            let base_order: Vec<usize> = base.iter().map(|&(i, _)| i).collect();
            let scaled_order: Vec<usize> = scaled.iter().map(|&(i, _)| i).collect();
            assert_eq!(base_order, scaled_order);

            let o1 = separation_oracle(
                &w,
                &q.features.view(),
                &qs.database().view(),
                &q.positive,
                &q.negative,
                LossKind::Auc,
            )
            .unwrap();
            let o2 = separation_oracle(
                &scaled_w,
                &scaled_q.view(),
                &scaled_db.view(),
                &q.positive,
                &q.negative,
                LossKind::Auc,
            )
            .unwrap();
            assert_eq!(o1.interleaving.counts(), o2.interleaving.counts());
            assert!((o1.violation - o2.violation).abs() < 1e-9);
        }

        let q = &qs.queries()[0];
        let x = qs.database().row(1);
        let dist = mahalanobis_distance(&w, &q.features.view(), &x).unwrap();
        let scaled_x = scaled_db.row(1);
        let scaled_q = q.features.mapv(|v| v * alpha);
        let dist2 = mahalanobis_distance(&scaled_w, &scaled_q.view(), &scaled_x).unwrap();
        assert!((dist - dist2).abs() < 1e-9);
    }
}
