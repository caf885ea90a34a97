//! Artist-level splits, ranking metrics, and the model-selection experiment.
//!
//! Experiments follow a fixed protocol: artists (never songs) are split
//! 40/30/30 into train/validation/test; the training songs form the fixed
//! database; every artist's relevant set is its top-k most similar
//! *training* artists; a metric is trained per `(C, loss)` grid point; the
//! grid point with the best validation mean AUC is then, and only then,
//! evaluated on the test songs. Each query song weighs equally in the mean.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};

use crate::cf::{self, RelevanceSets, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::mlr::{
    rank_database, ranking_loss, train, Interleaving, LossKind, MetricMatrix, Query, QuerySet,
    TrainConfig,
};
use crate::seeds;
use crate::vq;
use crate::Real;

/// One train/validation/test partition of the artists.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Songs belonging to a set of artists, ascending.
    pub fn songs_of(artists: &[usize], song_artist: &[usize]) -> Vec<usize> {
        let set: HashSet<usize> = artists.iter().copied().collect();
        song_artist
            .iter()
            .enumerate()
            .filter(|(_, a)| set.contains(a))
            .map(|(s, _)| s)
            .collect()
    }
}

/// Random artist splits, 40% train / 30% validation / 30% test (rounded),
/// deterministic given the seed.
pub fn make_splits(n_artists: usize, n_splits: usize, seed: u64) -> Result<Vec<Split>> {
    if n_artists < 10 {
        return Err(Error::InvalidArgument(format!(
            "splits need at least 10 artists, got {n_artists}"
        )));
    }
    let n_train = (0.4 * n_artists as f64).round() as usize;
    let n_val = (0.3 * n_artists as f64).round() as usize;
    let mut splits = Vec::with_capacity(n_splits);
    for i in 0..n_splits {
        let mut order: Vec<usize> = (0..n_artists).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut seeds::stream(seed, "splits", i as u64));
        let mut train: Vec<usize> = order[..n_train].to_vec();
        let mut validation: Vec<usize> = order[n_train..n_train + n_val].to_vec();
        let mut test: Vec<usize> = order[n_train + n_val..].to_vec();
        train.sort_unstable();
        validation.sort_unstable();
        test.sort_unstable();
        splits.push(Split {
            train,
            validation,
            test,
        });
    }
    Ok(splits)
}

/// Quality of one ranking; each metric is one minus its ranking loss.
#[derive(Debug, Clone, Copy)]
pub struct RankingMetrics<T> {
    pub auc: T,
    pub mrr: T,
    pub ndcg: T,
}

/// Scores a ranked result list against relevant/irrelevant sets.
///
/// `ranked` must be a permutation of `positive ∪ negative`.
pub fn evaluate_ranking<T: Real>(
    ranked: &[usize],
    positive: &[usize],
    negative: &[usize],
) -> Result<RankingMetrics<T>> {
    let pos: HashSet<usize> = positive.iter().copied().collect();
    let neg: HashSet<usize> = negative.iter().copied().collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyInput(
            "ranking evaluation needs non-empty relevant and irrelevant sets".into(),
        ));
    }
    if !pos.is_disjoint(&neg) {
        return Err(Error::InvalidArgument(
            "relevant and irrelevant sets overlap".into(),
        ));
    }
    if ranked.len() != pos.len() + neg.len() {
        return Err(Error::InvalidArgument(format!(
            "ranked list has {} items, expected {}",
            ranked.len(),
            pos.len() + neg.len()
        )));
    }

    let mut seen = HashSet::with_capacity(ranked.len());
    let mut counts = Vec::with_capacity(pos.len());
    let mut negatives_so_far = 0usize;
    for &item in ranked {
        if !seen.insert(item) {
            return Err(Error::InvalidArgument(format!(
                "item {item} appears twice in the ranking"
            )));
        }
        if pos.contains(&item) {
            counts.push(negatives_so_far);
        } else if neg.contains(&item) {
            negatives_so_far += 1;
        } else {
            return Err(Error::InvalidArgument(format!(
                "ranked item {item} is in neither set"
            )));
        }
    }

    let interleaving = Interleaving::new(counts, neg.len())?;
    Ok(RankingMetrics {
        auc: T::one() - ranking_loss(LossKind::Auc, &interleaving),
        mrr: T::one() - ranking_loss(LossKind::Mrr, &interleaving),
        ndcg: T::one() - ranking_loss(LossKind::Ndcg, &interleaving),
    })
}

/// Where an artist's relevance ordering comes from.
pub enum ArtistRelevance<'a, T: Real> {
    /// Dense similarity matrix; top-k is taken per split over train artists.
    Similarity(&'a SimilarityMatrix<T>),
    /// Full preference-ordered artist lists (most similar first); top-k is
    /// the first k entries that are training artists.
    OrderedLists(&'a [Vec<usize>]),
}

impl<'a, T: Real> ArtistRelevance<'a, T> {
    fn top_k(&self, artist: usize, train_artists: &[usize], k: usize) -> Vec<usize> {
        match self {
            ArtistRelevance::Similarity(s) => cf::top_k_relevant(s, artist, train_artists, k),
            ArtistRelevance::OrderedLists(lists) => {
                let train: HashSet<usize> = train_artists.iter().copied().collect();
                lists[artist]
                    .iter()
                    .copied()
                    .filter(|a| *a != artist && train.contains(a))
                    .take(k)
                    .collect()
            }
        }
    }
}

/// Dataset handed to [`run_experiment`].
pub struct ExperimentInput<'a, T: Real> {
    /// Raw representation vectors, one row per song (histograms or any
    /// fixed-dimensional features). PPK/PCA mapping happens inside, per
    /// split.
    pub features: ArrayView2<'a, T>,
    pub song_artist: &'a [usize],
    pub relevance: ArtistRelevance<'a, T>,
    pub n_artists: usize,
}

/// Protocol settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig<T> {
    pub c_grid: Vec<T>,
    pub losses: Vec<LossKind>,
    pub relevant_k: usize,
    pub n_splits: usize,
    pub seed: u64,
    /// Map histograms onto the unit sphere before (optional) PCA.
    pub ppk: bool,
    /// Fit PCA on training songs to this variance fraction, then apply it
    /// to every song.
    pub pca_variance: Option<T>,
    pub epsilon: T,
    pub max_outer: usize,
    pub max_inner: usize,
    pub eta0: T,
}

impl<T: Real> Default for ExperimentConfig<T> {
    fn default() -> Self {
        let base = TrainConfig::<T>::default();
        Self {
            c_grid: crate::mlr::default_c_grid(),
            losses: LossKind::ALL.to_vec(),
            relevant_k: 10,
            n_splits: 10,
            seed: 0,
            ppk: false,
            pca_variance: None,
            epsilon: base.epsilon,
            max_outer: base.max_outer,
            max_inner: base.max_inner,
            eta0: base.eta0,
        }
    }
}

/// Report stage of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validation,
    Test,
    EuclideanBaseline,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Validation => "validation",
            Stage::Test => "test",
            Stage::EuclideanBaseline => "euclidean",
        }
    }
}

/// One aggregated metrics row.
#[derive(Debug, Clone)]
pub struct ReportRow<T> {
    pub split: usize,
    pub stage: Stage,
    pub loss: Option<LossKind>,
    pub c: Option<T>,
    pub mean_auc: T,
    pub mean_mrr: T,
    pub mean_ndcg: T,
    pub n_queries: usize,
}

/// The grid point selected on one split, with its test result.
#[derive(Debug, Clone)]
pub struct SplitSelection<T> {
    pub split: usize,
    pub loss: LossKind,
    pub c: T,
    pub validation_auc: T,
    pub test_auc: T,
    pub euclidean_test_auc: T,
}

/// A test query's full database ranking, in global song indices.
#[derive(Debug, Clone)]
pub struct QueryRankingDump<T> {
    pub split: usize,
    pub query: usize,
    /// `(song, distance)` ascending by distance.
    pub ranking: Vec<(usize, T)>,
}

/// Everything an experiment produces.
pub struct ExperimentReport<T> {
    pub rows: Vec<ReportRow<T>>,
    pub selections: Vec<SplitSelection<T>>,
    pub test_auc_mean: T,
    pub test_auc_std: T,
    pub euclidean_auc_mean: T,
    pub euclidean_auc_std: T,
    pub test_rankings: Vec<QueryRankingDump<T>>,
}

impl<T: Real> ExperimentReport<T> {
    /// CSV with one row per (split, stage, loss, C).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,stage,loss,C,auc,mrr,ndcg,n_queries\n");
        for row in &self.rows {
            let loss = row.loss.map(|l| l.to_string()).unwrap_or_default();
            let c = row.c.map(|c| format!("{}", c.as_f64())).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6},{}",
                row.split,
                row.stage.name(),
                loss,
                c,
                row.mean_auc.as_f64(),
                row.mean_mrr.as_f64(),
                row.mean_ndcg.as_f64(),
                row.n_queries
            );
        }
        let _ = writeln!(
            out,
            "summary,test,,,{:.6},,,{}",
            self.test_auc_mean.as_f64(),
            self.selections.len()
        );
        let _ = writeln!(
            out,
            "summary,euclidean,,,{:.6},,,{}",
            self.euclidean_auc_mean.as_f64(),
            self.selections.len()
        );
        out
    }
}

struct StageEvaluation<T> {
    metrics: RankingMetrics<T>,
    n_queries: usize,
    rankings: Vec<(usize, Vec<(usize, T)>)>,
}

/// Ranks the database for each query and averages the metrics; queries
/// whose relevance sets are empty are skipped.
fn evaluate_stage<T: Real>(
    w: &MetricMatrix<T>,
    repr: &Array2<T>,
    db_songs: &[usize],
    local_of: &HashMap<usize, usize>,
    sets: &RelevanceSets,
    collect_rankings: bool,
) -> Result<StageEvaluation<T>> {
    let db_matrix = gather_rows(repr, db_songs);
    let mut sums = (T::zero(), T::zero(), T::zero());
    let mut used = 0usize;
    let mut rankings = Vec::new();

    for (qi, &song) in sets.queries.iter().enumerate() {
        let pos: Vec<usize> = sets.positive[qi].iter().map(|s| local_of[s]).collect();
        let neg: Vec<usize> = sets.negative[qi].iter().map(|s| local_of[s]).collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let ranked = rank_database(w, &repr.row(song), &db_matrix.view())?;
        let members: HashSet<usize> = pos.iter().chain(neg.iter()).copied().collect();
        let filtered: Vec<usize> = ranked
            .iter()
            .map(|&(i, _)| i)
            .filter(|i| members.contains(i))
            .collect();
        let metrics = evaluate_ranking::<T>(&filtered, &pos, &neg)?;
        sums.0 += metrics.auc;
        sums.1 += metrics.mrr;
        sums.2 += metrics.ndcg;
        used += 1;
        if collect_rankings {
            rankings.push((
                song,
                ranked
                    .into_iter()
                    .map(|(i, d)| (db_songs[i], d))
                    .collect(),
            ));
        }
    }
    if used == 0 {
        return Err(Error::EmptyInput(
            "no query in this stage has both relevant and irrelevant items".into(),
        ));
    }
    let n = T::real(used as f64);
    Ok(StageEvaluation {
        metrics: RankingMetrics {
            auc: sums.0 / n,
            mrr: sums.1 / n,
            ndcg: sums.2 / n,
        },
        n_queries: used,
        rankings,
    })
}

fn gather_rows<T: Real>(matrix: &Array2<T>, rows: &[usize]) -> Array2<T> {
    let mut out = Array2::<T>::zeros((rows.len(), matrix.ncols()));
    for (i, &r) in rows.iter().enumerate() {
        out.row_mut(i).assign(&matrix.row(r));
    }
    out
}

fn mean_std<T: Real>(values: &[T]) -> (T, T) {
    let n = values.len();
    let mean = values.iter().copied().sum::<T>() / T::real(n as f64);
    if n < 2 {
        return (mean, T::zero());
    }
    let var = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<T>()
        / T::real((n - 1) as f64);
    (mean, var.sqrt())
}

/// Runs the full protocol: per split, grid-train on training songs, select
/// on validation mean AUC, report on test. Also evaluates the plain
/// Euclidean distance on each split's test stage as a baseline.
pub fn run_experiment<T: Real>(
    input: &ExperimentInput<T>,
    cfg: &ExperimentConfig<T>,
) -> Result<ExperimentReport<T>> {
    if cfg.c_grid.is_empty() || cfg.losses.is_empty() {
        return Err(Error::InvalidArgument(
            "experiment needs non-empty C and loss grids".into(),
        ));
    }
    if input.song_artist.len() != input.features.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} songs in features, {} in the artist map",
            input.features.nrows(),
            input.song_artist.len()
        )));
    }

    let splits = make_splits(input.n_artists, cfg.n_splits, cfg.seed)?;
    let mut rows = Vec::new();
    let mut selections = Vec::new();
    let mut test_rankings = Vec::new();
    let mut test_aucs = Vec::new();
    let mut euclid_aucs = Vec::new();

    for (split_idx, split) in splits.iter().enumerate() {
        let result = run_split(input, cfg, split_idx, split)?;
        rows.extend(result.rows);
        test_aucs.push(result.selection.test_auc);
        euclid_aucs.push(result.selection.euclidean_test_auc);
        selections.push(result.selection);
        test_rankings.extend(result.test_rankings);
    }

    let (test_auc_mean, test_auc_std) = mean_std(&test_aucs);
    let (euclidean_auc_mean, euclidean_auc_std) = mean_std(&euclid_aucs);
    Ok(ExperimentReport {
        rows,
        selections,
        test_auc_mean,
        test_auc_std,
        euclidean_auc_mean,
        euclidean_auc_std,
        test_rankings,
    })
}

struct SplitResult<T> {
    rows: Vec<ReportRow<T>>,
    selection: SplitSelection<T>,
    test_rankings: Vec<QueryRankingDump<T>>,
}

fn run_split<T: Real>(
    input: &ExperimentInput<T>,
    cfg: &ExperimentConfig<T>,
    split_idx: usize,
    split: &Split,
) -> Result<SplitResult<T>> {
    // Database = training songs; queries come from all three stages.
    let db_songs = Split::songs_of(&split.train, input.song_artist);
    let val_songs = Split::songs_of(&split.validation, input.song_artist);
    let test_songs = Split::songs_of(&split.test, input.song_artist);
    if db_songs.is_empty() {
        return Err(Error::EmptyInput(format!(
            "split {split_idx} has no training songs"
        )));
    }

    // Relevant artists are always restricted to training artists.
    let artist_relevant: Vec<Vec<usize>> = (0..input.n_artists)
        .map(|a| input.relevance.top_k(a, &split.train, cfg.relevant_k))
        .collect();

    // Representation: optional PPK map, then PCA fit on training songs only.
    let repr = {
        let base = if cfg.ppk {
            vq::ppk_map_rows(&input.features)?
        } else {
            input.features.to_owned()
        };
        match cfg.pca_variance {
            Some(target) => {
                let train_rows = gather_rows(&base, &db_songs);
                let model = vq::pca_fit(&train_rows.view(), target)?;
                model.apply_rows(&base.view())?
            }
            None => base,
        }
    };

    let local_of: HashMap<usize, usize> =
        db_songs.iter().enumerate().map(|(l, &g)| (g, l)).collect();

    let train_sets = cf::song_relevance(
        &artist_relevant,
        input.song_artist,
        &db_songs,
        &db_songs,
    )?;
    let val_sets = cf::song_relevance(
        &artist_relevant,
        input.song_artist,
        &val_songs,
        &db_songs,
    )?;
    let test_sets = cf::song_relevance(
        &artist_relevant,
        input.song_artist,
        &test_songs,
        &db_songs,
    )?;

    // Training queries in the database's local index space.
    let queries: Vec<Query<T>> = train_sets
        .queries
        .iter()
        .enumerate()
        .map(|(qi, &song)| Query {
            features: repr.row(song).to_owned(),
            positive: train_sets.positive[qi].iter().map(|s| local_of[s]).collect(),
            negative: train_sets.negative[qi].iter().map(|s| local_of[s]).collect(),
        })
        .collect();
    let query_set = QuerySet::new(gather_rows(&repr, &db_songs), queries)?;

    let mut rows = Vec::new();
    let mut best: Option<(T, LossKind, T, MetricMatrix<T>)> = None;

    for &loss in &cfg.losses {
        for &c in &cfg.c_grid {
            let train_cfg = TrainConfig {
                c,
                loss,
                epsilon: cfg.epsilon,
                max_outer: cfg.max_outer,
                max_inner: cfg.max_inner,
                eta0: cfg.eta0,
                seed: cfg.seed,
            };
            let outcome = train(&query_set, &train_cfg)?;
            let eval = evaluate_stage(
                &outcome.metric,
                &repr,
                &db_songs,
                &local_of,
                &val_sets,
                false,
            )?;
            rows.push(ReportRow {
                split: split_idx,
                stage: Stage::Validation,
                loss: Some(loss),
                c: Some(c),
                mean_auc: eval.metrics.auc,
                mean_mrr: eval.metrics.mrr,
                mean_ndcg: eval.metrics.ndcg,
                n_queries: eval.n_queries,
            });
            let better = match &best {
                Some((best_auc, ..)) => eval.metrics.auc > *best_auc,
                None => true,
            };
            if better {
                best = Some((eval.metrics.auc, loss, c, outcome.metric));
            }
        }
    }

    let (validation_auc, loss, c, metric) = best.expect("grid is non-empty");

    // Test data is consulted only now, for the selected setting.
    let test_eval = evaluate_stage(&metric, &repr, &db_songs, &local_of, &test_sets, true)?;
    rows.push(ReportRow {
        split: split_idx,
        stage: Stage::Test,
        loss: Some(loss),
        c: Some(c),
        mean_auc: test_eval.metrics.auc,
        mean_mrr: test_eval.metrics.mrr,
        mean_ndcg: test_eval.metrics.ndcg,
        n_queries: test_eval.n_queries,
    });

    let euclid = MetricMatrix::identity(repr.ncols());
    let euclid_eval = evaluate_stage(&euclid, &repr, &db_songs, &local_of, &test_sets, false)?;
    rows.push(ReportRow {
        split: split_idx,
        stage: Stage::EuclideanBaseline,
        loss: None,
        c: None,
        mean_auc: euclid_eval.metrics.auc,
        mean_mrr: euclid_eval.metrics.mrr,
        mean_ndcg: euclid_eval.metrics.ndcg,
        n_queries: euclid_eval.n_queries,
    });

    let test_rankings = test_eval
        .rankings
        .into_iter()
        .map(|(query, ranking)| QueryRankingDump {
            split: split_idx,
            query,
            ranking,
        })
        .collect();

    Ok(SplitResult {
        rows,
        selection: SplitSelection {
            split: split_idx,
            loss,
            c,
            validation_auc,
            test_auc: test_eval.metrics.auc,
            euclidean_test_auc: euclid_eval.metrics.auc,
        },
        test_rankings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_of_ten_artists_are_4_3_3() {
        let splits = make_splits(10, 3, 5).unwrap();
        for s in &splits {
            assert_eq!(s.train.len(), 4);
            assert_eq!(s.validation.len(), 3);
            assert_eq!(s.test.len(), 3);
        }
    }

    #[test]
    fn splits_are_disjoint_and_cover_all_artists() {
        let splits = make_splits(23, 10, 9).unwrap();
        for s in &splits {
            let mut all: Vec<usize> = s
                .train
                .iter()
                .chain(s.validation.iter())
                .chain(s.test.iter())
                .copied()
                .collect();
            all.sort_unstable();
            let expect: Vec<usize> = (0..23).collect();
            assert_eq!(all, expect);
        }
    }

    #[test]
    fn splits_deterministic_and_seed_sensitive() {
        let a = make_splits(15, 4, 1).unwrap();
        let b = make_splits(15, 4, 1).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.train, y.train);
            assert_eq!(x.validation, y.validation);
            assert_eq!(x.test, y.test);
        }
        let c = make_splits(15, 4, 2).unwrap();
        assert!(a.iter().zip(c.iter()).any(|(x, y)| x.train != y.train));
    }

    #[test]
    fn splits_reject_too_few_artists() {
        assert!(make_splits(9, 1, 0).is_err());
    }

    #[test]
    fn perfect_ranking_scores_one_everywhere() {
        let m: RankingMetrics<f64> = evaluate_ranking(&[1, 2, 3, 4], &[1, 2], &[3, 4]).unwrap();
        assert_eq!(m.auc, 1.0);
        assert_eq!(m.mrr, 1.0);
        assert_eq!(m.ndcg, 1.0);
    }

    #[test]
    fn worst_ranking_scores_zero_auc() {
        let m: RankingMetrics<f64> = evaluate_ranking(&[3, 4, 1, 2], &[1, 2], &[3, 4]).unwrap();
        assert_eq!(m.auc, 0.0);
    }

    #[test]
    fn single_relevant_in_second_place() {
        // One relevant at position 2 of 3: one of two pairs correct.
        let m: RankingMetrics<f64> = evaluate_ranking(&[10, 20, 30], &[20], &[10, 30]).unwrap();
        assert_eq!(m.auc, 0.5);
        assert_eq!(m.mrr, 0.5);
    }

    #[test]
    fn evaluate_rejects_malformed_permutations() {
        assert!(evaluate_ranking::<f64>(&[1, 2], &[1], &[2, 3]).is_err());
        assert!(evaluate_ranking::<f64>(&[1, 1, 2], &[1], &[2]).is_err());
        assert!(evaluate_ranking::<f64>(&[1, 2, 9], &[1], &[2, 3]).is_err());
        assert!(evaluate_ranking::<f64>(&[1, 2], &[], &[1, 2]).is_err());
    }

    #[test]
    fn auc_equals_one_minus_auc_loss_of_induced_interleaving() {
        let ranked = [5, 1, 6, 2, 7, 8, 3];
        let pos = [1, 2, 3];
        let neg = [5, 6, 7, 8];
        let m: RankingMetrics<f64> = evaluate_ranking(&ranked, &pos, &neg).unwrap();
        // Interleaving: 1 has one negative before it, 2 has two, 3 has four.
        let y = Interleaving::new(vec![1, 2, 4], 4).unwrap();
        let loss: f64 = ranking_loss(LossKind::Auc, &y);
        assert_eq!(m.auc, 1.0 - loss);
    }

    #[test]
    fn random_orderings_average_half_auc() {
        use rand::seq::SliceRandom;
        let pos: Vec<usize> = (0..5).collect();
        let neg: Vec<usize> = (5..15).collect();
        let mut rng = seeds::stream(3, "test-random-auc", 0);
        let mut total = 0.0;
        let trials = 1000;
        for _ in 0..trials {
            let mut ranked: Vec<usize> = (0..15).collect();
            ranked.shuffle(&mut rng);
            let m: RankingMetrics<f64> = evaluate_ranking(&ranked, &pos, &neg).unwrap();
            total += m.auc;
        }
        let mean = total / trials as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean AUC = {mean}");
    }

    fn tiny_experiment_input() -> (Array2<f64>, Vec<usize>, Vec<Vec<usize>>) {
        // 12 artists × 2 songs in 3 dims; dimension 0 encodes the artist
        // "family" that also drives relevance.
        let n_artists = 12;
        let mut rng = seeds::stream(8, "test-exp", 0);
        use rand::Rng;
        let mut features = Vec::new();
        let mut song_artist = Vec::new();
        for a in 0..n_artists {
            let family = (a % 3) as f64 * 5.0;
            for _ in 0..2 {
                features.push([
                    family + rng.gen_range(-0.3..0.3),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                ]);
                song_artist.push(a);
            }
        }
        let features = Array2::from_shape_vec(
            (n_artists * 2, 3),
            features.into_iter().flatten().collect(),
        )
        .unwrap();
        // Preference lists: same-family artists first (by index), then the
        // rest (by index).
        let lists: Vec<Vec<usize>> = (0..n_artists)
            .map(|a| {
                let mut same: Vec<usize> =
                    (0..n_artists).filter(|&b| b != a && b % 3 == a % 3).collect();
                let mut other: Vec<usize> =
                    (0..n_artists).filter(|&b| b != a && b % 3 != a % 3).collect();
                same.append(&mut other);
                same
            })
            .collect();
        (features, song_artist, lists)
    }

    #[test]
    fn grid_of_size_one_is_selected() {
        let (features, song_artist, lists) = tiny_experiment_input();
        let input = ExperimentInput {
            features: features.view(),
            song_artist: &song_artist,
            relevance: ArtistRelevance::OrderedLists(&lists),
            n_artists: 12,
        };
        let cfg = ExperimentConfig {
            c_grid: vec![1.0],
            losses: vec![LossKind::Auc],
            relevant_k: 2,
            n_splits: 1,
            seed: 4,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&input, &cfg).unwrap();
        assert_eq!(report.selections.len(), 1);
        assert_eq!(report.selections[0].c, 1.0);
        assert_eq!(report.selections[0].loss, LossKind::Auc);
    }

    #[test]
    fn selected_validation_auc_is_the_grid_maximum() {
        let (features, song_artist, lists) = tiny_experiment_input();
        let input = ExperimentInput {
            features: features.view(),
            song_artist: &song_artist,
            relevance: ArtistRelevance::OrderedLists(&lists),
            n_artists: 12,
        };
        let cfg = ExperimentConfig {
            c_grid: vec![0.1, 10.0],
            losses: vec![LossKind::Auc, LossKind::Mrr],
            relevant_k: 2,
            n_splits: 1,
            seed: 4,
            max_outer: 20,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&input, &cfg).unwrap();
        let selected = &report.selections[0];
        for row in report
            .rows
            .iter()
            .filter(|r| r.stage == Stage::Validation)
        {
            assert!(selected.validation_auc >= row.mean_auc);
        }
    }

    #[test]
    fn report_csv_shape() {
        let (features, song_artist, lists) = tiny_experiment_input();
        let input = ExperimentInput {
            features: features.view(),
            song_artist: &song_artist,
            relevance: ArtistRelevance::OrderedLists(&lists),
            n_artists: 12,
        };
        let cfg = ExperimentConfig {
            c_grid: vec![1.0],
            losses: vec![LossKind::Auc],
            relevant_k: 2,
            n_splits: 2,
            seed: 4,
            max_outer: 10,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&input, &cfg).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "split,stage,loss,C,auc,mrr,ndcg,n_queries");
        // 2 splits × (1 validation + 1 test + 1 euclidean) + 2 summary rows.
        assert_eq!(lines.len(), 1 + 6 + 2);
        assert!(report.test_rankings.iter().all(|r| !r.ranking.is_empty()));
    }
}
