//! `qbex train` — learn one metric over a dataset (no splits): every song
//! is both a database item and a training query.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Parser;
use ndarray::Array2;
use qbex_core::cf::{self, CfMatrix};
use qbex_core::mlr::{train, LossKind, Query, QuerySet, TrainConfig};
use qbex_core::qxf;

use crate::config::ConfigMap;
use crate::io_util::{load_catalog, load_relevance_lists, Catalog};

use super::{usage, CliError, CmdResult};

#[derive(Parser)]
pub struct Args {
    /// Song feature vectors (n_songs × d QXF).
    #[arg(long)]
    pub features: PathBuf,
    /// Song→artist map TSV.
    #[arg(long)]
    pub songs: PathBuf,
    /// Preference-ordered artist relevance TSV (artist, rank, artist).
    #[arg(long)]
    pub relevance: Option<PathBuf>,
    /// Raw collaborative-filter TSV (user, artist, count); mutually
    /// exclusive with --relevance.
    #[arg(long)]
    pub cf: Option<PathBuf>,
    /// CF binarization threshold.
    #[arg(long)]
    pub threshold: Option<u64>,
    /// Relevant artists per query artist.
    #[arg(long)]
    pub relevant_k: Option<usize>,
    /// Output stem; writes STEM.qxf, STEM.meta, STEM.trace.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub max_inner: Option<usize>,
    #[arg(long)]
    pub eta0: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Features, catalog, and full per-artist preference lists.
pub type Dataset = (Array2<f64>, Catalog, Vec<Vec<usize>>);

/// Loads features + catalog + full artist preference lists from either a
/// relevance TSV or a raw CF matrix.
pub fn load_dataset(
    features: &Path,
    songs: &Path,
    relevance: Option<&Path>,
    cf_path: Option<&Path>,
    threshold: u64,
) -> Result<Dataset, CliError> {
    if relevance.is_some() == cf_path.is_some() {
        return Err(usage("exactly one of --relevance and --cf is required"));
    }
    let features: Array2<f64> =
        qxf::read_matrix_path(features).map_err(|e| CliError::Data(e.into()))?;
    let catalog = load_catalog(songs).map_err(CliError::Data)?;
    if features.nrows() != catalog.song_artist.len() {
        return Err(CliError::Data(anyhow!(
            "{} feature rows but {} songs in the catalog",
            features.nrows(),
            catalog.song_artist.len()
        )));
    }

    let lists = if let Some(path) = relevance {
        load_relevance_lists(path, &catalog.artists).map_err(CliError::Data)?
    } else {
        let path = cf_path.expect("checked above");
        let reader = BufReader::new(
            File::open(path)
                .with_context(|| format!("opening {}", path.display()))
                .map_err(CliError::Data)?,
        );
        let (matrix, _users, cf_items) =
            CfMatrix::from_tsv(reader).map_err(|e| CliError::Data(e.into()))?;
        // CF items must cover the catalog's artists; indices may differ, so
        // remap through ids.
        let binary = matrix
            .binarize(threshold)
            .map_err(|e| CliError::Data(e.into()))?;
        let sim = cf::full_similarity::<f64>(&binary);
        let n = catalog.artists.len();
        let mut lists = vec![Vec::new(); n];
        let cf_index: Vec<usize> = (0..n)
            .map(|a| {
                cf_items.get(catalog.artists.id(a)).ok_or_else(|| {
                    CliError::Data(anyhow!(
                        "artist {:?} missing from the CF matrix",
                        catalog.artists.id(a)
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        for a in 0..n {
            // Order every other artist by similarity in catalog index space.
            let mut scored: Vec<(f64, usize)> = (0..n)
                .filter(|&b| b != a)
                .map(|b| (sim.get(cf_index[a], cf_index[b]), b))
                .collect();
            scored.sort_by(|x, y| {
                y.0.partial_cmp(&x.0)
                    .expect("similarities are finite")
                    .then(x.1.cmp(&y.1))
            });
            lists[a] = scored.into_iter().map(|(_, b)| b).collect();
        }
        lists
    };
    Ok((features, catalog, lists))
}

pub fn run(args: Args) -> CmdResult {
    let cfg = ConfigMap::load(args.config.as_deref()).map_err(CliError::Data)?;
    let threshold = cfg.resolve(args.threshold, "threshold", 10u64)?;
    let relevant_k = cfg.resolve(args.relevant_k, "relevant-k", 10usize)?;
    let defaults = TrainConfig::<f64>::default();
    let train_cfg = TrainConfig {
        c: cfg.resolve(args.c, "C", defaults.c)?,
        loss: cfg.resolve(args.loss, "loss", defaults.loss)?,
        epsilon: cfg.resolve(args.epsilon, "epsilon", defaults.epsilon)?,
        max_outer: cfg.resolve(args.max_outer, "max-outer", defaults.max_outer)?,
        max_inner: cfg.resolve(args.max_inner, "max-inner", defaults.max_inner)?,
        eta0: cfg.resolve(args.eta0, "eta0", defaults.eta0)?,
        seed: cfg.resolve(args.seed, "seed", 42u64)?,
    };

    let (features, catalog, lists) = load_dataset(
        &args.features,
        &args.songs,
        args.relevance.as_deref(),
        args.cf.as_deref(),
        threshold,
    )?;

    // Every song queries the full database; relevant artists are the top-k
    // of the full preference lists.
    let relevant: Vec<Vec<usize>> = lists
        .iter()
        .map(|l| l.iter().copied().take(relevant_k).collect())
        .collect();
    let all_songs: Vec<usize> = (0..features.nrows()).collect();
    let sets = cf::song_relevance(&relevant, &catalog.song_artist, &all_songs, &all_songs)
        .map_err(|e| CliError::Data(e.into()))?;

    let queries: Vec<Query<f64>> = sets
        .queries
        .iter()
        .enumerate()
        .map(|(qi, &song)| Query {
            features: features.row(song).to_owned(),
            positive: sets.positive[qi].clone(),
            negative: sets.negative[qi].clone(),
        })
        .collect();
    let query_set =
        QuerySet::new(features.clone(), queries).map_err(|e| CliError::Data(e.into()))?;
    if query_set.dropped() > 0 {
        eprintln!(
            "qbex: dropped {} queries with empty or overlapping relevance sets",
            query_set.dropped()
        );
    }

    let outcome = train(&query_set, &train_cfg).map_err(|e| CliError::Data(e.into()))?;

    let stem = &args.out;
    crate::io_util::ensure_parent(stem).map_err(CliError::Data)?;
    let with_ext = |ext: &str| -> PathBuf {
        let mut s = stem.as_os_str().to_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    qxf::write_matrix_path(with_ext(".qxf"), outcome.metric.matrix())
        .map_err(|e| CliError::Data(e.into()))?;

    let mut trace = String::from("iteration,objective\n");
    for (i, obj) in outcome.objective_trace.iter().enumerate() {
        let _ = writeln!(trace, "{},{}", i + 1, obj);
    }
    std::fs::write(with_ext(".trace.csv"), trace)
        .context("writing objective trace")
        .map_err(CliError::Data)?;

    let mut meta = BTreeMap::new();
    meta.insert("loss".into(), train_cfg.loss.to_string());
    meta.insert("C".into(), train_cfg.c.to_string());
    meta.insert("epsilon".into(), train_cfg.epsilon.to_string());
    meta.insert("iterations".into(), outcome.outer_iterations.to_string());
    meta.insert("converged".into(), outcome.converged.to_string());
    meta.insert("seed".into(), train_cfg.seed.to_string());
    meta.insert("dim".into(), query_set.dim().to_string());
    meta.insert("queries".into(), query_set.queries().len().to_string());
    meta.insert("dropped_queries".into(), outcome.dropped_queries.to_string());
    qxf::write_meta(with_ext(".meta"), &meta).map_err(|e| CliError::Data(e.into()))?;

    println!(
        "trained metric in {} outer iterations (converged: {})",
        outcome.outer_iterations, outcome.converged
    );
    Ok(())
}
