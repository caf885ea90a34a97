//! `qbex baseline` — the unsupervised rankers: TF-IDF/cosine over codeword
//! histograms and per-song GMMs compared by Monte-Carlo cross-entropy.

use std::path::PathBuf;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use ndarray::Array2;
use qbex_core::gmm::{fit_gmm, rank_by_gmm, GmmConfig, GmmModel};
use qbex_core::qxf;
use qbex_core::vq::{cosine_similarity, idf_fit, tfidf_apply};
use rayon::prelude::*;

use crate::config::ConfigMap;
use crate::io_util::{load_frames, print_ranking_tsv};

use super::{CliError, CmdResult};

#[derive(Subcommand)]
pub enum Args {
    /// Rank by cosine similarity of IDF-weighted histograms.
    Tfidf(TfidfArgs),
    /// Rank by Monte-Carlo cross-entropy between per-song GMMs.
    Gmm(GmmArgs),
}

#[derive(Parser)]
pub struct TfidfArgs {
    /// Database histograms (n × |V| QXF); IDF is fit on these unless
    /// --idf is given.
    #[arg(long)]
    pub histograms: PathBuf,
    /// Query histograms (m × |V| QXF); defaults to the database itself.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Load a previously saved IDF vector instead of fitting.
    #[arg(long)]
    pub idf: Option<PathBuf>,
    /// Save the fitted IDF vector (writes STEM.qxf and STEM.meta).
    #[arg(long)]
    pub save_idf: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub top_n: Option<usize>,
}

#[derive(Parser)]
pub struct GmmArgs {
    /// Manifest of per-song frame files for the database.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory of per-song .qxf frame files for the database.
    #[arg(long)]
    pub features_dir: Option<PathBuf>,
    /// Directory of previously saved per-song models (see --save-models);
    /// replaces fitting.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Manifest of query songs; defaults to the database itself.
    #[arg(long)]
    pub queries_manifest: Option<PathBuf>,
    /// Save the fitted database models, one stem per song id.
    #[arg(long)]
    pub save_models: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mixture components per song.
    #[arg(long)]
    pub components: Option<usize>,
    /// Monte-Carlo samples per query.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub top_n: Option<usize>,
}

pub fn run(args: Args) -> CmdResult {
    match args {
        Args::Tfidf(args) => run_tfidf(args),
        Args::Gmm(args) => run_gmm(args),
    }
}

fn run_tfidf(args: TfidfArgs) -> CmdResult {
    let cfg = ConfigMap::load(args.config.as_deref()).map_err(CliError::Data)?;
    let top_n = cfg.resolve(args.top_n, "top-n", 10usize)?;

    let database: Array2<f64> =
        qxf::read_matrix_path(&args.histograms).map_err(|e| CliError::Data(e.into()))?;
    let queries: Array2<f64> = match &args.queries {
        Some(path) => qxf::read_matrix_path(path).map_err(|e| CliError::Data(e.into()))?,
        None => database.clone(),
    };
    if queries.ncols() != database.ncols() {
        return Err(CliError::Data(anyhow!(
            "queries have {} bins, database has {}",
            queries.ncols(),
            database.ncols()
        )));
    }

    let idf = match &args.idf {
        Some(stem) => {
            let mut path = stem.as_os_str().to_os_string();
            path.push(".qxf");
            qxf::read_vector_path(PathBuf::from(path)).map_err(|e| CliError::Data(e.into()))?
        }
        None => idf_fit(&database.view()).map_err(|e| CliError::Data(e.into()))?,
    };
    if idf.len() != database.ncols() {
        return Err(CliError::Data(anyhow!(
            "IDF vector has {} bins, histograms have {}",
            idf.len(),
            database.ncols()
        )));
    }
    if let Some(stem) = &args.save_idf {
        crate::io_util::ensure_parent(stem).map_err(CliError::Data)?;
        let with_ext = |ext: &str| {
            let mut s = stem.as_os_str().to_os_string();
            s.push(ext);
            PathBuf::from(s)
        };
        qxf::write_vector_path(with_ext(".qxf"), &idf).map_err(|e| CliError::Data(e.into()))?;
        let mut meta = std::collections::BTreeMap::new();
        meta.insert("songs".to_string(), database.nrows().to_string());
        meta.insert("bins".to_string(), database.ncols().to_string());
        qxf::write_meta(with_ext(".meta"), &meta).map_err(|e| CliError::Data(e.into()))?;
    }

    let weighted_db: Vec<_> = database
        .rows()
        .into_iter()
        .map(|row| tfidf_apply(&row, &idf.view()))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Data(e.into()))?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (qi, query) in queries.rows().into_iter().enumerate() {
        let weighted_q =
            tfidf_apply(&query, &idf.view()).map_err(|e| CliError::Data(e.into()))?;
        let mut ranked: Vec<(usize, f64)> = weighted_db
            .iter()
            .enumerate()
            .map(|(i, x)| {
                cosine_similarity(&weighted_q.view(), &x.view()).map(|s| (i, s))
            })
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Data(e.into()))?;
        // Descending cosine, ties by index.
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("cosines are finite")
                .then(a.0.cmp(&b.0))
        });
        print_ranking_tsv(&mut out, &qi.to_string(), &ranked, None, top_n)
            .map_err(CliError::Data)?;
    }
    Ok(())
}

fn run_gmm(args: GmmArgs) -> CmdResult {
    let cfg = ConfigMap::load(args.config.as_deref()).map_err(CliError::Data)?;
    let components = cfg.resolve(args.components, "components", 8usize)?;
    let samples = cfg.resolve(args.samples, "samples", 2048usize)?;
    let seed = cfg.resolve(args.seed, "seed", 42u64)?;
    let top_n = cfg.resolve(args.top_n, "top-n", 10usize)?;

    let fit_all = |frames: &[Array2<f64>], label: &str| -> Result<Vec<GmmModel<f64>>, CliError> {
        frames
            .par_iter()
            .enumerate()
            .map(|(i, f)| {
                let gmm_cfg = GmmConfig {
                    components,
                    seed: seed.wrapping_add(i as u64),
                    ..GmmConfig::default()
                };
                fit_gmm(&f.view(), &gmm_cfg)
                    .map(|fit| fit.model)
                    .map_err(|e| CliError::Data(anyhow!("fitting {label} song {i}: {e}")))
            })
            .collect()
    };

    let sources = usize::from(args.models.is_some())
        + usize::from(args.manifest.is_some())
        + usize::from(args.features_dir.is_some());
    if sources != 1 {
        return Err(super::usage(
            "exactly one of --models, --manifest, and --features-dir is required",
        ));
    }

    let (db_ids, db_models) = if let Some(dir) = &args.models {
        // Saved models: stems of the .weights.qxf files, sorted.
        let mut stems: Vec<String> = std::fs::read_dir(dir)
            .map_err(|e| CliError::Data(anyhow!("listing {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .filter_map(|name| name.strip_suffix(".weights.qxf").map(str::to_string))
            .collect();
        stems.sort();
        if stems.is_empty() {
            return Err(CliError::Data(anyhow!(
                "no saved models in {}",
                dir.display()
            )));
        }
        let models: Vec<GmmModel<f64>> = stems
            .iter()
            .map(|stem| {
                qbex_core::gmm::load_model(dir.join(stem)).map_err(|e| CliError::Data(e.into()))
            })
            .collect::<Result<_, _>>()?;
        (stems, models)
    } else {
        let database = load_frames(args.manifest.as_deref(), args.features_dir.as_deref())
            .map_err(CliError::Data)?;
        let models = fit_all(&database.frames, "database")?;
        (database.song_ids, models)
    };

    if let Some(dir) = &args.save_models {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(anyhow!("creating {}: {e}", dir.display())))?;
        for (id, model) in db_ids.iter().zip(db_models.iter()) {
            qbex_core::gmm::save_model(dir.join(id), model)
                .map_err(|e| CliError::Data(e.into()))?;
        }
    }

    let (query_ids, query_models) = match &args.queries_manifest {
        Some(path) => {
            let set = load_frames(Some(path), None).map_err(CliError::Data)?;
            let models = fit_all(&set.frames, "query")?;
            (set.song_ids, models)
        }
        None => (db_ids.clone(), db_models.clone()),
    };

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (qi, model) in query_models.iter().enumerate() {
        let ranked = rank_by_gmm(model, &db_models, samples, seed.wrapping_add(qi as u64))
            .map_err(|e| CliError::Data(e.into()))?;
        print_ranking_tsv(&mut out, &query_ids[qi], &ranked, Some(&db_ids), top_n)
            .map_err(CliError::Data)?;
    }
    Ok(())
}
