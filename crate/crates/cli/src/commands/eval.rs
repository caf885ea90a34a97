//! `qbex eval` — the split/grid model-selection experiment.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use qbex_core::eval::{run_experiment, ArtistRelevance, ExperimentConfig, ExperimentInput};

use crate::config::ConfigMap;

use super::{parse_grid, parse_losses, usage, CliError, CmdResult};

#[derive(Parser)]
pub struct Args {
    /// Song representation vectors (n_songs × d QXF): synthetic features or
    /// quantized histograms.
    #[arg(long)]
    pub features: PathBuf,
    /// Song→artist map TSV.
    #[arg(long)]
    pub songs: PathBuf,
    /// Preference-ordered artist relevance TSV.
    #[arg(long)]
    pub relevance: Option<PathBuf>,
    /// Raw collaborative-filter TSV; mutually exclusive with --relevance.
    #[arg(long)]
    pub cf: Option<PathBuf>,
    /// CF binarization threshold.
    #[arg(long)]
    pub threshold: Option<u64>,
    /// Relevant artists per query artist.
    #[arg(long)]
    pub relevant_k: Option<usize>,
    /// Output directory for report.csv (and optional ranking dumps).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated loss grid, e.g. "auc,mrr,ndcg".
    #[arg(long)]
    pub loss: Option<String>,
    /// Comma-separated C grid, e.g. "0.1,1,10,100".
    #[arg(long = "C")]
    pub c: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub splits: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Map histograms onto the unit sphere before PCA/MLR.
    #[arg(long)]
    pub ppk: bool,
    /// Per-split PCA compression to this variance fraction.
    #[arg(long)]
    pub pca_variance: Option<f64>,
    /// Also write per-query test rankings, one TSV per split.
    #[arg(long)]
    pub dump_rankings: bool,
}

pub fn run(args: Args) -> CmdResult {
    let cfg = ConfigMap::load(args.config.as_deref()).map_err(CliError::Data)?;
    let threshold = cfg.resolve(args.threshold, "threshold", 10u64)?;
    let relevant_k = cfg.resolve(args.relevant_k, "relevant-k", 10usize)?;
    let splits = cfg.resolve(args.splits, "splits", 3usize)?;
    let seed = cfg.resolve(args.seed, "seed", 42u64)?;
    let ppk = cfg.resolve_switch(args.ppk, "ppk")?;
    let pca_variance = cfg.resolve_opt(args.pca_variance, "pca-variance")?;
    let epsilon = cfg.resolve(args.epsilon, "epsilon", 0.01f64)?;
    let loss_raw = cfg.resolve(args.loss, "loss", "auc".to_string())?;
    let c_raw = cfg.resolve(args.c, "C", "0.1,1,10,100".to_string())?;

    let losses = parse_losses(&loss_raw)?;
    let c_grid = parse_grid(&c_raw)?;
    if let Some(target) = pca_variance {
        if !(target > 0.0 && target <= 1.0) {
            return Err(usage(format!("--pca-variance {target} outside (0, 1]")));
        }
    }

    let (features, catalog, lists) = super::train::load_dataset(
        &args.features,
        &args.songs,
        args.relevance.as_deref(),
        args.cf.as_deref(),
        threshold,
    )?;

    let input = ExperimentInput {
        features: features.view(),
        song_artist: &catalog.song_artist,
        relevance: ArtistRelevance::OrderedLists(&lists),
        n_artists: catalog.artists.len(),
    };
    let exp_cfg = ExperimentConfig {
        c_grid,
        losses,
        relevant_k,
        n_splits: splits,
        seed,
        ppk,
        pca_variance,
        epsilon,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&input, &exp_cfg).map_err(|e| CliError::Data(e.into()))?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(CliError::Data)?;
    std::fs::write(args.out.join("report.csv"), report.to_csv())
        .context("writing report.csv")
        .map_err(CliError::Data)?;

    if args.dump_rankings || cfg.resolve_switch(false, "dump-rankings")? {
        for split in 0..splits {
            let mut out = String::new();
            for dump in report.test_rankings.iter().filter(|d| d.split == split) {
                let query_id = catalog.songs.id(dump.query);
                for (rank, &(song, dist)) in dump.ranking.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{query_id}\t{}\t{}\t{dist:.6}",
                        rank + 1,
                        catalog.songs.id(song)
                    );
                }
            }
            std::fs::write(args.out.join(format!("rankings_split{split}.tsv")), out)
                .context("writing ranking dump")
                .map_err(CliError::Data)?;
        }
    }

    for sel in &report.selections {
        println!(
            "split {}: selected loss={} C={} (validation AUC {:.4}) -> test AUC {:.4}, euclidean {:.4}",
            sel.split, sel.loss, sel.c, sel.validation_auc, sel.test_auc, sel.euclidean_test_auc
        );
    }
    println!(
        "test AUC {:.4} ± {:.4} | euclidean baseline {:.4} ± {:.4} over {} splits",
        report.test_auc_mean,
        report.test_auc_std,
        report.euclidean_auc_mean,
        report.euclidean_auc_std,
        splits
    );
    Ok(())
}
