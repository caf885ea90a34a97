//! `qbex codebook` — train a codeword dictionary over descriptor frames.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Parser;
use ndarray::{Array2, Axis};
use qbex_core::qxf;
use qbex_core::seeds;
use qbex_core::vq::train_codebook;
use rand::Rng;

use crate::config::ConfigMap;
use crate::io_util::load_frames;

use super::{usage, CliError, CmdResult};

#[derive(Parser)]
pub struct Args {
    /// Manifest of per-song frame files (song_id<TAB>path).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory of per-song .qxf frame files (song id = file stem).
    #[arg(long)]
    pub features_dir: Option<PathBuf>,
    /// Output stem; writes STEM.centers.qxf, STEM.mu.qxf, STEM.sigma.qxf,
    /// STEM.meta.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of codewords.
    #[arg(long)]
    pub codebook_size: Option<usize>,
    /// Sample one contiguous run of this many frames per song before
    /// pooling (0 = use every frame).
    #[arg(long)]
    pub sample_frames: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: Args) -> CmdResult {
    let cfg = ConfigMap::load(args.config.as_deref()).map_err(CliError::Data)?;
    let size = cfg.resolve(args.codebook_size, "codebook-size", 64usize)?;
    let sample_frames = cfg.resolve(args.sample_frames, "sample-frames", 0usize)?;
    let seed = cfg.resolve(args.seed, "seed", 42u64)?;

    if args.manifest.is_some() == args.features_dir.is_some() {
        return Err(usage("exactly one of --manifest and --features-dir is required"));
    }
    let set = load_frames(args.manifest.as_deref(), args.features_dir.as_deref())
        .map_err(CliError::Data)?;

    let dim = set.frames[0].ncols();
    for (song, frames) in set.song_ids.iter().zip(set.frames.iter()) {
        if frames.ncols() != dim {
            return Err(CliError::Data(anyhow::anyhow!(
                "song {song} has {} feature dims, expected {dim}",
                frames.ncols()
            )));
        }
    }

    // Pool the bag, optionally sampling one contiguous window per song.
    let mut bag_rows: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (idx, frames) in set.frames.iter().enumerate() {
        let take = if sample_frames == 0 || frames.nrows() <= sample_frames {
            frames.view()
        } else {
            let mut rng = seeds::stream(seed, "codebook-sample", idx as u64);
            let start = rng.gen_range(0..=frames.nrows() - sample_frames);
            frames.slice_axis(Axis(0), ndarray::Slice::from(start..start + sample_frames))
        };
        for row in take.rows() {
            bag_rows.extend(row.iter());
            n_rows += 1;
        }
    }
    let bag = Array2::from_shape_vec((n_rows, dim), bag_rows)
        .map_err(|e| CliError::Data(anyhow::anyhow!("assembling frame bag: {e}")))?;

    let codebook =
        train_codebook(&bag.view(), size, seed).map_err(|e| CliError::Data(e.into()))?;

    let stem = &args.out;
    crate::io_util::ensure_parent(stem).map_err(CliError::Data)?;
    let with_ext = |ext: &str| -> PathBuf {
        let mut s = stem.as_os_str().to_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    qxf::write_matrix_path(with_ext(".centers.qxf"), codebook.centers())
        .map_err(|e| CliError::Data(e.into()))?;
    qxf::write_vector_path(with_ext(".mu.qxf"), codebook.mu())
        .map_err(|e| CliError::Data(e.into()))?;
    qxf::write_vector_path(with_ext(".sigma.qxf"), codebook.sigma())
        .map_err(|e| CliError::Data(e.into()))?;

    let mut meta = BTreeMap::new();
    meta.insert("size".into(), size.to_string());
    meta.insert("dim".into(), dim.to_string());
    meta.insert("seed".into(), seed.to_string());
    meta.insert("sample_frames".into(), sample_frames.to_string());
    meta.insert("source_frames".into(), n_rows.to_string());
    meta.insert("source_songs".into(), set.song_ids.len().to_string());
    qxf::write_meta(with_ext(".meta"), &meta).map_err(|e| CliError::Data(e.into()))?;

    println!(
        "trained {size}-word codebook over {n_rows} frames from {} songs",
        set.song_ids.len()
    );
    Ok(())
}
