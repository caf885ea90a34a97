//! `qbex synth` — write a synthetic dataset to a directory.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use qbex_core::qxf;
use qbex_core::synth::{generate, SyntheticSpec};

use crate::config::ConfigMap;
use crate::io_util::write_tsv;

use super::{CmdResult, CliError};

#[derive(Parser)]
pub struct Args {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Config file with key=value defaults for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub artists: Option<usize>,
    #[arg(long)]
    pub songs_per_artist: Option<usize>,
    /// Feature dimensionality.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Rank of the planted metric.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Size of each artist's planted relevant set.
    #[arg(long)]
    pub relevant_k: Option<usize>,
    /// Song noise around the artist prototype.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Frames per song for the quantization path (0 = no frames).
    #[arg(long)]
    pub frames_per_song: Option<usize>,
    /// Frame noise around the song vector.
    #[arg(long)]
    pub frame_noise: Option<f64>,
}

pub fn run(args: Args) -> CmdResult {
    let cfg = ConfigMap::load(args.config.as_deref()).map_err(CliError::Data)?;
    let defaults = SyntheticSpec::default();
    let spec = SyntheticSpec {
        n_artists: cfg.resolve(args.artists, "artists", defaults.n_artists)?,
        songs_per_artist: cfg.resolve(
            args.songs_per_artist,
            "songs-per-artist",
            defaults.songs_per_artist,
        )?,
        dim: cfg.resolve(args.dim, "dim", defaults.dim)?,
        rank: cfg.resolve(args.rank, "rank", defaults.rank)?,
        relevant_k: cfg.resolve(args.relevant_k, "relevant-k", defaults.relevant_k)?,
        noise: cfg.resolve(args.noise, "noise", defaults.noise)?,
        frames_per_song: cfg.resolve(
            args.frames_per_song,
            "frames-per-song",
            defaults.frames_per_song,
        )?,
        frame_noise: cfg.resolve(args.frame_noise, "frame-noise", defaults.frame_noise)?,
        seed: cfg.resolve(args.seed, "seed", defaults.seed)?,
    };

    let data = generate::<f64>(&spec).map_err(|e| CliError::Data(e.into()))?;
    let out = &args.out;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(CliError::Data)?;

    qxf::write_matrix_path(out.join("features.qxf"), &data.features)
        .map_err(|e| CliError::Data(e.into()))?;
    qxf::write_matrix_path(out.join("wstar.qxf"), &data.w_star)
        .map_err(|e| CliError::Data(e.into()))?;
    qxf::write_matrix_path(out.join("prototypes.qxf"), &data.prototypes)
        .map_err(|e| CliError::Data(e.into()))?;
    qxf::write_matrix_path(out.join("artist_sim.qxf"), data.artist_sim.values())
        .map_err(|e| CliError::Data(e.into()))?;

    let song_rows: Vec<Vec<String>> = data
        .song_ids
        .iter()
        .enumerate()
        .map(|(s, id)| vec![id.clone(), data.artist_ids[data.song_artist[s]].clone()])
        .collect();
    write_tsv(&out.join("song_artist.tsv"), &song_rows)?;

    let mut relevance_rows = Vec::new();
    for (a, list) in data.relevance_lists.iter().enumerate() {
        for (rank, &other) in list.iter().enumerate() {
            relevance_rows.push(vec![
                data.artist_ids[a].clone(),
                (rank + 1).to_string(),
                data.artist_ids[other].clone(),
            ]);
        }
    }
    write_tsv(&out.join("relevance.tsv"), &relevance_rows)?;

    if !data.frames.is_empty() {
        let frames_dir = out.join("frames");
        std::fs::create_dir_all(&frames_dir)
            .with_context(|| format!("creating {}", frames_dir.display()))
            .map_err(CliError::Data)?;
        let mut manifest = Vec::new();
        for (s, frames) in data.frames.iter().enumerate() {
            let name = format!("{}.qxf", data.song_ids[s]);
            qxf::write_matrix_path(frames_dir.join(&name), frames)
                .map_err(|e| CliError::Data(e.into()))?;
            manifest.push(vec![data.song_ids[s].clone(), name]);
        }
        write_tsv(&frames_dir.join("manifest.tsv"), &manifest)?;
    }

    let mut meta = BTreeMap::new();
    meta.insert("artists".into(), spec.n_artists.to_string());
    meta.insert("songs_per_artist".into(), spec.songs_per_artist.to_string());
    meta.insert("dim".into(), spec.dim.to_string());
    meta.insert("rank".into(), spec.rank.to_string());
    meta.insert("relevant_k".into(), spec.relevant_k.to_string());
    meta.insert("noise".into(), spec.noise.to_string());
    meta.insert("frames_per_song".into(), spec.frames_per_song.to_string());
    meta.insert("frame_noise".into(), spec.frame_noise.to_string());
    meta.insert("seed".into(), spec.seed.to_string());
    qxf::write_meta(out.join("synth.meta"), &meta).map_err(|e| CliError::Data(e.into()))?;

    println!(
        "wrote {} songs by {} artists to {}",
        data.features.nrows(),
        spec.n_artists,
        out.display()
    );
    Ok(())
}
