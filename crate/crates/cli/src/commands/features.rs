//! `qbex features` — dynamic-MFCC extraction from mono WAV files.
//!
//! Writes one T×39 frame matrix per song plus a manifest, the same layout
//! `codebook` and `quantize` consume; precomputed frame files can bypass
//! this command entirely.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Parser;
use qbex_core::audio::{feature_pipeline, wav};
use qbex_core::qxf;
use rayon::prelude::*;

use crate::io_util::write_tsv;

use super::{usage, CliError, CmdResult};

#[derive(Parser)]
pub struct Args {
    /// Directory of .wav files (song id = file stem, sorted order).
    #[arg(long)]
    pub wav_dir: Option<PathBuf>,
    /// Manifest of WAV files (song_id<TAB>path, relative to the manifest).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory for per-song .qxf frame files and manifest.tsv.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: Args) -> CmdResult {
    let entries: Vec<(String, PathBuf)> = match (&args.manifest, &args.wav_dir) {
        (Some(path), None) => {
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(CliError::Data)?;
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim_end_matches('\r');
                if line.is_empty() {
                    continue;
                }
                let (song, rel) = line.split_once('\t').ok_or_else(|| {
                    CliError::Data(anyhow!(
                        "{}:{}: expected song<TAB>path",
                        path.display(),
                        i + 1
                    ))
                })?;
                out.push((song.to_string(), base.join(rel)));
            }
            out
        }
        (None, Some(dir)) => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .with_context(|| format!("listing {}", dir.display()))
                .map_err(CliError::Data)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension()
                        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
                })
                .collect();
            paths.sort();
            paths
                .into_iter()
                .map(|p| {
                    let stem = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    (stem, p)
                })
                .collect()
        }
        _ => return Err(usage("exactly one of --wav-dir and --manifest is required")),
    };
    if entries.is_empty() {
        return Err(CliError::Data(anyhow!("no WAV files found")));
    }

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(CliError::Data)?;

    let results: Vec<(String, usize)> = entries
        .par_iter()
        .map(|(song, path)| {
            let clip = wav::read_mono::<f64, _>(path)
                .map_err(|e| CliError::Data(anyhow!("{song}: {e}")))?;
            let features = feature_pipeline(&clip)
                .map_err(|e| CliError::Data(anyhow!("{song}: {e}")))?;
            let out_path = args.out.join(format!("{song}.qxf"));
            qxf::write_matrix_path(&out_path, features.frames())
                .map_err(|e| CliError::Data(anyhow!("{song}: {e}")))?;
            Ok((song.clone(), features.len()))
        })
        .collect::<Result<_, CliError>>()?;

    let manifest: Vec<Vec<String>> = results
        .iter()
        .map(|(song, _)| vec![song.clone(), format!("{song}.qxf")])
        .collect();
    write_tsv(&args.out.join("manifest.tsv"), &manifest).map_err(CliError::Data)?;

    let total_frames: usize = results.iter().map(|(_, t)| t).sum();
    println!(
        "extracted {total_frames} frames from {} songs into {}",
        results.len(),
        args.out.display()
    );
    Ok(())
}
