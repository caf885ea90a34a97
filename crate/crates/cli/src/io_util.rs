//! Dataset file plumbing shared by the subcommands.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ndarray::Array2;
use qbex_core::cf::{read_song_artist_tsv, Interner};
use qbex_core::qxf;

/// A set of per-song frame matrices, in a stable song order.
pub struct FrameSet {
    pub song_ids: Vec<String>,
    pub frames: Vec<Array2<f64>>,
}

/// Loads per-song frame files either from a manifest
/// (`song_id<TAB>path`, paths relative to the manifest) or from every
/// `.qxf` file in a directory (song id = file stem, sorted order).
pub fn load_frames(manifest: Option<&Path>, dir: Option<&Path>) -> Result<FrameSet> {
    let entries: Vec<(String, PathBuf)> = match (manifest, dir) {
        (Some(path), None) => {
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            let reader = BufReader::new(
                File::open(path).with_context(|| format!("opening {}", path.display()))?,
            );
            let mut out = Vec::new();
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                let line = line.trim_end_matches('\r');
                if line.is_empty() {
                    continue;
                }
                let (song, rel) = line
                    .split_once('\t')
                    .ok_or_else(|| anyhow!("{}:{}: expected song<TAB>path", path.display(), i + 1))?;
                out.push((song.to_string(), base.join(rel)));
            }
            out
        }
        (None, Some(dir)) => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .with_context(|| format!("listing {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "qxf"))
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
        _ => bail!("exactly one of --manifest and --features-dir is required"),
    };
    if entries.is_empty() {
        bail!("no songs found");
    }

    let mut song_ids = Vec::with_capacity(entries.len());
    let mut frames = Vec::with_capacity(entries.len());
    for (song, path) in entries {
        let matrix: Array2<f64> = qxf::read_matrix_path(&path)
            .with_context(|| format!("reading frames for {song}"))?;
        song_ids.push(song);
        frames.push(matrix);
    }
    Ok(FrameSet { song_ids, frames })
}

/// Songs and artists of a dataset: the song→artist map plus id tables.
pub struct Catalog {
    pub song_artist: Vec<usize>,
    pub songs: Interner,
    pub artists: Interner,
}

pub fn load_catalog(path: &Path) -> Result<Catalog> {
    let reader =
        BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let (song_artist, songs, artists) =
        read_song_artist_tsv(reader).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Catalog {
        song_artist,
        songs,
        artists,
    })
}

/// Reads full preference-ordered relevance lists:
/// `artist_id<TAB>rank<TAB>relevant_artist_id` with ranks starting at 1.
pub fn load_relevance_lists(path: &Path, artists: &Interner) -> Result<Vec<Vec<usize>>> {
    let reader =
        BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut lists: Vec<Vec<(usize, usize)>> = vec![Vec::new(); artists.len()];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (query, rank, relevant) = match (fields.next(), fields.next(), fields.next()) {
            (Some(q), Some(r), Some(x)) if fields.next().is_none() => (q, r, x),
            _ => bail!(
                "{}:{}: expected artist<TAB>rank<TAB>artist",
                path.display(),
                i + 1
            ),
        };
        let rank: usize = rank
            .parse()
            .map_err(|_| anyhow!("{}:{}: bad rank {rank:?}", path.display(), i + 1))?;
        let q = artists
            .get(query)
            .ok_or_else(|| anyhow!("{}:{}: unknown artist {query:?}", path.display(), i + 1))?;
        let x = artists
            .get(relevant)
            .ok_or_else(|| anyhow!("{}:{}: unknown artist {relevant:?}", path.display(), i + 1))?;
        lists[q].push((rank, x));
    }
    Ok(lists
        .into_iter()
        .map(|mut l| {
            l.sort_unstable();
            l.into_iter().map(|(_, x)| x).collect()
        })
        .collect())
}

/// Creates the directory an output stem or file lives in.
pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(())
}

pub fn write_tsv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn print_ranking_tsv<W: Write>(
    mut w: W,
    query_id: &str,
    ranked: &[(usize, f64)],
    ids: Option<&[String]>,
    top_n: usize,
) -> Result<()> {
    for (rank, &(idx, score)) in ranked.iter().take(top_n).enumerate() {
        let id = match ids {
            Some(ids) => ids[idx].clone(),
            None => idx.to_string(),
        };
        writeln!(w, "{query_id}\t{}\t{id}\t{score:.6}", rank + 1)?;
    }
    Ok(())
}
