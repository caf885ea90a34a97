//! Collaborative-filter similarity and relevance sets.
//!
//! An implicit-feedback interaction matrix (users × items, listen counts) is
//! binarized by thresholding, item-item similarity is the Jaccard index of
//! the resulting bag-of-users columns, and the relevant set of a query item
//! is the top-k most similar candidates. Relevance is deliberately not
//! symmetric or transitive: item j may be relevant for i without i being
//! relevant for j.
//!
//! Items are opaque indices; they may be artists or songs. Ingestion maps
//! arbitrary string ids to dense indices in first-seen order.

use std::collections::HashMap;
use std::io::BufRead;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::Real;

/// Maps string ids to dense indices in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct Interner {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Sparse users × items interaction counts.
#[derive(Debug, Clone)]
pub struct CfMatrix {
    n_users: usize,
    n_items: usize,
    entries: HashMap<(u32, u32), u64>,
}

impl CfMatrix {
    pub fn new(n_users: usize, n_items: usize) -> Self {
        Self {
            n_users,
            n_items,
            entries: HashMap::new(),
        }
    }

    /// Adds `count` interactions for `(user, item)`. Repeated pairs accumulate.
    pub fn add_interaction(&mut self, user: usize, item: usize, count: u64) -> Result<()> {
        if user >= self.n_users || item >= self.n_items {
            return Err(Error::IndexOutOfBounds(format!(
                "interaction ({user}, {item}) outside {}x{}",
                self.n_users, self.n_items
            )));
        }
        *self.entries.entry((user as u32, item as u32)).or_insert(0) += count;
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn count(&self, user: usize, item: usize) -> u64 {
        self.entries
            .get(&(user as u32, item as u32))
            .copied()
            .unwrap_or(0)
    }

    /// Parses TSV lines `user_id<TAB>item_id<TAB>count`. Ids are arbitrary
    /// strings, mapped to dense indices in first-seen order. Empty lines are
    /// skipped; repeated `(user, item)` pairs accumulate.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<(CfMatrix, Interner, Interner)> {
        let mut users = Interner::new();
        let mut items = Interner::new();
        let mut triples = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (user, item, count) = match (fields.next(), fields.next(), fields.next()) {
                (Some(u), Some(i), Some(c)) if fields.next().is_none() => (u, i, c),
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("expected user<TAB>item<TAB>count, got {line:?}"),
                    })
                }
            };
            let count: u64 = count.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad count {count:?}"),
            })?;
            triples.push((users.intern(user), items.intern(item), count));
        }
        let mut matrix = CfMatrix::new(users.len(), items.len());
        for (u, i, c) in triples {
            matrix.add_interaction(u, i, c)?;
        }
        Ok((matrix, users, items))
    }

    /// Thresholds interactions: user i lands in column j iff `F[ij] >= threshold`.
    pub fn binarize(&self, threshold: u64) -> Result<BinaryCfMatrix> {
        if threshold < 1 {
            return Err(Error::InvalidArgument(
                "binarization threshold must be >= 1".into(),
            ));
        }
        let mut columns = vec![Vec::new(); self.n_items];
        for (&(user, item), &count) in &self.entries {
            if count >= threshold {
                columns[item as usize].push(user);
            }
        }
        for col in &mut columns {
            col.sort_unstable();
            col.dedup();
        }
        Ok(BinaryCfMatrix {
            n_users: self.n_users,
            n_items: self.n_items,
            columns,
        })
    }
}

/// Binarized CF matrix: per-item sorted user-index sets.
#[derive(Debug, Clone)]
pub struct BinaryCfMatrix {
    n_users: usize,
    n_items: usize,
    columns: Vec<Vec<u32>>,
}

impl BinaryCfMatrix {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn column(&self, item: usize) -> &[u32] {
        &self.columns[item]
    }
}

fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    let mut count = 0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Jaccard index of two items' user sets: `|A ∩ B| / |A ∪ B|`.
///
/// Two empty columns share no users, so their similarity is 0.
pub fn jaccard_similarity<T: Real>(b: &BinaryCfMatrix, i: usize, j: usize) -> Result<T> {
    if i >= b.n_items || j >= b.n_items {
        return Err(Error::IndexOutOfBounds(format!(
            "item pair ({i}, {j}) outside {} items",
            b.n_items
        )));
    }
    let (ci, cj) = (b.column(i), b.column(j));
    let inter = intersection_size(ci, cj);
    let union = ci.len() + cj.len() - inter;
    if union == 0 {
        return Ok(T::zero());
    }
    Ok(T::real(inter as f64 / union as f64))
}

/// Dense item × item similarity in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix<T> {
    values: Array2<T>,
}

impl<T: Real> SimilarityMatrix<T> {
    /// Validates squareness, range, and symmetry.
    pub fn new(values: Array2<T>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch(format!(
                "similarity matrix must be square, got {rows}x{cols}"
            )));
        }
        let tol = T::real(1e-9);
        for i in 0..rows {
            for j in 0..cols {
                let v = values[[i, j]];
                if !v.is_finite() || v < -tol || v > T::one() + tol {
                    return Err(Error::InvalidArgument(format!(
                        "similarity ({i}, {j}) = {v} outside [0, 1]"
                    )));
                }
                if (v - values[[j, i]]).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "similarity matrix asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn n_items(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[[i, j]]
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }
}

/// Computes the full pairwise Jaccard similarity matrix.
///
/// Rows are computed in parallel over the upper triangle and mirrored, so the
/// result is symmetric by construction and independent of thread count.
pub fn full_similarity<T: Real>(b: &BinaryCfMatrix) -> SimilarityMatrix<T> {
    let n = b.n_items();
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| jaccard_similarity(b, i, j).expect("indices in range"))
                .collect()
        })
        .collect();
    let mut values = Array2::<T>::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + offset;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    SimilarityMatrix { values }
}

/// The `k` candidates most similar to `q`, descending; ties broken by
/// ascending item index. `q` is excluded from its own result. Returns all
/// candidates when fewer than `k` remain.
pub fn top_k_relevant<T: Real>(
    s: &SimilarityMatrix<T>,
    q: usize,
    candidates: &[usize],
    k: usize,
) -> Vec<usize> {
    let mut scored: Vec<usize> = candidates.iter().copied().filter(|&c| c != q).collect();
    scored.sort_by(|&a, &b| {
        s.get(q, b)
            .partial_cmp(&s.get(q, a))
            .expect("similarities are finite")
            .then(a.cmp(&b))
    });
    scored.truncate(k);
    scored
}

/// Per-query relevant (`X⁺`) and irrelevant (`X⁻`) item sets.
#[derive(Debug, Clone)]
pub struct RelevanceSets {
    pub queries: Vec<usize>,
    pub positive: Vec<Vec<usize>>,
    pub negative: Vec<Vec<usize>>,
}

/// Expands artist-level relevance to song-level relevance sets.
///
/// For a query song q by artist a: `X⁺` is every database song whose artist
/// is in `artist_relevant[a]`, and `X⁻` is every other database song not by
/// artist a. Songs by the query's own artist (including q itself) appear in
/// neither set, so a query can never trivially retrieve its own artist.
pub fn song_relevance(
    artist_relevant: &[Vec<usize>],
    song_artist: &[usize],
    queries: &[usize],
    database: &[usize],
) -> Result<RelevanceSets> {
    let n_artists = artist_relevant.len();
    for &song in queries.iter().chain(database.iter()) {
        let artist = *song_artist.get(song).ok_or_else(|| {
            Error::IndexOutOfBounds(format!("song {song} has no artist mapping"))
        })?;
        if artist >= n_artists {
            return Err(Error::IndexOutOfBounds(format!(
                "song {song} maps to unknown artist {artist}"
            )));
        }
    }

    let mut positive = Vec::with_capacity(queries.len());
    let mut negative = Vec::with_capacity(queries.len());
    for &q in queries {
        let artist = song_artist[q];
        let relevant = &artist_relevant[artist];
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for &x in database {
            if x == q || song_artist[x] == artist {
                continue;
            }
            if relevant.contains(&song_artist[x]) {
                pos.push(x);
            } else {
                neg.push(x);
            }
        }
        positive.push(pos);
        negative.push(neg);
    }
    Ok(RelevanceSets {
        queries: queries.to_vec(),
        positive,
        negative,
    })
}

/// Parses TSV lines `song_id<TAB>artist_id`, returning the song→artist map
/// plus the interned id tables.
pub fn read_song_artist_tsv<R: BufRead>(reader: R) -> Result<(Vec<usize>, Interner, Interner)> {
    let mut songs = Interner::new();
    let mut artists = Interner::new();
    let mut mapping = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (song, artist) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            message: format!("expected song<TAB>artist, got {line:?}"),
        })?;
        let song_idx = songs.intern(song);
        if song_idx != mapping.len() {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("song {song:?} listed twice"),
            });
        }
        mapping.push(artists.intern(artist));
    }
    Ok((mapping, songs, artists))
}
