//! Codebook training, top-τ vector quantization, and histogram
//! representations.
//!
//! A codebook is trained by single-pass online k-means over a z-scored bag of
//! descriptor frames. Songs are then summarized as multinomial histograms
//! over codewords, where each frame spreads `1/τ` mass over its τ nearest
//! codewords. Histograms can be mapped onto the unit sphere through the
//! probability product kernel (coordinate-wise square root), compressed with
//! PCA, or reweighted with TF-IDF for the cosine baseline.
//!
//! Conventions the underlying method leaves open, fixed here:
//! - standard deviations use the population (1/N) convention; zero-variance
//!   dimensions normalize with σ = 1;
//! - the online k-means pass initializes centers to the first k shuffled
//!   points (each counting as assigned to its own center) and streams the
//!   remaining points with the incremental-mean step `1/(count+1)`;
//! - nearest-codeword ties break by ascending codeword index;
//! - IDF uses the natural logarithm.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::seeds;
use crate::Real;

/// Cluster centers plus the z-score statistics they were trained under.
#[derive(Debug, Clone)]
pub struct Codebook<T> {
    centers: Array2<T>,
    mu: Array1<T>,
    sigma: Array1<T>,
}

impl<T: Real> Codebook<T> {
    pub fn new(centers: Array2<T>, mu: Array1<T>, sigma: Array1<T>) -> Result<Self> {
        let dim = centers.ncols();
        if mu.len() != dim || sigma.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "centers are {}-dimensional but mu/sigma have {}/{} entries",
                dim,
                mu.len(),
                sigma.len()
            )));
        }
        if centers.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("codebook centers".into()));
        }
        if sigma.iter().any(|&s| s.is_nan() || s <= T::zero()) {
            return Err(Error::InvalidArgument(
                "codebook sigma entries must be positive".into(),
            ));
        }
        Ok(Self { centers, mu, sigma })
    }

    pub fn size(&self) -> usize {
        self.centers.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn centers(&self) -> &Array2<T> {
        &self.centers
    }

    pub fn mu(&self) -> &Array1<T> {
        &self.mu
    }

    pub fn sigma(&self) -> &Array1<T> {
        &self.sigma
    }
}

/// Per-dimension sample mean and population standard deviation.
///
/// Zero-variance dimensions report σ = 1 so that normalization is total.
pub fn zscore_fit<T: Real>(bag: &ArrayView2<T>) -> Result<(Array1<T>, Array1<T>)> {
    let n = bag.nrows();
    if n < 2 {
        return Err(Error::EmptyInput(format!(
            "z-score fit needs at least 2 rows, got {n}"
        )));
    }
    let n_t = T::real(n as f64);
    let mu = bag.sum_axis(Axis(0)) / n_t;
    let mut sigma = Array1::<T>::zeros(bag.ncols());
    for row in bag.rows() {
        for (d, &x) in row.iter().enumerate() {
            let diff = x - mu[d];
            sigma[d] += diff * diff;
        }
    }
    sigma.mapv_inplace(|v| {
        let s = (v / n_t).sqrt();
        if s > T::zero() {
            s
        } else {
            T::one()
        }
    });
    Ok((mu, sigma))
}

/// `(x - mu) / sigma` applied row-wise.
pub fn zscore_apply<T: Real>(
    rows: &ArrayView2<T>,
    mu: &ArrayView1<T>,
    sigma: &ArrayView1<T>,
) -> Array2<T> {
    let mut out = rows.to_owned();
    for mut row in out.rows_mut() {
        for (d, x) in row.iter_mut().enumerate() {
            *x = (*x - mu[d]) / sigma[d];
        }
    }
    out
}

/// Trains a codebook by one online k-means pass over the z-scored bag.
///
/// The bag is shuffled by `seed`, centers initialize to the first k shuffled
/// points, and each remaining point moves its nearest center by
/// `1/(count+1)`. Deterministic given the seed.
pub fn train_codebook<T: Real>(bag: &ArrayView2<T>, k: usize, seed: u64) -> Result<Codebook<T>> {
    let n = bag.nrows();
    if k < 1 {
        return Err(Error::InvalidArgument("codebook size must be >= 1".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "codebook of size {k} needs at least {k} points, got {n}"
        )));
    }
    if bag.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("codebook training bag".into()));
    }

    let (mu, sigma) = zscore_fit(bag)?;
    let normalized = zscore_apply(bag, &mu.view(), &sigma.view());

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeds::stream(seed, "codebook-shuffle", 0));

    let dim = bag.ncols();
    let mut centers = Array2::<T>::zeros((k, dim));
    for (c, &idx) in order[..k].iter().enumerate() {
        centers.row_mut(c).assign(&normalized.row(idx));
    }
    let mut counts = vec![1usize; k];

    for &idx in &order[k..] {
        let point = normalized.row(idx);
        let nearest = nearest_centers(&point, &centers.view(), 1)[0];
        let rate = T::real(1.0 / (counts[nearest] as f64 + 1.0));
        let mut center = centers.row_mut(nearest);
        for (c, &p) in center.iter_mut().zip(point.iter()) {
            *c += rate * (p - *c);
        }
        counts[nearest] += 1;
    }

    Codebook::new(centers, mu, sigma)
}

/// Indices of the `tau` nearest centers, nearest first; distance ties break
/// by ascending center index.
fn nearest_centers<T: Real>(
    point: &ArrayView1<T>,
    centers: &ArrayView2<T>,
    tau: usize,
) -> Vec<usize> {
    let mut dist: Vec<(T, usize)> = centers
        .rows()
        .into_iter()
        .enumerate()
        .map(|(c, center)| {
            let d = point
                .iter()
                .zip(center.iter())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>();
            (d, c)
        })
        .collect();
    dist.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("distances are finite")
            .then(a.1.cmp(&b.1))
    });
    dist.truncate(tau);
    dist.into_iter().map(|(_, c)| c).collect()
}

/// Multinomial distribution over codewords.
#[derive(Debug, Clone)]
pub struct Histogram<T> {
    values: Array1<T>,
    tau: usize,
}

impl<T: Real> Histogram<T> {
    /// Validates non-negativity and unit mass.
    pub fn new(values: Array1<T>, tau: usize) -> Result<Self> {
        if values.iter().any(|&v| !v.is_finite() || v < T::zero()) {
            return Err(Error::InvalidArgument(
                "histogram entries must be finite and non-negative".into(),
            ));
        }
        let total: T = values.iter().copied().sum();
        let tol = T::epsilon() * T::real(64.0) * T::real(values.len().max(1) as f64);
        if (total - T::one()).abs() > tol.max(T::real(1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "histogram mass {total} is not 1"
            )));
        }
        Ok(Self { values, tau })
    }

    pub fn values(&self) -> &Array1<T> {
        &self.values
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Quantizes a frame sequence into a top-τ codeword histogram.
///
/// Frames are z-scored with the codebook's statistics, then each frame
/// assigns `1/τ` mass to its τ nearest codewords.
pub fn quantize_topk<T: Real>(
    frames: &ArrayView2<T>,
    cb: &Codebook<T>,
    tau: usize,
) -> Result<Histogram<T>> {
    if frames.nrows() == 0 {
        return Err(Error::EmptyInput("feature sequence to quantize".into()));
    }
    if frames.ncols() != cb.dim() {
        return Err(Error::DimensionMismatch(format!(
            "frames are {}-dimensional, codebook is {}-dimensional",
            frames.ncols(),
            cb.dim()
        )));
    }
    if tau < 1 || tau > cb.size() {
        return Err(Error::InvalidArgument(format!(
            "tau {tau} outside [1, {}]",
            cb.size()
        )));
    }

    // Count integer hits, then normalize once: no accumulation drift, and
    // the total mass is exactly Σ hits / (|x|·τ).
    let normalized = zscore_apply(frames, &cb.mu().view(), &cb.sigma().view());
    let mut hits = vec![0usize; cb.size()];
    for frame in normalized.rows() {
        for c in nearest_centers(&frame, &cb.centers().view(), tau) {
            hits[c] += 1;
        }
    }
    let denom = (frames.nrows() * tau) as f64;
    let values = Array1::from_iter(hits.into_iter().map(|h| T::real(h as f64 / denom)));
    Histogram::new(values, tau)
}

/// Quantizes many songs in parallel; the output row order matches the input.
pub fn quantize_songs<T: Real>(
    songs: &[Array2<T>],
    cb: &Codebook<T>,
    tau: usize,
) -> Result<Array2<T>> {
    let rows: Vec<Array1<T>> = songs
        .par_iter()
        .map(|frames| quantize_topk(&frames.view(), cb, tau).map(|h| h.values.clone()))
        .collect::<Result<_>>()?;
    let mut out = Array2::<T>::zeros((rows.len(), cb.size()));
    for (i, row) in rows.into_iter().enumerate() {
        out.row_mut(i).assign(&row);
    }
    Ok(out)
}

/// Maps a histogram onto the unit sphere: coordinate-wise square root.
///
/// Inner products of mapped histograms equal the Bhattacharyya coefficient,
/// so Euclidean distance in this space induces Hellinger-distance rankings.
pub fn ppk_map<T: Real>(h: &Histogram<T>) -> Array1<T> {
    h.values().mapv(|v| v.sqrt())
}

/// Applies the square-root map to each row of a histogram matrix, validating
/// that rows are histograms.
pub fn ppk_map_rows<T: Real>(hists: &ArrayView2<T>) -> Result<Array2<T>> {
    for (i, row) in hists.rows().into_iter().enumerate() {
        Histogram::new(row.to_owned(), 1).map_err(|_| {
            Error::InvalidArgument(format!(
                "row {i} is not a histogram; the square-root map needs unit-mass non-negative rows"
            ))
        })?;
    }
    Ok(hists.mapv(|v| v.sqrt()))
}

/// PCA projection model: mean and orthonormal basis columns.
#[derive(Debug, Clone)]
pub struct PcaModel<T> {
    mean: Array1<T>,
    basis: Array2<T>,
    explained: T,
}

impl<T: Real> PcaModel<T> {
    pub fn mean(&self) -> &Array1<T> {
        &self.mean
    }

    /// D×d matrix with orthonormal columns.
    pub fn basis(&self) -> &Array2<T> {
        &self.basis
    }

    /// Fraction of training variance captured by the basis.
    pub fn explained_fraction(&self) -> T {
        self.explained
    }

    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Projects one vector: `basisᵀ (x - mean)`.
    pub fn apply(&self, x: &ArrayView1<T>) -> Result<Array1<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "PCA input has {} dims, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let centered = x.to_owned() - &self.mean;
        Ok(linalg::mat_vec(&self.basis.t(), &centered.view()))
    }

    /// Projects each row of a matrix.
    pub fn apply_rows(&self, x: &ArrayView2<T>) -> Result<Array2<T>> {
        let mut out = Array2::<T>::zeros((x.nrows(), self.output_dim()));
        for (i, row) in x.rows().into_iter().enumerate() {
            out.row_mut(i).assign(&self.apply(&row)?);
        }
        Ok(out)
    }

    pub fn from_parts(mean: Array1<T>, basis: Array2<T>, explained: T) -> Result<Self> {
        if basis.nrows() != mean.len() {
            return Err(Error::DimensionMismatch(
                "PCA basis rows must match mean length".into(),
            ));
        }
        Ok(Self {
            mean,
            basis,
            explained,
        })
    }
}

/// Fits PCA keeping the smallest number of leading components whose
/// eigenvalue sum reaches `target_fraction` of total variance.
///
/// Zero-variance input degenerates to a single arbitrary unit basis vector.
/// When there are fewer samples than dimensions the eigenproblem is solved
/// on the N×N Gram matrix instead of the D×D covariance.
pub fn pca_fit<T: Real>(x: &ArrayView2<T>, target_fraction: T) -> Result<PcaModel<T>> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::EmptyInput(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if target_fraction.is_nan() || target_fraction <= T::zero() || target_fraction > T::one() {
        return Err(Error::InvalidArgument(format!(
            "PCA variance target {target_fraction} outside (0, 1]"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input".into()));
    }

    let n_t = T::real(n as f64);
    let mean = x.sum_axis(Axis(0)) / n_t;
    let centered = x.to_owned() - mean.view().insert_axis(Axis(0));

    // (eigenvalue, eigenvector-in-input-space) pairs, descending.
    let (values, mut vectors) = if d <= n {
        let cov = centered.t().dot(&centered) / n_t;
        let eig = linalg::sym_eigen(&cov.view())?;
        (eig.values, eig.vectors)
    } else {
        // Snapshot route: eigenvectors of the Gram matrix map back through Xᵀ.
        let gram = centered.dot(&centered.t()) / n_t;
        let eig = linalg::sym_eigen(&gram.view())?;
        let mut vectors = Array2::<T>::zeros((d, n));
        for k in 0..n {
            let coeff = eig.vectors.column(k);
            let dir = linalg::mat_vec(&centered.t(), &coeff);
            let norm = dir.iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm > T::zero() {
                vectors.column_mut(k).assign(&(dir / norm));
            }
        }
        (eig.values, vectors)
    };

    let total: T = values.iter().copied().filter(|v| *v > T::zero()).sum();
    if total <= T::zero() {
        // Degenerate input: no variance at all.
        let mut basis = Array2::<T>::zeros((d, 1));
        basis[[0, 0]] = T::one();
        return PcaModel::from_parts(mean, basis, T::one());
    }

    // A few ULPs of slack keep exact-boundary targets (e.g. 19 of 20 equal
    // eigenvalues at 0.95) from rounding up to an extra component.
    let slack = T::epsilon() * T::real(32.0) * total;
    let mut cumulative = T::zero();
    let mut keep = 0;
    for &v in values.iter() {
        cumulative += v.max(T::zero());
        keep += 1;
        if cumulative + slack >= target_fraction * total {
            break;
        }
    }

    // Deterministic sign: largest-magnitude coordinate positive.
    for mut col in vectors.columns_mut() {
        let mut lead = T::zero();
        for &v in col.iter() {
            if v.abs() > lead.abs() {
                lead = v;
            }
        }
        if lead < T::zero() {
            col.mapv_inplace(|v| -v);
        }
    }

    let basis = vectors.slice(ndarray::s![.., ..keep]).to_owned();
    let explained = (cumulative / total).min(T::one());
    PcaModel::from_parts(mean, basis, explained)
}

/// Number of principal components needed to capture 95% of the variance.
pub fn effective_dimensionality<T: Real>(x: &ArrayView2<T>) -> Result<usize> {
    Ok(pca_fit(x, T::real(0.95))?.output_dim())
}

/// Inverse document frequency per codeword: `ln(N / df)`, with unused
/// codewords fixed at 0.
pub fn idf_fit<T: Real>(hists: &ArrayView2<T>) -> Result<Array1<T>> {
    let n = hists.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("IDF training set".into()));
    }
    let mut idf = Array1::<T>::zeros(hists.ncols());
    for (v, col) in hists.columns().into_iter().enumerate() {
        let df = col.iter().filter(|&&h| h > T::zero()).count();
        if df > 0 {
            idf[v] = T::real((n as f64 / df as f64).ln());
        }
    }
    Ok(idf)
}

/// Coordinate-wise TF-IDF weighting; histograms are already frequency
/// normalized, so this is a plain product.
pub fn tfidf_apply<T: Real>(h: &ArrayView1<T>, idf: &ArrayView1<T>) -> Result<Array1<T>> {
    if h.len() != idf.len() {
        return Err(Error::DimensionMismatch(format!(
            "histogram has {} bins, IDF has {}",
            h.len(),
            idf.len()
        )));
    }
    Ok(h.iter().zip(idf.iter()).map(|(&a, &b)| a * b).collect())
}

/// Cosine similarity `aᵀb / (‖a‖·‖b‖)`; zero vectors compare as 0.
pub fn cosine_similarity<T: Real>(a: &ArrayView1<T>, b: &ArrayView1<T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "cosine between {} and {} dims",
            a.len(),
            b.len()
        )));
    }
    let dot: T = a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum();
    let na = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        return Ok(T::zero());
    }
    Ok(dot / (na * nb))
}
