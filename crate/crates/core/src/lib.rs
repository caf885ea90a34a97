//! Query-by-example similarity toolkit.
//!
//! Learns a content-based distance metric from collaborative-filter data and
//! uses it to rank a fixed song database against novel queries. The pipeline:
//!
//! 1. [`cf`] derives item similarity and binary relevance sets from an
//!    implicit-feedback interaction matrix.
//! 2. [`audio`] converts mono PCM audio into 39-dimensional dynamic-MFCC
//!    descriptor sequences.
//! 3. [`vq`] trains a codeword dictionary, quantizes songs into top-τ
//!    codeword histograms, and provides the probability-product-kernel map,
//!    PCA compression, and the TF-IDF/cosine baseline.
//! 4. [`mlr`] learns a positive semi-definite metric `W` by cutting-plane
//!    optimization with ranking-loss separation oracles (AUC, MRR, NDCG).
//! 5. [`gmm`] is the per-song Gaussian-mixture baseline ranked by Monte-Carlo
//!    cross-entropy.
//! 6. [`eval`] runs artist-level splits, the `(C, loss)` model-selection
//!    grid, and mean-AUC reporting.
//! 7. [`synth`] generates seeded synthetic datasets with a planted
//!    ground-truth metric, so the whole pipeline is verifiable at desk scale.
//!
//! All numerical code is generic over the scalar type through [`Real`];
//! concrete `f64` aliases for the main model types live at the crate root.

pub mod audio;
pub mod cf;
pub mod error;
pub mod eval;
pub mod gmm;
pub mod linalg;
pub mod mlr;
pub mod qxf;
pub mod seeds;
pub mod synth;
pub mod vq;

pub use error::{Error, Result};

use std::fmt;
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + ScalarOperand
    + Sum
    + Send
    + Sync
    + fmt::Debug
    + fmt::Display
    + 'static
{
    /// Converts from `f64`, panicking on unrepresentable values
    /// (never for finite inputs on `f32`/`f64`).
    fn real(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    /// Widens to `f64`.
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar widens to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Double-precision aliases for the main model types.
pub type Codebook64 = vq::Codebook<f64>;
pub type Histogram64 = vq::Histogram<f64>;
pub type PcaModel64 = vq::PcaModel<f64>;
pub type MetricMatrix64 = mlr::MetricMatrix<f64>;
pub type QuerySet64 = mlr::QuerySet<f64>;
pub type TrainConfig64 = mlr::TrainConfig<f64>;
pub type GmmModel64 = gmm::GmmModel<f64>;
pub type SimilarityMatrix64 = cf::SimilarityMatrix<f64>;
