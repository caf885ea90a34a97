//! Dynamic-MFCC feature extraction from mono PCM audio.
//!
//! Each clip is framed with a 512-sample Hann window at hop 256 (half
//! overlap, ≈23.2 ms frames at 22050 Hz), analysis is centered by reflecting
//! 256 samples at each edge, and per frame the magnitude spectrum passes
//! through a 40-filter mel bank (0–11025 Hz, HTK mel scale), a floored log,
//! and an orthonormal DCT-II keeping the first 13 coefficients (including
//! the 0th). First and second regression deltas (window ±2, edges
//! replicated) are appended, giving 39 dimensions per frame.
//!
//! With centered analysis the frame count is `floor(N/256) + 1`, which makes
//! a 5-second 22050 Hz clip come out to exactly 431 frames.

use ndarray::{s, Array2, ArrayView2};
use rustfft::num_complex::Complex;
use rustfft::{FftNum, FftPlanner};

use crate::error::{Error, Result};
use crate::Real;

pub const REQUIRED_SAMPLE_RATE: u32 = 22050;
pub const FRAME_LEN: usize = 512;
pub const HOP: usize = 256;
pub const N_MELS: usize = 40;
pub const N_COEFFS: usize = 13;
pub const FEATURE_DIM: usize = 3 * N_COEFFS;
/// Mel energies are floored here before the log.
pub const LOG_FLOOR: f64 = 1e-10;

/// Mono audio samples at a fixed rate.
#[derive(Debug, Clone)]
pub struct AudioClip<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Real> AudioClip<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("audio samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A T×39 sequence of dynamic-MFCC descriptors, column blocks ordered
/// `[MFCC | Δ | ΔΔ]`.
#[derive(Debug, Clone)]
pub struct FeatureSequence<T> {
    frames: Array2<T>,
}

impl<T: Real> FeatureSequence<T> {
    pub fn new(frames: Array2<T>) -> Result<Self> {
        if frames.ncols() != FEATURE_DIM {
            return Err(Error::DimensionMismatch(format!(
                "feature sequence must have {FEATURE_DIM} columns, got {}",
                frames.ncols()
            )));
        }
        if frames.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("feature sequence".into()));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &Array2<T> {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn into_inner(self) -> Array2<T> {
        self.frames
    }
}

/// Number of analysis frames for a clip of `n` samples.
pub fn frame_count(n: usize) -> usize {
    n / HOP + 1
}

fn reflect_index(pos: isize, len: isize) -> usize {
    let mut p = pos;
    if p < 0 {
        p = -p;
    }
    if p >= len {
        p = 2 * (len - 1) - p;
    }
    p as usize
}

/// First 13 MFCCs per frame.
pub fn mfcc<T: Real + FftNum>(clip: &AudioClip<T>) -> Result<Array2<T>> {
    if clip.sample_rate() != REQUIRED_SAMPLE_RATE {
        return Err(Error::InvalidArgument(format!(
            "expected {REQUIRED_SAMPLE_RATE} Hz audio, got {} Hz",
            clip.sample_rate()
        )));
    }
    let n = clip.len();
    if n < FRAME_LEN {
        return Err(Error::EmptyInput(format!(
            "clip of {n} samples is shorter than one {FRAME_LEN}-sample frame"
        )));
    }

    let window = hann_window::<T>(FRAME_LEN);
    let mel = mel_filterbank::<T>();
    let dct = dct_matrix::<T>(N_COEFFS, N_MELS);

    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(FRAME_LEN);

    let t_frames = frame_count(n);
    let pad = (FRAME_LEN / 2) as isize;
    let samples = clip.samples();
    let mut out = Array2::<T>::zeros((t_frames, N_COEFFS));
    let mut buf = vec![Complex::new(T::zero(), T::zero()); FRAME_LEN];
    let mut magnitude = [T::zero(); FRAME_LEN / 2 + 1];

    for t in 0..t_frames {
        let start = (t * HOP) as isize - pad;
        for (i, slot) in buf.iter_mut().enumerate() {
            let sample = samples[reflect_index(start + i as isize, n as isize)];
            *slot = Complex::new(sample * window[i], T::zero());
        }
        fft.process(&mut buf);
        for (k, m) in magnitude.iter_mut().enumerate() {
            *m = (buf[k].re * buf[k].re + buf[k].im * buf[k].im).sqrt();
        }

        let floor = T::real(LOG_FLOOR);
        for (j, filter) in mel.rows().into_iter().enumerate() {
            let energy: T = filter
                .iter()
                .zip(magnitude.iter())
                .map(|(&w, &m)| w * m)
                .sum();
            let log_energy = energy.max(floor).ln();
            for c in 0..N_COEFFS {
                out[[t, c]] += dct[[c, j]] * log_energy;
            }
        }
    }
    Ok(out)
}

/// Appends first and second regression deltas to an MFCC sequence.
pub fn dynamic_mfcc<T: Real>(mfccs: &ArrayView2<T>) -> Result<FeatureSequence<T>> {
    let t_frames = mfccs.nrows();
    if t_frames < 5 {
        return Err(Error::EmptyInput(format!(
            "delta features need at least 5 frames, got {t_frames}"
        )));
    }
    let n_coeffs = mfccs.ncols();
    let delta = regression_delta(mfccs);
    let delta2 = regression_delta(&delta.view());

    let mut out = Array2::<T>::zeros((t_frames, 3 * n_coeffs));
    out.slice_mut(s![.., 0..n_coeffs]).assign(mfccs);
    out.slice_mut(s![.., n_coeffs..2 * n_coeffs]).assign(&delta);
    out.slice_mut(s![.., 2 * n_coeffs..]).assign(&delta2);
    FeatureSequence::new(out)
}

/// MFCCs plus deltas in one call.
pub fn feature_pipeline<T: Real + FftNum>(clip: &AudioClip<T>) -> Result<FeatureSequence<T>> {
    let m = mfcc(clip)?;
    dynamic_mfcc(&m.view())
}

/// Regression delta with window ±2 and edge replication:
/// `Δ_t = Σ_{w=1,2} w·(c[t+w] - c[t-w]) / 10`.
fn regression_delta<T: Real>(m: &ArrayView2<T>) -> Array2<T> {
    let (t_frames, n_coeffs) = m.dim();
    let denom = T::real(10.0);
    let clamp = |i: isize| -> usize { i.clamp(0, t_frames as isize - 1) as usize };
    let mut out = Array2::<T>::zeros((t_frames, n_coeffs));
    for t in 0..t_frames {
        for c in 0..n_coeffs {
            let mut acc = T::zero();
            for w in 1..=2isize {
                let ahead = m[[clamp(t as isize + w), c]];
                let behind = m[[clamp(t as isize - w), c]];
                acc += T::real(w as f64) * (ahead - behind);
            }
            out[[t, c]] = acc / denom;
        }
    }
    out
}

fn hann_window<T: Real>(len: usize) -> Vec<T> {
    // Periodic Hann, the usual STFT analysis variant.
    (0..len)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * i as f64 / len as f64;
            T::real(0.5 * (1.0 - x.cos()))
        })
        .collect()
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank over the one-sided spectrum bins.
fn mel_filterbank<T: Real>() -> Array2<T> {
    let n_bins = FRAME_LEN / 2 + 1;
    let sr = REQUIRED_SAMPLE_RATE as f64;
    let max_mel = hz_to_mel(sr / 2.0);
    let points: Vec<f64> = (0..N_MELS + 2)
        .map(|i| mel_to_hz(max_mel * i as f64 / (N_MELS + 1) as f64))
        .collect();

    let mut bank = Array2::<T>::zeros((N_MELS, n_bins));
    for m in 0..N_MELS {
        let (lower, center, upper) = (points[m], points[m + 1], points[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * sr / FRAME_LEN as f64;
            let w = if f <= lower || f >= upper {
                0.0
            } else if f <= center {
                (f - lower) / (center - lower)
            } else {
                (upper - f) / (upper - center)
            };
            bank[[m, k]] = T::real(w);
        }
    }
    bank
}

/// Orthonormal DCT-II matrix, `n_out` rows by `n_in` columns.
fn dct_matrix<T: Real>(n_out: usize, n_in: usize) -> Array2<T> {
    let mut dct = Array2::<T>::zeros((n_out, n_in));
    let norm0 = (1.0 / n_in as f64).sqrt();
    let norm = (2.0 / n_in as f64).sqrt();
    for c in 0..n_out {
        for j in 0..n_in {
            let angle = std::f64::consts::PI * c as f64 * (2.0 * j as f64 + 1.0)
                / (2.0 * n_in as f64);
            let scale = if c == 0 { norm0 } else { norm };
            dct[[c, j]] = T::real(scale * angle.cos());
        }
    }
    dct
}

/// Mono WAV decoding, restricted to 16-bit integer and 32-bit float PCM.
pub mod wav {
    use super::*;
    use std::path::Path;

    pub fn read_mono<T: Real, P: AsRef<Path>>(path: P) -> Result<AudioClip<T>> {
        let path = path.as_ref();
        let mut reader = hound::WavReader::open(path).map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(Error::Format {
                path: path.display().to_string(),
                message: format!("expected mono audio, got {} channels", spec.channels),
            });
        }
        let samples: Vec<T> = match (spec.sample_format, spec.bits_per_sample) {
            (hound::SampleFormat::Int, 16) => reader
                .samples::<i16>()
                .map(|s| s.map(|v| T::real(v as f64 / 32768.0)))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?,
            (hound::SampleFormat::Float, 32) => reader
                .samples::<f32>()
                .map(|s| s.map(|v| T::real(v as f64)))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?,
            (format, bits) => {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    message: format!("unsupported sample format {format:?}/{bits}-bit"),
                })
            }
        };
        AudioClip::new(samples, spec.sample_rate)
    }
}
