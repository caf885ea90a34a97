//! `qbex quantize` — songs to top-τ codeword histograms, with optional PPK
//! map and PCA compression.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Parser;
use ndarray::{Array1, Array2};
use qbex_core::qxf;
use qbex_core::vq::{pca_fit, ppk_map_rows, quantize_songs, Codebook, PcaModel};

use crate::config::ConfigMap;
use crate::io_util::{load_frames, write_tsv};

use super::{usage, CliError, CmdResult};

#[derive(Parser)]
pub struct Args {
    /// Codebook stem, as written by `qbex codebook`.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Manifest of per-song frame files (song_id<TAB>path).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory of per-song .qxf frame files.
    #[arg(long)]
    pub features_dir: Option<PathBuf>,
    /// Output stem; writes STEM.qxf, STEM.songs.tsv, STEM.meta.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Quantization threshold τ: each frame spreads 1/τ mass over its τ
    /// nearest codewords.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Map histograms onto the unit sphere (coordinate-wise square root).
    #[arg(long)]
    pub ppk: bool,
    /// Fit PCA on these histograms to the given variance fraction, apply
    /// it, and write the model next to the output.
    #[arg(long)]
    pub pca_variance: Option<f64>,
    /// Apply an existing PCA model (stem written by a previous run).
    #[arg(long)]
    pub pca_model: Option<PathBuf>,
}

pub fn load_codebook(stem: &Path) -> Result<Codebook<f64>, CliError> {
    let with_ext = |ext: &str| -> PathBuf {
        let mut s = stem.as_os_str().to_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    let centers: Array2<f64> =
        qxf::read_matrix_path(with_ext(".centers.qxf")).map_err(|e| CliError::Data(e.into()))?;
    let mu: Array1<f64> =
        qxf::read_vector_path(with_ext(".mu.qxf")).map_err(|e| CliError::Data(e.into()))?;
    let sigma: Array1<f64> =
        qxf::read_vector_path(with_ext(".sigma.qxf")).map_err(|e| CliError::Data(e.into()))?;
    Codebook::new(centers, mu, sigma).map_err(|e| CliError::Data(e.into()))
}

pub fn load_pca(stem: &Path) -> Result<PcaModel<f64>, CliError> {
    let with_ext = |ext: &str| -> PathBuf {
        let mut s = stem.as_os_str().to_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    let mean: Array1<f64> =
        qxf::read_vector_path(with_ext(".mean.qxf")).map_err(|e| CliError::Data(e.into()))?;
    let basis: Array2<f64> =
        qxf::read_matrix_path(with_ext(".basis.qxf")).map_err(|e| CliError::Data(e.into()))?;
    let meta = qxf::read_meta(with_ext(".meta")).map_err(|e| CliError::Data(e.into()))?;
    let explained: f64 = meta
        .get("explained_fraction")
        .and_then(|v| v.parse().ok())
        .unwrap_or(1.0);
    PcaModel::from_parts(mean, basis, explained).map_err(|e| CliError::Data(e.into()))
}

fn save_pca(stem: &Path, model: &PcaModel<f64>) -> Result<(), CliError> {
    let with_ext = |ext: &str| -> PathBuf {
        let mut s = stem.as_os_str().to_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    qxf::write_vector_path(with_ext(".mean.qxf"), model.mean())
        .map_err(|e| CliError::Data(e.into()))?;
    qxf::write_matrix_path(with_ext(".basis.qxf"), model.basis())
        .map_err(|e| CliError::Data(e.into()))?;
    let mut meta = BTreeMap::new();
    meta.insert("input_dim".into(), model.input_dim().to_string());
    meta.insert("output_dim".into(), model.output_dim().to_string());
    meta.insert(
        "explained_fraction".into(),
        format!("{}", model.explained_fraction()),
    );
    qxf::write_meta(with_ext(".meta"), &meta).map_err(|e| CliError::Data(e.into()))
}

pub fn run(args: Args) -> CmdResult {
    let cfg = ConfigMap::load(args.config.as_deref()).map_err(CliError::Data)?;
    let tau = cfg.resolve(args.tau, "tau", 1usize)?;
    let ppk = cfg.resolve_switch(args.ppk, "ppk")?;
    let pca_variance = cfg.resolve_opt(args.pca_variance, "pca-variance")?;

    if args.manifest.is_some() == args.features_dir.is_some() {
        return Err(usage("exactly one of --manifest and --features-dir is required"));
    }
    if pca_variance.is_some() && args.pca_model.is_some() {
        return Err(usage("--pca-variance and --pca-model are mutually exclusive"));
    }

    let codebook = load_codebook(&args.codebook)?;
    let set = load_frames(args.manifest.as_deref(), args.features_dir.as_deref())
        .map_err(CliError::Data)?;

    let hists =
        quantize_songs(&set.frames, &codebook, tau).map_err(|e| CliError::Data(e.into()))?;

    let mut repr = if ppk {
        ppk_map_rows(&hists.view()).map_err(|e| CliError::Data(e.into()))?
    } else {
        hists
    };

    let stem = &args.out;
    crate::io_util::ensure_parent(stem).map_err(CliError::Data)?;
    let with_ext = |ext: &str| -> PathBuf {
        let mut s = stem.as_os_str().to_os_string();
        s.push(ext);
        PathBuf::from(s)
    };

    let mut pca_note = String::from("none");
    if let Some(target) = pca_variance {
        if !(target > 0.0 && target <= 1.0) {
            return Err(usage(format!("--pca-variance {target} outside (0, 1]")));
        }
        let model = pca_fit(&repr.view(), target).map_err(|e| CliError::Data(e.into()))?;
        repr = model
            .apply_rows(&repr.view())
            .map_err(|e| CliError::Data(e.into()))?;
        save_pca(&with_ext(".pca"), &model)?;
        pca_note = format!("fit:{target}->{}", model.output_dim());
    } else if let Some(pca_stem) = &args.pca_model {
        let model = load_pca(pca_stem)?;
        repr = model
            .apply_rows(&repr.view())
            .map_err(|e| CliError::Data(e.into()))?;
        pca_note = format!("applied:{}", pca_stem.display());
    }

    qxf::write_matrix_path(with_ext(".qxf"), &repr).map_err(|e| CliError::Data(e.into()))?;
    let song_rows: Vec<Vec<String>> = set
        .song_ids
        .iter()
        .enumerate()
        .map(|(i, id)| vec![i.to_string(), id.clone()])
        .collect();
    write_tsv(&with_ext(".songs.tsv"), &song_rows)
        .map_err(|e| CliError::Data(anyhow!("writing songs table: {e}")))?;

    let mut meta = BTreeMap::new();
    meta.insert("tau".into(), tau.to_string());
    meta.insert("ppk".into(), ppk.to_string());
    meta.insert("pca".into(), pca_note);
    meta.insert("codebook".into(), args.codebook.display().to_string());
    meta.insert("songs".into(), set.song_ids.len().to_string());
    meta.insert("dim".into(), repr.ncols().to_string());
    qxf::write_meta(with_ext(".meta"), &meta).map_err(|e| CliError::Data(e.into()))?;

    println!(
        "quantized {} songs into {}-dim vectors (tau={tau}, ppk={ppk})",
        set.song_ids.len(),
        repr.ncols()
    );
    Ok(())
}
