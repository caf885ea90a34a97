//! `qbex query` — rank a database against query vectors, top-N to stdout.

use std::io::BufRead;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Parser;
use ndarray::Array2;
use qbex_core::mlr::{rank_database, MetricMatrix};
use qbex_core::qxf;

use crate::config::ConfigMap;
use crate::io_util::print_ranking_tsv;

use super::{CliError, CmdResult};

#[derive(Parser)]
pub struct Args {
    /// Trained metric matrix (QXF), e.g. the .qxf written by `qbex train`.
    /// Omit to rank by plain Euclidean distance.
    #[arg(long)]
    pub metric: Option<PathBuf>,
    /// Database feature vectors (n × d QXF).
    #[arg(long)]
    pub database: PathBuf,
    /// Query feature vectors (m × d QXF); each row is ranked separately.
    #[arg(long)]
    pub query: PathBuf,
    /// Optional songs table mapping database rows to ids
    /// (`index<TAB>song_id`, as written by `qbex quantize`).
    #[arg(long)]
    pub database_songs: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Results per query.
    #[arg(long)]
    pub top_n: Option<usize>,
}

pub fn run(args: Args) -> CmdResult {
    let cfg = ConfigMap::load(args.config.as_deref()).map_err(CliError::Data)?;
    let top_n = cfg.resolve(args.top_n, "top-n", 10usize)?;

    let database: Array2<f64> =
        qxf::read_matrix_path(&args.database).map_err(|e| CliError::Data(e.into()))?;
    let queries: Array2<f64> =
        qxf::read_matrix_path(&args.query).map_err(|e| CliError::Data(e.into()))?;

    let metric = match &args.metric {
        Some(path) => {
            let w: Array2<f64> =
                qxf::read_matrix_path(path).map_err(|e| CliError::Data(e.into()))?;
            MetricMatrix::new(w).map_err(|e| CliError::Data(e.into()))?
        }
        None => MetricMatrix::identity(database.ncols()),
    };
    if metric.dim() != database.ncols() || queries.ncols() != database.ncols() {
        return Err(CliError::Data(anyhow!(
            "dimension mismatch: metric {}, database {}, queries {}",
            metric.dim(),
            database.ncols(),
            queries.ncols()
        )));
    }

    let ids: Option<Vec<String>> = match &args.database_songs {
        Some(path) => {
            let file = std::fs::File::open(path)
                .with_context(|| format!("opening {}", path.display()))
                .map_err(CliError::Data)?;
            let mut ids = Vec::new();
            for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| CliError::Data(e.into()))?;
                let line = line.trim_end_matches('\r');
                if line.is_empty() {
                    continue;
                }
                let (_, id) = line.split_once('\t').ok_or_else(|| {
                    CliError::Data(anyhow!("{}:{}: expected index<TAB>id", path.display(), i + 1))
                })?;
                ids.push(id.to_string());
            }
            if ids.len() != database.nrows() {
                return Err(CliError::Data(anyhow!(
                    "{} ids for {} database rows",
                    ids.len(),
                    database.nrows()
                )));
            }
            Some(ids)
        }
        None => None,
    };

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (qi, query) in queries.rows().into_iter().enumerate() {
        let ranked =
            rank_database(&metric, &query, &database.view()).map_err(|e| CliError::Data(e.into()))?;
        print_ranking_tsv(&mut out, &qi.to_string(), &ranked, ids.as_deref(), top_n)
            .map_err(CliError::Data)?;
    }
    Ok(())
}
