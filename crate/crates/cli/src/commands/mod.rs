//! Subcommand implementations.

pub mod baseline;
pub mod codebook;
pub mod eval;
pub mod features;
pub mod query;
pub mod quantize;
pub mod synth;
pub mod train;

/// Usage errors exit 1, data errors exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Data(err)
    }
}

pub type CmdResult = Result<(), CliError>;

pub fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

/// Parses a comma-separated list of positive reals (for C grids).
pub fn parse_grid(raw: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let value: f64 = part
            .parse()
            .map_err(|_| usage(format!("bad value {part:?} in grid {raw:?}")))?;
        if value.is_nan() || value <= 0.0 {
            return Err(usage(format!("grid values must be > 0, got {value}")));
        }
        out.push(value);
    }
    if out.is_empty() {
        return Err(usage(format!("empty grid {raw:?}")));
    }
    Ok(out)
}

/// Parses a comma-separated list of loss names.
pub fn parse_losses(raw: &str) -> Result<Vec<qbex_core::mlr::LossKind>, CliError> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(
            part.parse()
                .map_err(|e| usage(format!("{e}")))?,
        );
    }
    if out.is_empty() {
        return Err(usage(format!("empty loss list {raw:?}")));
    }
    Ok(out)
}
