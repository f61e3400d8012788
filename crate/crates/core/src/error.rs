use thiserror::Error;

/// Errors raised across the lattice laboratory.
#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("range error: {0}")]
    Range(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate configuration at site {site}: {reason}")]
    Degeneracy { site: i64, reason: String },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("integration failure at t = {time}{}: {reason}", site.map(|s| format!(" (site {s})")).unwrap_or_default())]
    Integration {
        time: f64,
        site: Option<i64>,
        reason: String,
    },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("ensemble member {member}: {source}")]
    Ensemble {
        member: usize,
        #[source]
        source: Box<LatticeError>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LatticeError>;
