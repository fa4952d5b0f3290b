use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// Variants are grouped by the exit-code class they map to in the CLI
/// (see [`Error::class`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("argument error: {0}")]
    Argument(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("ambiguous spectrum: {0}")]
    Ambiguity(String),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("blow-up suspected after t = {last_valid_time}: {message}")]
    BlowUp { last_valid_time: f64, message: String },

    #[error("horizon too small: ||Phi - Id|| = {norm} > 1/2")]
    HorizonTooSmall { norm: f64 },

    #[error("modulation left its basin: {0}")]
    OutOfBasin(String),

    #[error("classification uncertain at component {component}: {message} (partial A = {partial:?})")]
    ClassificationUncertain {
        component: usize,
        partial: Vec<f64>,
        message: String,
    },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse failure class, used for exit codes and machine-readable reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Convergence,
    Io,
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config { .. } | Error::Argument(_) | Error::Window(_) => ErrorClass::Config,
            Error::Resolution(_)
            | Error::Ambiguity(_)
            | Error::DegenerateBasis(_)
            | Error::BlowUp { .. }
            | Error::Domain(_) => ErrorClass::Numeric,
            Error::HorizonTooSmall { .. }
            | Error::OutOfBasin(_)
            | Error::ClassificationUncertain { .. }
            | Error::Convergence(_) => ErrorClass::Convergence,
            Error::Stage { source, .. } => source.class(),
            Error::Io(_) => ErrorClass::Io,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Argument(_) => "argument",
            Error::Window(_) => "window",
            Error::Resolution(_) => "resolution",
            Error::Ambiguity(_) => "ambiguity",
            Error::DegenerateBasis(_) => "degenerate_basis",
            Error::BlowUp { .. } => "blow_up",
            Error::HorizonTooSmall { .. } => "horizon_too_small",
            Error::OutOfBasin(_) => "out_of_basin",
            Error::ClassificationUncertain { .. } => "classification_uncertain",
            Error::Convergence(_) => "convergence",
            Error::Domain(_) => "domain",
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn at_stage(self, stage: usize) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
