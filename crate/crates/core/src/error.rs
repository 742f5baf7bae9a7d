use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the region where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Level refinement exhausted without meeting the tolerance.
    #[error("quadrature did not converge after {levels} levels (best estimate {value:e}, error estimate {err_estimate:e})")]
    Quadrature {
        value: f64,
        err_estimate: f64,
        levels: u32,
    },

    #[error("image sum: {0}")]
    ImageSum(String),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("root search: {0}")]
    Search(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Wraps `self` with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Quadrature { .. } | Error::ImageSum(_) | Error::Oracle(_) | Error::Search(_) => {
                true
            }
            Error::Context { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context_with<S: Into<String>>(self, f: impl FnOnce() -> S) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context_with<S: Into<String>>(self, f: impl FnOnce() -> S) -> Result<T> {
        self.map_err(|e| e.context(f()))
    }
}
