use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate disorder: component {component} has zero sample standard deviation")]
    DegenerateDisorder { component: usize },
    #[error("point outside the open unit ball (|x|^2 + |y|^2 = {norm_sq})")]
    OutsideBall { norm_sq: f64 },
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("maximizer search did not converge (final gradient norm {grad_norm:e})")]
    NoConvergence { grad_norm: f64 },
    #[error("quadrature grid too coarse: estimated error {estimate:e} exceeds 1e-4")]
    QuadratureTooCoarse { estimate: f64 },
    #[error("zero reference vector")]
    ZeroVector,
    #[error("paramagnetic constants (r* = 0): magnetization direction undefined")]
    Paramagnetic,
    #[error("invalid field covariance: {0}")]
    InvalidCovariance(String),
    #[error("empty sample")]
    EmptySample,
    #[error("latent chains did not converge: split R-hat {rhat:.4} > 1.1")]
    SamplerNotConverged { rhat: f64 },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn in_stage(self, stage: &str) -> Self {
        Error::Stage { stage: stage.to_string(), source: Box::new(self) }
    }
}
