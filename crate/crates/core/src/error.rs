use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("point outside the coordinate chart: {0}")]
    Domain(String),

    #[error("principal curvatures {kappa:?} outside the defining cone of {function}")]
    ConeViolation { function: String, kappa: Vec<f64> },

    #[error("inadmissible graph: {count} node(s) outside the cone, first at node {first}")]
    Inadmissible { count: usize, first: usize, nodes: Vec<usize> },

    #[error("metric is not positive definite: {0}")]
    Metric(String),

    #[error("gradient undefined on the cone boundary at {0:?}")]
    IllConditioned(Vec<f64>),

    #[error("loss of ellipticity at node {node}: smallest coefficient eigenvalue {min_eig:e}")]
    Ellipticity { node: usize, min_eig: f64 },

    #[error("foliation failed at tau = {tau}: {reason}")]
    Foliation { tau: f64, reason: String },

    #[error("no admissible tau0 in the trial sequence: {0}")]
    ParticularSolution(String),

    #[error("barrier ordering violated at node {node}: u1 = {u1} >= u2 = {u2}")]
    Ordering { node: usize, u1: f64, u2: f64 },

    #[error("barrier condition fails on {barrier}: worst node {node}, margin {margin:e}")]
    Barrier {
        barrier: &'static str,
        node: usize,
        margin: f64,
    },

    #[error("right-hand side bound violated: {0}")]
    RhsBounds(String),

    #[error("Newton did not converge: {0}")]
    NonConvergence(String),

    #[error("monitor breach ({bound}) at t = {t}: value {value:e}, limit {limit:e}")]
    Monitor {
        bound: &'static str,
        t: f64,
        value: f64,
        limit: f64,
    },

    #[error("continuation path failure: {0}")]
    Path(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("linear algebra failure: {0}")]
    Linear(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::ConeViolation { .. } => "cone_violation",
            Error::Inadmissible { .. } => "inadmissible",
            Error::Metric(_) => "metric",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::Ellipticity { .. } => "ellipticity",
            Error::Foliation { .. } => "foliation",
            Error::ParticularSolution(_) => "particular_solution",
            Error::Ordering { .. } => "ordering",
            Error::Barrier { .. } => "barrier",
            Error::RhsBounds(_) => "rhs_bounds",
            Error::NonConvergence(_) => "non_convergence",
            Error::Monitor { .. } => "monitor",
            Error::Path(_) => "path",
            Error::Configuration(_) => "configuration",
            Error::Unsupported(_) => "unsupported",
            Error::Parse { .. } => "parse",
            Error::Expression(_) => "expression",
            Error::Io(_) => "io",
            Error::Linear(_) => "linear",
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Expression(_) | Error::Configuration(_) => 2,
            Error::Ordering { .. } | Error::Barrier { .. } | Error::RhsBounds(_) => 3,
            Error::Monitor { .. }
            | Error::Path(_)
            | Error::NonConvergence(_)
            | Error::Ellipticity { .. }
            | Error::Inadmissible { .. }
            | Error::ConeViolation { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
