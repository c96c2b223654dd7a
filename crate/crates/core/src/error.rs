use thiserror::Error;

/// Errors produced by lattice generation, coarse-graining, sampling and solving.
#[derive(Debug, Error)]
pub enum QcError {
    #[error("invalid lattice parameters: {0}")]
    InvalidLattice(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("strut {0} has already failed")]
    DeadStrut(usize),

    #[error("mesh construction failed: {0}")]
    Mesh(String),

    #[error("point ({x}, {y}) lies outside element {element}")]
    OutsideElement { element: usize, x: f64, y: f64 },

    #[error("ghost node {0} has no owning element")]
    MissingOwner(usize),

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("singular Vandermonde matrix: {0}")]
    SingularVandermonde(String),

    #[error("boundary condition: {0}")]
    BoundaryCondition(String),

    #[error("singular or indefinite system: {0}")]
    SingularSystem(String),

    #[error("linear solve did not converge (relative residual {residual:e} > {tolerance:e})")]
    NotConverged { residual: f64, tolerance: f64 },

    #[error("reference field has zero norm")]
    ZeroReference,

    #[error("field mismatch: {0}")]
    Mismatch(String),

    #[error("convergence fit: {0}")]
    Fit(String),

    #[error("fracture: {0}")]
    Fracture(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl QcError {
    /// Short machine-readable category, used by the CLI for error reporting.
    pub fn category(&self) -> &'static str {
        match self {
            QcError::InvalidLattice(_) | QcError::InvalidMaterial(_) | QcError::DeadStrut(_) => {
                "lattice"
            }
            QcError::Mesh(_) | QcError::OutsideElement { .. } | QcError::MissingOwner(_) => "mesh",
            QcError::Sampling(_) | QcError::SingularVandermonde(_) => "sampling",
            QcError::BoundaryCondition(_)
            | QcError::SingularSystem(_)
            | QcError::NotConverged { .. } => "solver",
            QcError::ZeroReference | QcError::Mismatch(_) | QcError::Fit(_) => "analysis",
            QcError::Fracture(_) => "fracture",
            QcError::Config(_) => "config",
            QcError::Io { .. } => "io",
        }
    }

    /// Process exit code associated with the error category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "lattice" => 3,
            "mesh" => 4,
            "sampling" => 5,
            "solver" => 6,
            "analysis" => 7,
            "fracture" => 8,
            "io" => 9,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        QcError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, QcError>;
