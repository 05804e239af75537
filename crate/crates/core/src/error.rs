use thiserror::Error;

/// Errors raised anywhere in the reduction pipeline.
#[derive(Debug, Error)]
pub enum MorError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("operator {operator} is numerically singular (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    Singular {
        operator: String,
        pivot: f64,
        threshold: f64,
    },

    #[error("capacitance matrix is singular: {0}")]
    SingularCapacitance(String),

    #[error("inductance matrix M is not positive definite")]
    InductanceNotPositiveDefinite,

    #[error("system is not asymptotically stable; offending eigenvalues: {}", format_eigs(.eigenvalues))]
    Unstable { eigenvalues: Vec<(f64, f64)> },

    #[error("Lyapunov equation is not uniquely solvable: eigenvalue pair sum magnitude {eig_sum:.3e}")]
    LyapunovSolvability { eig_sum: f64 },

    #[error("orthogonalization deflated every column")]
    EmptyBasis,

    #[error("requested order {requested} exceeds numerical rank; maximum admissible order is {max}")]
    Rank { requested: usize, max: usize },

    #[error("pencil (sC - G) is singular at f = {frequency:e} Hz")]
    SingularPencil { frequency: f64 },

    #[error("frequency grids or sample shapes do not match")]
    GridMismatch,

    #[error("format mismatch: {0}")]
    Format(String),

    #[error("schur decomposition did not converge")]
    NoConvergence,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MorError {
    /// Whether the failure is numerical (singularity, instability, rank) as
    /// opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MorError::Singular { .. }
                | MorError::SingularCapacitance(_)
                | MorError::InductanceNotPositiveDefinite
                | MorError::Unstable { .. }
                | MorError::LyapunovSolvability { .. }
                | MorError::EmptyBasis
                | MorError::Rank { .. }
                | MorError::SingularPencil { .. }
                | MorError::NoConvergence
        )
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        MorError::Validation(msg.into())
    }
}

fn format_eigs(eigs: &[(f64, f64)]) -> String {
    eigs.iter()
        .take(8)
        .map(|(re, im)| format!("{re:e}{im:+e}i"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, MorError>;
