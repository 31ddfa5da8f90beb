use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("eigenvalue iteration did not converge after {retries} similarity retries")]
    NoConvergence { retries: usize },

    #[error("singular linear system in {context}: smallest pivot {pivot:.3e}")]
    Singular { context: &'static str, pivot: f64 },

    #[error("parameter out of range: {0}")]
    Range(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("history covers [{have_from}, {have_to}] but [{need_from}, {need_to}] is required")]
    History {
        have_from: f64,
        have_to: f64,
        need_from: f64,
        need_to: f64,
    },

    #[error("step size: {0}")]
    Step(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("discretization: {0}")]
    Discretization(String),

    #[error("decay fit: {0}")]
    Fit(String),
}
