use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("normal flux violates compatibility at time index {t_index}: defect {defect:.3e} exceeds {tolerance:.3e}")]
    Incompatible {
        t_index: usize,
        defect: f64,
        tolerance: f64,
    },

    #[error("saddle-point solve did not reach tolerance {tol:.1e} (residual history {history:?})")]
    NonConvergence { tol: f64, history: Vec<f64> },

    #[error("CFL guard tripped at step {step}: dt = {dt:.3e} exceeds limit {limit:.3e}")]
    Cfl { step: usize, dt: f64, limit: f64 },

    #[error("blow-up guard tripped at step {step}: energy {energy:.3e} exceeds {threshold:.3e}")]
    BlowUp {
        step: usize,
        energy: f64,
        threshold: f64,
    },

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
