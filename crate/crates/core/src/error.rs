use thiserror::Error;

/// Errors surfaced by mesh construction, kernel compression and time stepping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sum-of-exponentials tolerance {eps:.3e} unachievable on [{dt:.3e}, {t_final:.3e}] within {cap} modes (best deviation {best:.3e})")]
    ToleranceUnachievable {
        eps: f64,
        dt: f64,
        t_final: f64,
        cap: usize,
        best: f64,
    },

    #[error("Picard iteration did not converge at level {level} (t = {t:.6e}, {iters} iterations, last increment {increment:.3e})")]
    PicardDiverged {
        level: usize,
        t: f64,
        iters: usize,
        increment: f64,
    },

    #[error("non-positive shift c = {0:.3e} in Helmholtz solve")]
    NonPositiveShift(f64),

    #[error("kernel assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("Mittag-Leffler series overflow for z = {0:.3e}")]
    Overflow(f64),

    #[error("degenerate convergence pair: equal max steps {0:.3e}")]
    DegenerateOrder(f64),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
