use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integer {0} needs a prime factor beyond the trial-division table")]
    Overflow(u64),
    #[error("{a} is not invertible modulo {m}")]
    NotInvertible { a: i64, m: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("pole: {0}")]
    Pole(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("euler product tail {tail:e} above target {target:e} at cutoff {cutoff}")]
    TailTooLarge { tail: f64, target: f64, cutoff: u64 },
    #[error("finite difference levels disagree: {0:e}")]
    FiniteDifference(f64),
    #[error("imaginary part {im:e} too large relative to real part {re:e}")]
    ImaginaryPart { re: f64, im: f64 },
    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
