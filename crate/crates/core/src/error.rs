use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-domain input: bad labels, wrong lengths, mismatched sectors.
    #[error("invalid input: {0}")]
    Input(String),

    /// The requested computation is above a configured size guard.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// A Hamiltonian image was not found in the basis it was built from.
    #[error("basis not closed under H: image {image} of state {source_state} is missing")]
    ClosureViolation { source_state: String, image: String },

    #[error("configuration {0} is not in the sector basis")]
    NotInBasis(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm = {0})")]
    Unnormalized(f64),

    /// The forward-scattering recursion annihilated before the expected length.
    #[error("FSA recursion closed after {step} vectors, expected {expected}")]
    FsaClosure { step: usize, expected: usize },

    /// A numerical or structural self-check did not hold.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::NotInBasis(_)
            | Error::LengthMismatch { .. }
            | Error::Unnormalized(_) => 2,
            Error::ResourceLimit(_) => 3,
            Error::ClosureViolation { .. } | Error::FsaClosure { .. } | Error::Verification(_) => 4,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
