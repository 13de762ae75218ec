use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix did not have the size the game dimensions require.
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// The number of perturbed observations did not match the schedule.
    Schedule { expected: usize, found: usize },
    InvalidParameter(&'static str),
    NonFinite(&'static str),
    NotPositiveDefinite,
    Singular,
    EigenNoConvergence,
    /// The input source stopped before the trial was complete.
    TrialAborted { expected: usize, received: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                what,
                expected,
                found,
            } => write!(f, "shape mismatch for {what}: expected {expected}, found {found}"),
            Error::Schedule { expected, found } => write!(
                f,
                "expected {expected} perturbed observations, found {found}"
            ),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::NotPositiveDefinite => f.write_str("matrix is not positive definite"),
            Error::Singular => f.write_str("matrix is singular"),
            Error::EigenNoConvergence => f.write_str("eigenvalue iteration did not converge"),
            Error::TrialAborted { expected, received } => write!(
                f,
                "trial aborted: input ended after {received} of {expected} samples"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Shape {
            what,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
