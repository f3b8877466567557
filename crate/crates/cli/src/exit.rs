use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Usage,
    Failure,
    /// Batch finished but some cases were skipped.
    Partial,
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        ExitCode::from(match o {
            Outcome::Success => 0,
            Outcome::Usage => 1,
            Outcome::Failure => 2,
            Outcome::Partial => 3,
        })
    }
}

#[derive(Debug)]
pub struct Failure {
    pub outcome: Outcome,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { outcome: Outcome::Usage, error: anyhow::anyhow!(msg.into()) }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self { outcome: Outcome::Failure, error: e.into() }
    }
}

pub type CmdResult = Result<Outcome, Failure>;
