use std::fmt;
use std::process::ExitCode;

/// A failure with its process exit code: 2 usage, 3 data, 4 numerical.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<regid::Error> for CliError {
    fn from(e: regid::Error) -> Self {
        use regid::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidHyper(_)
            | E::OrderZero
            | E::InvalidArgument(_)
            | E::HorizonTooLong { .. } => CliError::Usage(msg),
            E::LengthMismatch { .. }
            | E::EmptyData
            | E::ZeroTruth
            | E::Parse { .. }
            | E::NonConsecutiveTime { .. }
            | E::Io(_) => CliError::Data(msg),
            E::SingularSigma
            | E::SingularSystem
            | E::ZeroOutputVariance
            | E::DegenerateVariance(_) => CliError::Numerical(msg),
        }
    }
}
