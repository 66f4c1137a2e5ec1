//! Exit-code classification for every failure the binary can hit.
//!
//! Three classes map to the three nonzero exit codes: `Usage` (1) for flag
//! problems clap cannot see, `Data` (2) for broken inputs and invalid
//! configuration, `Backend` (3) for anything in the model-backend layer,
//! including cache misses under --offline. Library errors that wrap a
//! gateway failure classify by variant: the user's files are a data
//! problem, the model's output is a backend problem.

use std::fmt;

use simploop_core::gateway::ScriptError;
use simploop_core::study::report::ReportError;
use simploop_core::{
    CorpusError, FidelityError, GatewayError, ReadabilityError, RefineError, SimplifierError,
    StudyError,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Backend(anyhow::Error),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn data(err: impl Into<anyhow::Error>) -> Self {
        CliError::Data(err.into())
    }

    pub fn backend(err: impl Into<anyhow::Error>) -> Self {
        CliError::Backend(err.into())
    }

    /// Prepends context while keeping the exit class.
    pub fn with_context(self, context: String) -> Self {
        match self {
            CliError::Usage(message) => CliError::Usage(format!("{context}: {message}")),
            CliError::Data(err) => CliError::Data(err.context(context)),
            CliError::Backend(err) => CliError::Backend(err.context(context)),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(message) => f.write_str(message),
            // {:#} renders the whole context chain on one line
            CliError::Data(err) | CliError::Backend(err) => write!(f, "{err:#}"),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(err: CorpusError) -> Self {
        CliError::data(err)
    }
}

impl From<GatewayError> for CliError {
    fn from(err: GatewayError) -> Self {
        CliError::backend(err)
    }
}

impl From<ScriptError> for CliError {
    fn from(err: ScriptError) -> Self {
        CliError::backend(err)
    }
}

impl From<StudyError> for CliError {
    fn from(err: StudyError) -> Self {
        CliError::data(err)
    }
}

impl From<ReportError> for CliError {
    fn from(err: ReportError) -> Self {
        CliError::data(err)
    }
}

impl From<SimplifierError> for CliError {
    fn from(err: SimplifierError) -> Self {
        match err {
            SimplifierError::EmptyInput
            | SimplifierError::InvalidCandidate(_)
            | SimplifierError::CandidateFile { .. } => CliError::data(err),
            SimplifierError::Gateway(_)
            | SimplifierError::BadFinish { .. }
            | SimplifierError::EmptyRewrite => CliError::backend(err),
        }
    }
}

impl From<ReadabilityError> for CliError {
    fn from(err: ReadabilityError) -> Self {
        match err {
            ReadabilityError::EmptyText => CliError::data(err),
            ReadabilityError::Gateway(_) | ReadabilityError::UnparseableFallback { .. } => {
                CliError::backend(err)
            }
        }
    }
}

impl From<FidelityError> for CliError {
    fn from(err: FidelityError) -> Self {
        match err {
            FidelityError::EmptyOriginal | FidelityError::NoClaimsToMap => CliError::data(err),
            FidelityError::Gateway { .. }
            | FidelityError::BadCompletion { .. }
            | FidelityError::Parse { .. }
            | FidelityError::UnknownKind { .. }
            | FidelityError::NoClaims => CliError::backend(err),
        }
    }
}

impl From<RefineError> for CliError {
    fn from(err: RefineError) -> Self {
        match err {
            RefineError::EmptyCorpus
            | RefineError::InvalidConfig(_)
            | RefineError::EmptyLeaderboard
            | RefineError::UnknownPick(_) => CliError::data(err),
            RefineError::AllTextsFailed { .. } | RefineError::Propose(_) => CliError::backend(err),
        }
    }
}
