//! Failure classes and their exit codes.

use roomfit_core::constraints::ConstraintError;
use roomfit_core::envelope::EnvelopeError;
use roomfit_core::io::FormatError;
use roomfit_core::losses::LossError;
use roomfit_core::pipeline::PipelineError;
use roomfit_core::registration::RegistrationError;
use roomfit_core::synth::SynthError;
use roomfit_core::tsdf::TsdfError;
use roomfit_core::GeomError;
use thiserror::Error;

/// | code | meaning |
/// |---|---|
/// | 0 | success |
/// | 1 | other failure (output I/O, internal) |
/// | 2 | input missing or unparseable, or unusable input data |
/// | 3 | fusion extracted no surface |
/// | 4 | layout written with residual constraint violations |
/// | 5 | invalid configuration or command line |
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Other(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Empty(String),
    #[error("{0} constraint violation(s) left after resolution")]
    Residual(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Input(_) => 2,
            CliError::Empty(_) => 3,
            CliError::Residual(_) => 4,
            CliError::Config(_) => 5,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io { .. } | FormatError::Invalid(_) => CliError::Other(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TsdfError> for CliError {
    fn from(e: TsdfError) -> Self {
        match e {
            TsdfError::InvalidParams(_) => CliError::Config(e.to_string()),
            TsdfError::EmptyVolume | TsdfError::NoDepth => CliError::Empty(e.to_string()),
            TsdfError::Format(f) => f.into(),
        }
    }
}

impl From<EnvelopeError> for CliError {
    fn from(e: EnvelopeError) -> Self {
        match e {
            EnvelopeError::Format(f) => f.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<RegistrationError> for CliError {
    fn from(e: RegistrationError) -> Self {
        match e {
            RegistrationError::Format(f) => f.into(),
            RegistrationError::InvalidAngleStep(_) => CliError::Config(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<ConstraintError> for CliError {
    fn from(e: ConstraintError) -> Self {
        match e {
            ConstraintError::Format(f) => f.into(),
            ConstraintError::UnknownInstance(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Envelope(e) => e.into(),
            PipelineError::Registration(e) => e.into(),
            PipelineError::Constraint(e) => e.into(),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) | SynthError::CameraOutsideRoom { .. } => CliError::Config(e.to_string()),
            SynthError::UnknownModel(_) => CliError::Input(e.to_string()),
            SynthError::Format(f) => f.into(),
            SynthError::Geom(g) => CliError::Other(g.to_string()),
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        CliError::Input(e.to_string())
    }
}
