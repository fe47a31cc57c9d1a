use spatial_iv::basisdecomp::BasisError;
use spatial_iv::dr_effects::DrError;
use spatial_iv::gpsim::SimError;
use spatial_iv::linear_iv::IvError;
use spatial_iv::spatialdata::DataError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("benchmark band failure: {0}")]
    BandFailure(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 1 output i/o, 2 config, 3 data, 4 benchmark band failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::BandFailure(_) => 4,
        }
    }

    pub fn config(msg: impl std::fmt::Display) -> Self {
        Self::Config(msg.to_string())
    }

    pub fn data(msg: impl std::fmt::Display) -> Self {
        Self::Data(msg.to_string())
    }

    /// Prefixes the message with where it happened.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Self::Config(m) => Self::Config(format!("{ctx}: {m}")),
            Self::Data(m) => Self::Data(format!("{ctx}: {m}")),
            Self::BandFailure(m) => Self::BandFailure(format!("{ctx}: {m}")),
            Self::Io(e) => Self::Io(std::io::Error::new(e.kind(), format!("{ctx}: {e}"))),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::KTooLarge { .. } => Self::Config(e.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<BasisError> for CliError {
    fn from(e: BasisError) -> Self {
        match e {
            BasisError::DfOutOfRange { .. } | BasisError::MOutOfRange { .. } | BasisError::TargetOutOfRange(_) => {
                Self::Config(e.to_string())
            }
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(_) | SimError::TooFewReps { .. } => Self::Config(e.to_string()),
            SimError::Data(d) => d.into(),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<DrError> for CliError {
    fn from(e: DrError) -> Self {
        match e {
            DrError::InvalidConfig(_) | DrError::KTooLarge { .. } => Self::Config(e.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<IvError> for CliError {
    fn from(e: IvError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Data(e.to_string())
    }
}
