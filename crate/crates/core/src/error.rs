use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid task `{id}`: {reason}")]
    InvalidTask { id: String, reason: String },

    #[error("gang members have different periods ({first} vs {other})")]
    PeriodMismatch { first: u64, other: u64 },

    #[error("gang needs {cores} cores but the platform has {m}")]
    NotViable { cores: u32, m: u32 },

    #[error("duplicate task id `{0}`")]
    DuplicateId(String),

    #[error("empty member list")]
    EmptyGang,

    #[error("task `{0}` is not a member of the gang")]
    TaskNotInGang(String),

    #[error("task `{0}` is not part of the taskset")]
    TaskNotInTaskset(String),

    #[error("configuration space of {bound} exceeds the cap of {cap}")]
    ConfigSpaceTooLarge { bound: u128, cap: u128 },

    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("trace is incomplete: entity `{0}` never completed its first job")]
    IncompleteTrace(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("generated utilization {got} misses target {target}")]
    UnreachableTarget { target: f64, got: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name, used by the CLI error report and the C API.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidTask { .. } => "InvalidTask",
            Error::PeriodMismatch { .. } => "PeriodMismatch",
            Error::NotViable { .. } => "NotViable",
            Error::DuplicateId(_) => "DuplicateId",
            Error::EmptyGang => "EmptyGang",
            Error::TaskNotInGang(_) => "TaskNotInGang",
            Error::TaskNotInTaskset(_) => "TaskNotInTaskset",
            Error::ConfigSpaceTooLarge { .. } => "ConfigSpaceTooLarge",
            Error::Overflow(_) => "Overflow",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::IncompleteTrace(_) => "IncompleteTrace",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::UnreachableTarget { .. } => "UnreachableTarget",
            Error::Json(_) => "SchemaViolation",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
        }
    }
}
