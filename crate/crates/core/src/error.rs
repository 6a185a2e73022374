use std::fmt;

/// Pipeline stage an error originated from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Model,
    Conservation,
    Chart,
    Scaling,
    Expand,
    Factorize,
    Geometry,
    Projector,
    Parametrize,
    Integrate,
    BasePoint,
    Catalogue,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Model => "model",
            Stage::Conservation => "conservation",
            Stage::Chart => "chart",
            Stage::Scaling => "scaling",
            Stage::Expand => "expand",
            Stage::Factorize => "factorize",
            Stage::Geometry => "geometry",
            Stage::Projector => "projector",
            Stage::Parametrize => "parametrize",
            Stage::Integrate => "integrate",
            Stage::BasePoint => "base-point",
            Stage::Catalogue => "catalogue",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{stage}: invalid input: {msg}")]
    Invalid { stage: Stage, msg: String },
    #[error("{stage}: unsupported: {msg}")]
    Unsupported { stage: Stage, msg: String },
    #[error("{stage}: numerical failure: {msg}")]
    Numerical { stage: Stage, msg: String },
}

impl Error {
    pub fn invalid(stage: Stage, msg: impl Into<String>) -> Self {
        Error::Invalid { stage, msg: msg.into() }
    }

    pub fn unsupported(stage: Stage, msg: impl Into<String>) -> Self {
        Error::Unsupported { stage, msg: msg.into() }
    }

    pub fn numerical(stage: Stage, msg: impl Into<String>) -> Self {
        Error::Numerical { stage, msg: msg.into() }
    }

    pub fn stage(&self) -> Stage {
        match self {
            Error::Invalid { stage, .. } | Error::Unsupported { stage, .. } | Error::Numerical { stage, .. } => {
                *stage
            }
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
