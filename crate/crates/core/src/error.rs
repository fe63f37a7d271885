use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("lane boundaries cross within range (at arc length {arc_length:.2} m)")]
    BoundaryCrossing { arc_length: f64 },
    #[error("boundary too short: {length:.3} m, need at least {required:.3} m")]
    InsufficientBoundary { length: f64, required: f64 },
    #[error("sensor position ({x:.2}, {y:.2}) lies outside the occupancy grid")]
    SensorOutOfGrid { x: f64, y: f64 },
    #[error("sensor position ({x:.2}, {y:.2}) lies inside an obstacle cell")]
    SensorInsideObstacle { x: f64, y: f64 },
    #[error("height map needs at least one sample")]
    EmptySamples,
    #[error("point at depth {z:.3} m is behind the near plane")]
    BehindCamera { z: f64 },
    #[error("mask shapes differ: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("unknown scenario kind `{0}`")]
    UnknownScenarioKind(String),
    #[error("scene schema error: {0}")]
    Schema(String),
    #[error("mask format error: {0}")]
    MaskFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable name used in run reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::BoundaryCrossing { .. } => "BoundaryCrossing",
            Error::InsufficientBoundary { .. } => "InsufficientBoundary",
            Error::SensorOutOfGrid { .. } => "SensorOutOfGrid",
            Error::SensorInsideObstacle { .. } => "SensorInsideObstacle",
            Error::EmptySamples => "EmptySamples",
            Error::BehindCamera { .. } => "BehindCamera",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::EmptyEvaluation => "EmptyEvaluation",
            Error::UnknownScenarioKind(_) => "UnknownScenarioKind",
            Error::Schema(_) => "Schema",
            Error::MaskFormat(_) => "MaskFormat",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
