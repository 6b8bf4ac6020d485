use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("metric is not symmetric: d({x},{y}) = {dxy} but d({y},{x}) = {dyx}")]
    NonSymmetric { x: usize, y: usize, dxy: f64, dyx: f64 },

    #[error("metric must vanish exactly on the diagonal and only there: d({x},{y}) = {value}")]
    Diagonal { x: usize, y: usize, value: f64 },

    #[error("triangle inequality fails on ({x}, {y}, {z}): d(x,z) = {dxz} > d(x,y) + d(y,z) = {bound}")]
    Triangle {
        x: usize,
        y: usize,
        z: usize,
        dxz: f64,
        bound: f64,
    },

    #[error("measure must be positive and finite: mu({point}) = {weight}")]
    NonPositiveWeight { point: usize, weight: f64 },

    #[error("edge graph is disconnected: point {point} is unreachable from point 0")]
    Disconnected { point: usize },

    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("field value at point {point} is not finite")]
    NonFinite { point: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponent q = {q} outside the admissible interval ({lower}, 1) where s = {s}")]
    ExponentOutOfRange { q: f64, lower: f64, s: f64 },

    #[error("complement empty: the level set covers the whole space")]
    ComplementEmpty,

    #[error("LP solver failed on ball {ball}: {reason}")]
    Solver { ball: usize, reason: String },

    #[error(
        "no admissible point for Whitney ball {index}: every candidate has |f| > 2 alpha \
         (admissible mass fraction {fraction:.4}, guaranteed at least {margin:.4})"
    )]
    SelectionFailed {
        index: usize,
        fraction: f64,
        margin: f64,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
