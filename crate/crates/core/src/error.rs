use thiserror::Error;

use crate::lambda_cubes::CubeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} is off the target (norm {norm})")]
    InvalidPoint { point: [f64; 3], norm: f64 },

    #[error("nearest-point retraction is undefined at the origin")]
    UndefinedRetraction,

    #[error("interpolation degenerates to the zero vector in cell {cell:?}")]
    InterpolationDegenerate { cell: [usize; 2] },

    #[error("ambiguous lift: consecutive samples {index} and {next} are antipodal")]
    AmbiguousLift { index: usize, next: usize },

    #[error("scale {k} is outside the scale range [{k_min}, {k_max}]")]
    ScaleOutOfRange { k: i32, k_min: i32, k_max: i32 },

    #[error("height {height} lies outside the cube band; nearest valid scale is {nearest_k}")]
    OutOfBand { height: f64, nearest_k: i32 },

    #[error(
        "no (tau, h) candidate among {budget} keeps the skeleton within {threshold} of the target \
         (lambda = {lambda}); increase B_lambda"
    )]
    SelectionFailure { budget: usize, lambda: f64, threshold: f64 },

    #[error("tube violation in cube {id} at {point:?}: distance {distance} exceeds {tube_radius}")]
    TubeViolation { id: CubeId, point: [f64; 3], distance: f64, tube_radius: f64 },

    #[error("the homogeneous extension is singular at the cube center {center:?}")]
    SingularPoint { center: [f64; 3] },

    #[error("point {point:?} is at the pole of the conformal map")]
    Pole { point: [f64; 3] },

    #[error("boundary sampling too coarse: {0}")]
    Resolution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
