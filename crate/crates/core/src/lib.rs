//! Singular extensions of critical fractional Sobolev maps into round spheres.
//!
//! A boundary map `u` on `R^m` (constant outside a window) is extended to the
//! half-space by averaging, the half-space is tiled by lambda-adic cubes, and each
//! cube receives either a cap-averaged extension (good cubes) or a homogeneous one
//! with a single point singularity (bad cubes).

pub mod boundary_map;
pub mod conformal;
pub mod config;
pub mod convolution_extension;
pub mod cube_extension;
pub mod error;
pub mod lambda_cubes;
pub mod manifold;
pub mod mean_oscillation;
pub mod pipeline;
pub mod skeleton_selection;
pub mod suite;
pub mod sum;
pub mod verify;

pub use boundary_map::{
    gagliardo_energy, gap_potential, truncated_energy, winding_number, BasePoint, BoundaryData, BoundaryMap,
    FnBoundary, Interpolation, QuadratureSpec, Rescaled, TailMode,
};
pub use convolution_extension::{ConvolutionExtension, Gradient, Mollifier};
pub use cube_extension::{
    assemble, CubeExtension, CubeKind, DistributionReport, DistributionSpec, ExtensionField, MeasureWeight, SurfaceTrace,
};
pub use config::{Calibration, RunConfig};
pub use conformal::{psi, psi_inv, ConformalMap, SphereQuadrature};
pub use error::{Error, Result};
pub use lambda_cubes::{CubeBox, CubeFamilyParams, CubeId, FaceKind, FaceSet, Translations};
pub use manifold::{Ambient, TargetKind, TargetManifold};
pub use mean_oscillation::{HalfSpacePoint, Oscillation};
pub use pipeline::{energy_summary, run_pipeline, sweep, EnergySummary, PipelineRun, SuiteCase};
pub use skeleton_selection::{
    choose_lambda, classify_cubes, select_tau_h, CalibrationConstants, CubeClassification, McEstimate, McSpec,
    SkeletonConfig, SkeletonSelection, TranslationMode,
};
