//! Conformal metrics on the punctured plane and their curvature.

mod curvature;
mod field;
mod metric;
mod profile;

pub(crate) use curvature::least_squares;
pub use curvature::{
    conformal_gaussian_curvature, curvature_function, curvature_growth_exponent,
    curvature_moment_classifier, extendability_check, gauss_bonnet_residual, CurvatureGrid,
    CurvatureProfile, Extendability, GaussBonnet, GrowthFit, MomentClass, DIVERGENCE_TOL,
};
pub use field::{FieldProvenance, Hessian, Point, ScalarField};
pub use metric::{builtin_metric, ConformalMetric2D, ExponentConvention, BUILTIN_METRICS};
pub use profile::{AngularProfile, Smoothness, ANGULAR_FD_STEP, PROFILE_GRID};
