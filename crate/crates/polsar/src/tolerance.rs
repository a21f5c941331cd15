//! Numerical thresholds shared by the whole crate.

/// Relative asymmetry accepted when building a [`HermitianMatrix`](crate::linalg::HermitianMatrix)
/// from user data; the matrix is then symmetrized exactly.
pub const HERMITIAN_INPUT: f64 = 1e-10;

/// Absolute asymmetry accepted by the covariance raster reader.
pub const RASTER_HERMITIAN: f64 = 1e-12;

/// Inverses whose estimated reciprocal 1-norm condition number falls below
/// this floor are rejected as singular.
pub const RCOND_FLOOR: f64 = 1e-13;

/// Residual bound `‖A·A⁻¹ − I‖ ≤ INVERSE_RESIDUAL · ‖A‖` expected from [`inverse`](crate::linalg::inverse).
pub const INVERSE_RESIDUAL: f64 = 1e-10;

/// Statistics in `[-NEGATIVE_CLAMP, 0)` are rounding noise and are clamped to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-9;

/// Above this statistic value p-values are reported through `log10_p`
/// because the plain value underflows.
pub const LOG_PVALUE_THRESHOLD: f64 = 1400.0;
