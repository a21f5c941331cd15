//! Region-based classification of polarimetric SAR covariance images.
//!
//! Segments are compared with class prototypes through test statistics
//! derived from stochastic distances between complex Wishart laws (and,
//! for amplitude data, between multivariate Gaussians). Each segment takes
//! the class of the smallest statistic, and the statistic's asymptotic χ²
//! p-value measures how well the segment fits that class.
//!
//! ```
//! use polsar::{preset, stat_bhattacharyya, CovarianceEstimate};
//!
//! let river = CovarianceEstimate::new(preset("River")?.sigma, 900, 4.0)?;
//! let tillage = CovarianceEstimate::new(preset("Tillage")?.sigma, 900, 4.0)?;
//! let same = stat_bhattacharyya(&river, &river)?;
//! let apart = stat_bhattacharyya(&river, &tillage)?;
//! assert_eq!(same.p_value, 1.0);
//! assert!(apart.statistic > 1000.0 && apart.dof == 9);
//! # Ok::<(), polsar::Error>(())
//! ```

pub mod assess;
pub mod classifier;
pub mod distances;
mod error;
pub mod io;
pub mod linalg;
pub mod raster;
pub mod render;
pub mod rng;
pub mod scenes;
pub mod special;
pub mod tolerance;
pub mod wishart;

pub use assess::{confusion, kappa, kappa_equality_test, non_rejection_rate, ConfusionMatrix, KappaReport};
pub use classifier::{
    amplitudes, classify_segments, fuse_majority, fuzzy_assign, predicted_labels, FusedAssignment, Outcome, Prototype,
    PrototypeSet, SegmentAssignment,
};
pub use distances::{
    distance_from_statistic, stat_bhattacharyya, stat_chisquare, stat_gaussian_bhattacharyya, stat_hellinger, stat_kl,
    stat_renyi, GaussianEstimate, StatisticKind, TestResult,
};
pub use error::{Error, Result};
pub use linalg::{Complex, HermitianMatrix};
pub use raster::{grid_segment, CovRaster, LabelRaster, SegmentMap};
pub use scenes::{preset, simulate_mosaic, simulate_prototypes, MosaicSpec};
pub use special::chi2_sf;
pub use wishart::{estimate_covariance, CovarianceEstimate, WishartModel};
