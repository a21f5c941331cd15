//! The guide's chapters, compiled here so their listings run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/statistics.md")]
pub mod statistics {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/classification.md")]
pub mod classification {}

#[doc = include_str!("../../../book/src/assessment.md")]
pub mod assessment {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
