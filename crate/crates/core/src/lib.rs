//! Structured variable selection for support vector machines.
//!
//! Fits hinge-loss classifiers whose selected interaction and quadratic
//! effects respect strong or weak heredity, either over polynomial
//! expansions or over spline bases.

pub mod bench;
pub mod data;
pub mod error;
pub mod eval;
pub mod expand;
pub mod heredity;
pub mod lp;
pub mod predict;
pub mod sim;
pub mod splines;
pub mod structured;
pub mod svm_l1;
pub mod svm_l2;

pub use data::Dataset;
pub use error::{Error, Result};
