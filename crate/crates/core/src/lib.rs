//! Reconstruction of vocal-fold vibration from speech, with the forward
//! simulators, analysis primitives and metrics needed to evaluate it.

// Parameter guards use `!(x > lo)` so that NaN is rejected with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cohort;
pub mod error;
pub mod io;
pub mod lpc;
pub mod metrics;
pub mod radar;
pub mod report;
pub mod signal;
pub mod source_filter;
pub mod transform;

pub use error::{Error, Result};
