//! Unified multivariate cumulative-logit models for ordinal sensory data.
//!
//! The crate fits proportional and non-proportional odds models with an
//! optional panellist random intercept (marginalised by adaptive
//! Gauss-Hermite quadrature), runs the associated likelihood-ratio and
//! chi-square inference, predicts category probabilities and acceptance
//! scores, performs correspondence analysis for exploratory screening,
//! generates balanced incomplete block designs, and drives a seeded
//! simulation study measuring ordering concordance between the unified
//! model and per-attribute models.
//!
//! The core is `no_std`-compatible (`alloc` required); IO, file formats
//! and the command line live in the companion `sensilogit` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ca;
pub mod dataset;
pub mod design;
pub mod inference;
pub mod linalg;
pub mod math;
pub mod mixed;
pub mod model;
pub mod optim;
pub mod predict;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod special;
