//! Kernel two-sample testing with unequal sample sizes.
//!
//! The crate computes the unbiased MMD² estimator and its paired-sample
//! U-statistic variant, their exact finite-sample variances, the limit laws
//! under the `min(nX, nY)` scaling, permutation tests with exact level control,
//! and a signal-to-noise kernel tuner. Every closed-form variance is checked
//! against [`oracle`], which enumerates all sample tuples of finite discrete
//! distributions.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. The `parallel` feature spreads Gram construction, permutation
//! statistics and limit sampling over a rayon pool; results are seed-identical
//! with or without it.
//!
//! ```
//! use mmd_core::{estimators, kernels::{self, KernelSpec}, Matrix, SampleSet};
//!
//! let x = Matrix::column(&[0.1, -0.4, 0.3, 0.9]);
//! let y = Matrix::column(&[2.0, 2.5, 1.7]);
//! let samples = SampleSet::new(x, y).unwrap();
//! let blocks = kernels::gram_blocks(&KernelSpec::gaussian(1.0).unwrap(), &samples).unwrap();
//! let est = estimators::mmd_unbiased(&blocks).unwrap();
//! assert!(est.value > 0.0);
//! ```

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod asymptotics;
pub mod corpus;
pub mod error;
pub mod estimators;
pub mod genustat;
pub mod kernels;
pub mod linalg;
pub mod matrix;
pub mod oracle;
pub mod permtest;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod tuner;
pub mod variance;

mod exec;
mod math;
mod numeric;

pub use error::{Error, Result};
pub use matrix::{Matrix, SampleSet};
