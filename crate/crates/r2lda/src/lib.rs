//! Doubly regularized linear discriminant analysis (R2LDA) for binary
//! classification, with automatic ridge-parameter selection.
//!
//! The classical LDA score `(x - m⁺/2)ᵀ Σ̂⁻¹ m̂⁻` is rewritten as an inner
//! product `zᵀb` of two vectors, each estimated through a ridge-regularized
//! linear model whose operator is the square root of the pooled sample
//! covariance. The two regularization parameters are chosen automatically:
//! `γ_b` once from the training data and `γ_z` afresh for every test sample,
//! which is what makes the classifier robust to test-only contamination.
//!
//! Three selectors are provided: COPRA (secular-equation root with eigenvalue
//! partitioning), BPR (the same equation without partitioning), and GCV
//! (grid minimization of the generalized cross-validation function).
//!
//! ```
//! use r2lda::classify::{train_r2lda, assign};
//! use r2lda::datasets::{gen_synthetic, SyntheticSpec};
//! use r2lda::regsel::RegSelector;
//!
//! let spec = SyntheticSpec { p: 20, n0: 30, n1: 30, seed: 7, ..Default::default() };
//! let data = gen_synthetic(&spec).unwrap();
//! let model = train_r2lda(&data.train, RegSelector::bpr()).unwrap();
//! let score = model.score(&data.test0.row(0).to_owned()).unwrap();
//! let _label = assign(score.w, model.log_prior_ratio());
//! ```

// `!(x > 0.0)` guards reject NaN along with non-positive values; the
// suggested `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod datasets;
mod error;
pub mod linalg;
pub mod regsel;
pub mod stats;

pub use error::{Error, Result};
