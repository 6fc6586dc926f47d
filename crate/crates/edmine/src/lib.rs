//! Predicting learner outcomes in online courses from heterogeneous data sources.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`ingest`] loads three kinds of course datasets into a common
//!    [`ingest::DatasetBundle`] and validates its invariants.
//! 2. [`features`] turns a bundle into named, source-tagged feature matrices,
//!    derives binary pass/fail labels and encodes everything to numbers.
//! 3. [`resample`] balances the two classes (up/down/both/SMOTE).
//! 4. [`learners`] holds the from-scratch classifiers (CART tree, bagged
//!    forest, linear margin model), stratified cross-validation, grid search
//!    and metrics.
//! 5. [`selection`] ranks features with wrapper (FE/BE/RFE) and filter
//!    (ANOVA-F, Kendall tau, Pearson) methods.
//! 6. [`experiments`] orchestrates the study-level runs (balancing sweep,
//!    model comparison, source ablation, transfer matrix, selection analysis,
//!    dataset description) and writes result tables with provenance headers.
//! 7. [`synthgen`] generates synthetic course bundles with planted
//!    feature-label relationships, used as ground truth throughout the tests.
//!
//! Every run is a pure function of its inputs and an explicit seed; parallel
//! and serial executions produce identical outputs.

pub mod error;
pub mod experiments;
pub mod features;
pub mod ingest;
pub mod learners;
pub mod resample;
pub mod seed;
pub mod selection;
pub mod synthgen;

pub use error::{EdmError, Result};
