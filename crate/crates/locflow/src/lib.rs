//! Traffic analysis for detecting location-leaking HTTP flows.
//!
//! The crate turns packet captures into labeled, classified flows in stages:
//!
//! 1. [`capture`] reads libpcap files and sessionizes packets into
//!    [`capture::HttpFlow`]s with parsed requests.
//! 2. [`features`] derives per-flow statistical and lexical vectors.
//! 3. [`context`] turns recorded app metadata into intent features built
//!    from topic, app-name, and UI-text evidence.
//! 4. [`learn`] trains the classifiers (naive Bayes, logistic regression,
//!    random forest, one-class SVM) used by the pipeline.
//! 5. [`pipeline`] combines everything: consensus labeling of app runs,
//!    automatic flow labeling, dataset assembly, and single-flow verdicts.
//! 6. [`eval`] computes detection metrics, cross-validation splits, and CDF
//!    exports for reporting.
//!
//! [`io`] holds the file formats shared by the stages, all deterministic
//! byte-for-byte under a fixed seed.

pub mod capture;
pub mod context;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod learn;
pub mod pipeline;

pub use error::{Error, Result};
