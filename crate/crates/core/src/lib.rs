//! Synthetic text augmentation benchmark.
//!
//! The pipeline fits one back-off n-gram generator per sentiment class on
//! genuine reviews, composes prompts from frequent n-grams, generates
//! synthetic reviews, and measures how a Multinomial Naive Bayes classifier
//! trained on genuine + synthetic data compares with one trained on genuine
//! data alone, on a single genuine-only test set.
//!
//! The data-parallel loops (n-gram counting, batch generation, classifier
//! fitting and prediction) run on rayon when the `parallel` feature is on;
//! see [`exec::Execution`].

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod experiment;
pub mod generator;
pub mod promptaid;
pub mod seed;
pub mod text;

pub use corpus::{Corpus, Label, LabeledReview, Provenance};
pub use error::{Error, Result};
pub use exec::Execution;
