//! Fingerspelling recognition from 21-point hand landmarks.
//!
//! - [`features`]: landmark frame to normalized 42-value feature vector
//! - [`dataset`]: labeled landmark CSV files, stratified splits, synthetic data
//! - [`model`]: dense classifier with backpropagation, SGD training, weight files
//! - [`eval`]: confusion matrix and classification report
//! - [`serve`]: streaming prediction service
//! - [`cli`]: the `slr` command

pub mod cli;
pub mod dataset;
pub mod eval;
pub mod features;
mod io_util;
pub mod label;
pub mod model;
pub mod serve;

pub use features::{extract_features, FeatureError, FeatureVector, LandmarkFrame, Point2};
pub use label::{GestureLabel, NUM_CLASSES};
pub use model::{predict, ModelParams, Prediction};
