//! Multi-task segmentation of structural elements and corrosion defects.
//!
//! A shared encoder feeds two task-specific relearning subnets whose outputs
//! exchange information through sigmoid spatial-attention masks before two
//! segmentation decoders. Training balances the task losses with Dynamic
//! Weight Average. The crate also carries the evaluation metrics, a synthetic
//! dataset generator and a per-element corrosion condition grader.

pub mod assess;
pub mod error;
pub mod nn;

pub use error::{Error, Result};
pub mod dataset;
pub mod kv;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod trainer;
