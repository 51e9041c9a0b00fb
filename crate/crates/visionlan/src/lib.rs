//! VisionLAN-style scene text recognition at desk scale.
//!
//! A convolutional backbone feeds a visual reasoning module (transformer
//! stack + parallel per-character attention decoding). During training a
//! masked language-aware module learns, from word-level labels alone, to
//! localize and occlude one character's visual evidence so the recognizer is
//! forced to infer it from context. At test time the masking module is
//! dropped entirely: linguistic capability costs zero extra parameters.

pub mod config;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod font;
pub mod gradcheck;
pub mod model;
pub mod occlude;
pub mod ops;
pub mod params;
pub mod render;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod threads;
pub mod training;
pub mod vocab;

pub use error::{Result, VlanError};
pub use tensor::{Dtype, Scalar, Tensor};
