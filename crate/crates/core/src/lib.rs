//! Sequential generative modelling of LEGO brick assemblies.
//!
//! Structures are directed labelled graphs ([`geometry::LegoGraph`]); the
//! crate covers their physical semantics, a build-sequence dataset format,
//! a small reverse-mode autodiff engine, the sequential graph generator, a
//! GIN feature extractor, embedding-based evaluation metrics and the
//! experiment harness behind the `legogen` binary.

pub mod geometry;
pub mod ldraw;
pub mod tensor;
pub mod dataset;
pub mod dgmlg;
pub mod gin;
pub mod metrics;
pub mod harness;
pub mod cli;
