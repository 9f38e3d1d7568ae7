//! Intermediate-layer concatenation (ILC) for cross-domain deception
//! detection.
//!
//! Encoders trained on different text domains are frozen, their pooled
//! representations are concatenated per document, and a small classifier
//! head is trained on the result for each target domain. The crate covers
//! the whole path: corpus loading and splitting, a from-scratch stacked LSTM
//! baseline, representation stores, ILC concatenation, the MLP head,
//! metrics and tables, 2-D SVD projections, and a cached pipeline driven by
//! a config file.
//!
//! The `examples/` directory has one runnable program per capability.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod head;
pub mod lstm;
pub mod mlp;
pub mod optim;
pub mod pipeline;
pub mod projection;
pub mod rng;
pub mod synthetic;
pub mod text;
pub mod train;

pub use corpus::{Document, Domain, Label, Split};
pub use error::{Error, Result};
