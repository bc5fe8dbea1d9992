//! Response-augmented differentiable forests.
//!
//! A forest of soft-gated binary trees acts as the controller of an
//! external response memory: every leaf reads its own memory cell, weighted
//! by the probability that a sample is routed to it, and training writes
//! the cells back with erase/add updates derived from the loss gradient.
//!
//! Losses and optimizers are interchangeable strategies looked up by name
//! in [`registry`].

pub mod cli;
pub mod data;
pub mod error;
pub mod forest;
pub mod gradcheck;
pub mod memory;
pub mod model_file;
pub mod numerics;
pub mod registry;
pub mod training;

pub use error::{RadfError, Result};
pub use forest::{ForestParams, GateParams, Gradients, RoutingResult, Sample, Tree, TreeTopology};
pub use memory::{ResponseBank, WritePlan};
pub use numerics::{Loss, LossKind, TargetRef};
pub use training::{Model, TrainConfig};
