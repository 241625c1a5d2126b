//! Evolutionary Dynamic Loss (EDL): distribution-free pretraining of a
//! parametric classification loss in probability space.
//!
//! The loss is a small MLP that maps a predicted probability vector plus a
//! one-hot label to a non-negative scalar. It is pretrained on unlimited
//! synthetic prediction-label pairs sampled from the probability simplex,
//! using a pairwise ranking-consistency objective: predictions with larger
//! error severity must receive larger loss. The search over loss shapes is
//! carried out by an elitist evolutionary strategy whose mutation amplitude
//! is modulated by a logistic-map chaotic coefficient stream.
//!
//! Module map:
//! - [`probspace`]: synthetic sampling on the simplex and the hardness proxy
//! - [`lossnet`]: the loss network (forward, manual backward, checkpoints)
//! - [`fitness`]: pairwise ranking loss, trend-consistency accuracy, and the
//!   Monte-Carlo fitness estimator
//! - [`chaos`]: the logistic-map coefficient stream
//! - [`evolve`]: the evolutionary strategy and the gradient-descent baseline
//! - [`downstream`]: a desk-scale classifier-training demo using the learned
//!   loss as a drop-in objective

pub mod chaos;
pub mod downstream;
mod error;
pub mod evolve;
pub mod fitness;
pub mod lossnet;
pub mod probspace;
pub mod seeds;

pub use error::{Error, Result};
