//! Simulation-guided barrier certificate synthesis for closed-loop systems
//! with feedforward neural-network controllers.
//!
//! The pipeline: simulate the closed loop, fit a quadratic generator function
//! by linear programming, refute its decrease condition with an interval
//! branch-and-prune δ-decision procedure (folding counterexamples back into
//! the LP), then pick a level set that separates the initial set from the
//! unsafe set and check the two containment queries.

pub mod symexpr;
pub mod network;
pub mod plant;
pub mod simulate;
pub mod lpgen;
pub mod dsat;
pub mod certify;
pub mod train;
