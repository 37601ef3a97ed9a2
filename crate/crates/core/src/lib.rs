//! Computable machinery for self-interacting random walks on rooted trees.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! * [`tree`]: arena trees, spherically symmetric level profiles, the
//!   chain-compressed skeleton of random polynomial trees, generators and
//!   cutset checks;
//! * [`weights`]: initial/reinforced edge weights and the M-ratio check;
//! * [`ruin`]: one-dimensional ruin probabilities `ψ`/`Ψ`, modified
//!   conductances, cutset minimisation and the critical-exponent
//!   estimators (RT index, branching-ruin number, branching number);
//! * [`walker`]: direct and clock-driven (Rubin) simulation of the
//!   generalised once-reinforced walk, path extensions and escape
//!   experiments;
//! * [`percolation`]: the correlated clock percolation, independent
//!   `ψ`-percolation, level-probability percolation and the
//!   quasi-independence estimator;
//! * [`flows`]: effective conductance, max-flow on trees, flow energy and
//!   the `C_λ` bound.
//!
//! All randomness is driven by explicit seeds; every sampler is a pure
//! function of its inputs and seed.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod counter;
pub mod flows;
pub mod percolation;
pub mod ruin;
pub mod tree;
pub mod walker;
pub mod weights;

mod bits;
mod numeric;

pub use bits::BitSet;
