//! Test case prioritization for signal-based simulation test suites.
//!
//! The crate scores suites of input/output traces with black-box
//! anti-pattern and similarity metrics, orders them with those metrics or
//! with white-box total/additional greedy coverage, and evaluates orderings
//! with APFD against a mutant kill matrix. Multi-run experiments are
//! compared with the Vargha–Delaney A12 effect size and the Mann–Whitney U
//! test.

pub mod antipattern;
pub mod cli;
pub mod coverage;
pub mod error;
pub mod eval;
pub mod io;
pub mod prioritize;
pub mod similarity;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
