//! Numerical minimization of the causal action principle for weighted counting
//! measures on the space of self-adjoint operators of signature (n, n).
//!
//! The crate is organised bottom-up:
//!
//! * [`operators`] defines points of the operator space and configurations.
//! * [`action`] evaluates the Lagrangian, the causal action and the boundedness functional.
//! * [`parametrize`] maps an unconstrained real vector onto configurations.
//! * [`gradient`] provides the analytic gradient and a finite-difference check.
//! * [`optimize`] contains the two-stage quasi-Newton driver.
//! * [`oracles`] holds the closed-form reference configurations.
//! * [`geometry`] projects pairs onto the spin-1/2 picture used for cone plots.
//! * [`io`], [`commands`] and [`cli`] implement the `cfs` command-line tool.

pub mod action;
pub mod cli;
pub mod commands;
pub mod error;
pub mod geometry;
pub mod gradient;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod optimize;
pub mod oracles;
pub mod parametrize;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};
