//! SPOD Petrov-Galerkin reduced-order models for forced linear
//! time-invariant systems, with full-order reference solvers, baseline ROMs
//! and the benchmark problems used to compare them.

pub mod baselines;
pub mod benchmarks;
pub mod error;
pub mod expm;
pub mod fft;
pub mod forcing;
pub mod freq;
pub mod io;
pub mod linalg;
pub mod lti;
pub mod modal;
pub mod ode;
pub mod rom;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use lti::{FrequencyGrid, LtiSystem, Operator, Weight};
