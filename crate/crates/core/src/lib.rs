//! Workbench for approximation resistance of Boolean CSP predicates.
//!
//! Exact machinery (Fourier spectra, moment matrices, vanishing measures, the
//! simplex solver, Sherali-Adams families) runs over `BigRational`. Gaussian
//! sampling, game payoffs and rounding run in `f64` and always carry the seed
//! that produced them.

pub mod combin;
pub mod error;
pub mod game;
pub mod gap;
pub mod gaussian;
pub mod io;
pub mod lp;
pub mod moments;
pub mod predicate;
pub mod rational;
pub mod relax;
pub mod rng;
pub mod rounding;
pub mod vanishing;

pub use error::{Error, Result};
pub use rational::Q;
