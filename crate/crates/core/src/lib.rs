//! Simulation and Monte Carlo verification of two-parameter Fleming-Viot
//! diffusions, their interval-partition analogues and the ranked-mass
//! diffusion on the Kingman simplex.
//!
//! The crate is organised bottom-up:
//!
//! * [`specialfn`] and [`rng`]: Bessel functions, log-gamma, random variates and
//!   reproducible random streams.
//! * [`types`]: atomic measures, interval partitions and ranked mass vectors.
//! * [`pd`]: Poisson-Dirichlet samplers.
//! * [`besq`]: squared Bessel transitions and absorbed paths.
//! * [`kernels`]: exact one-step transition kernels and grid paths of the
//!   self-similar superprocess, including the negative-`theta` construction.
//! * [`depoisson`]: time change and normalisation to the Fleming-Viot process.
//! * [`fdiff`]: Jacobi and Wright-Fisher diffusions.
//! * [`ekp`]: the symmetric-function algebra, the ranked generator and the
//!   up-down Chinese restaurant chain.
//! * [`verify`]: Monte Carlo harness and acceptance criteria.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besq;
pub mod depoisson;
pub mod ekp;
pub mod error;
pub mod fdiff;
pub mod kernels;
mod mpoly;
pub mod path;
pub mod pd;
pub mod rng;
pub mod specialfn;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use kernels::Params;
pub use rng::RngStream;
pub use types::{Atom, AtomMeasure, IntervalPartition, RankedVector};
