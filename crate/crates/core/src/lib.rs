//! Complex Bessel processes of negative dimension, the stochastic flow of
//! `dH = dB + ((δ−1)/2)(1/H) dt`, and SLE_κ traces for κ < 4 obtained from it.
//!
//! Everything numerical is generic over [`Real`]; the aliases at the crate root
//! fix the scalar to `f64`.

// `!(x > 0)` is the NaN-rejecting form used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cbes;
pub mod error;
pub mod field;
pub mod io;
pub mod noise;
pub mod scalar;
pub mod sle;
pub mod solver;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use noise::{keyed_normal, reversed, DrivingNoise, Negated, ZeroNoise};
pub use scalar::{Field, Real};
pub use solver::{exponents, Flow};

pub type Complex = num_complex::Complex<f64>;
pub type BrownianPath = noise::BrownianPath<f64>;
pub type FlowParams = solver::FlowParams<f64>;
pub type ExponentTriple = solver::ExponentTriple<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type FlowSolution = solver::FlowSolution<f64>;
pub type HittingRecord = solver::HittingRecord<f64>;
pub type BoundaryLimit = solver::BoundaryLimit<f64>;
pub type ComplexProcessPath = cbes::ComplexProcessPath<f64>;
pub type FieldGrid = field::FieldGrid<f64>;
pub type Trace = sle::Trace<f64>;
