//! Simulation and certification toolkit for Clifford-enhanced product
//! states: Pauli/Clifford algebra, characteristic-function sampling,
//! fidelity-witness certification of i.i.d. and adversarial provers, and
//! magic-state-injection compilation with Clifford frame tracking. A dense
//! statevector/density-matrix oracle backs everything at small width.

pub mod certifier;
pub mod clifford;
pub mod config;
pub mod dense;
pub mod error;
pub mod msi;
pub mod pauli;
pub mod prover;
pub mod scalar;
pub mod seed;
pub mod sweep;
pub mod target;

pub use error::{Error, Result};

/// Default scalar for the protocol layer.
pub type Real64 = f64;
pub type C64 = num_complex::Complex<f64>;
pub type ChiTable64 = target::ChiTable<f64>;
pub type CpsTarget64 = target::CpsTarget<f64>;
pub type SingleQubitState64 = target::SingleQubitState<f64>;
pub type DenseState64 = dense::DenseState<f64>;
pub type DenseDensity64 = dense::DenseDensity<f64>;

/// Single-precision aliases for the generic numeric core.
pub type ChiTable32 = target::ChiTable<f32>;
pub type CpsTarget32 = target::CpsTarget<f32>;
pub type DenseState32 = dense::DenseState<f32>;
pub type DenseDensity32 = dense::DenseDensity<f32>;
