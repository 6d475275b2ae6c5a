//! Nonlocal variable-strength measurements of commuting N-qubit product
//! observables, using GHZ-like meters and local X-basis readout.
//!
//! Qubit 0 is the most significant bit of every basis index.

pub mod cli;
pub mod entanglement;
pub mod error;
pub mod meter;
pub mod pauli;
pub mod protocol;
pub mod statevec;

pub use error::{Result, VsmError};
pub use meter::MeterSpec;
pub use pauli::{ObservableSet, PauliLetter, ProductObservable, Sign, SignVector};
pub use protocol::MeasurementModel;
pub use statevec::{Ket, Operator};
