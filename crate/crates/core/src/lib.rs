//! Simulator of a frequency-multiplexed photonic reservoir computer.
//!
//! The reservoir state is the vector of complex sideband amplitudes of a
//! phase-modulated fibre cavity; the readout is a trained linear combination of
//! the sideband intensities. The crate also provides the standard benchmark
//! tasks (memory capacities, NARMA10, nonlinear channel equalisation, a
//! synthetic classification task) and a seeded parameter-scan harness.

// `!(x >= 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bessel;
pub mod error;
pub mod pipeline;
pub mod readout;
pub mod scan;
pub mod seeding;
pub mod tasks;
pub mod sidebands;

pub use error::{Error, Result};
pub use sidebands::{
    build_coupling_matrix, encode_input, run_sequence, step, CouplingMatrix, InputEncoding,
    Reservoir, ReservoirConfig, SidebandState,
};
