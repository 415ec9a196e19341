//! Beam-displacer implementation of the walk in Jones calculus.

pub mod circuit;
pub mod element;
pub mod reference;
pub mod validate;

pub use circuit::{
    expected_trace, propagate, ExpectedTrace, ImperfectionModel, InputSpec, OpticalCircuit, PathState, Polarization,
    Propagation, Realization, Stage, Trace,
};
pub use element::{hwp_matrix, Displacement, HwpConvention, Jones, OpticalElement};
pub use reference::{compile_reference_circuit, exact_reference_circuit, table1_angles};
pub use validate::{validate_table1, Table1Report};
