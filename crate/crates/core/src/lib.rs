//! Linear state-based peridynamics for two-phase elastic media: nonlocal
//! operators, their local and interface limits, and a collocation solver.

pub mod analysis;
pub mod fields;
pub mod operators;
pub mod quadrature;
pub mod solver;
pub mod tensor;
