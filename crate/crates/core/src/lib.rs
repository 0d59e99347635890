//! Numerical laboratory for the Lagrangian mean curvature equation
//! `Σ arctan λᵢ(D²u) = φ(x)`.
pub mod forms;
pub mod grid;
pub mod harness;
pub mod phase;
pub mod pipeline;
pub mod sampling;
pub mod solver;
pub mod spectral;
pub mod tolerance;
