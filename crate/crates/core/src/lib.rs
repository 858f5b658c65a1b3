//! Probabilistic type inference for a TypeScript subset.
//!
//! Programs are lowered to a flat IR, turned into a type dependency
//! hypergraph, embedded by a graph neural network and scored against library
//! and project-defined candidate types.

pub mod eval;
pub mod frontend;
pub mod gnn;
pub mod graph;
pub mod predictor;
pub mod tensor;
pub mod trainer;
