//! Finite-strain hyperelasticity with a third medium for self-contact and
//! pneumatic loading, discretized with 20-node serendipity hexahedra.

pub mod assembly;
pub mod config;
pub mod element;
pub mod error;
pub mod linsolve;
pub mod material;
pub mod mesh;
pub mod post;
pub mod run;
pub mod shape;
pub mod solver;
