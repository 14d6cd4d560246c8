//! Dynamics near manifolds of equilibria.
//!
//! Preset vector fields whose equilibria form lines (or higher-dimensional
//! sets), with tools to locate where normal hyperbolicity fails along them
//! and to study what the flow does nearby: first integrals, averaged slow
//! drift, Melnikov functions, heteroclinic shooting and separatrix splitting.

pub mod averaging;
pub mod classify;
pub mod connections;
pub mod error;
pub mod integrals;
pub mod integrate;
pub mod linalg;
pub mod oscillators;
pub mod portraits;
pub mod quadrature;
pub mod systems;

pub use error::{Error, Result};
