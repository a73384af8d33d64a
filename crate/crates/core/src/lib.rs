//! Numerical toolkit for the sharp Sobolev inequality on the circle,
//! `integral (4 v'^2 - v^2) >= -4 pi^2 / integral v^-2` for positive `v`.

pub mod cli;
pub mod closed_forms;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod iteration;
pub mod oracle;
pub mod quadrature;
pub mod symmetries;

pub use error::{Error, Result};
pub use grid::{CircleFunction, DiffScheme, Role, Smoothness};
