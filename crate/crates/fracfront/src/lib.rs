//! Numerical library for nonlocal phase transitions and curvature
//! flows: fractional Laplacian quadrature, the standing-wave profile of
//! the one-dimensional fractional Allen-Cahn equation, the averaged
//! excess functional and its curvature limits, and a small 2-D front
//! evolution simulator.

pub mod aeps;
pub mod curvature;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod fft;
pub mod geometry;
pub mod interp;
pub mod nonlocal;
pub mod phase_field;
pub mod quad;
pub mod special;

pub use error::{Error, Result};
