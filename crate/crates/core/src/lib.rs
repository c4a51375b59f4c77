//! Stabilized nonconforming finite elements for the elliptic Cauchy problem in 2D.
//!
//! The primal unknown `u_h` and the dual unknown `z_h` live in the piecewise-affine
//! Crouzeix–Raviart space; primal and dual face-jump stabilizations make the coupled
//! saddle-point system uniquely solvable even though the continuous problem is ill-posed.

pub mod analysis;
pub mod error;
pub mod forms;
pub mod harness;
pub mod linsys;
pub mod mesh;
pub mod quadrature;
mod rng;
pub mod solver;
pub mod space;
pub mod sparse;

pub use error::{Error, Result};

/// A point of the plane.
pub type Point = [f64; 2];
