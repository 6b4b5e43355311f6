//! Numerical toolkit for fully nonlinear free boundary problems near a flat
//! Dirichlet boundary.
//!
//! The model problem is `F(D^2 u) = 1` on an unknown set `Omega` inside the
//! half disk, `|D^2 u| <= K` off it, and `u = 0` on the flat boundary. The
//! crate discretizes it, solves it in obstacle and no-sign modes, and measures
//! blow-ups, free boundary geometry and regularity along dyadic scales.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod datum;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod operator;
pub mod regularity;
pub mod scenario;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
