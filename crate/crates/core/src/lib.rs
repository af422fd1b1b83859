//! Two-dimensional incompressible Euler flows with bounded, non-decaying
//! velocity and vorticity, in the plane or outside a single obstacle.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod estimates;
pub mod fields;
pub mod geometry;
pub mod initdata;
pub mod kernels;
pub mod quadrature;
pub mod scenarios;
pub mod serfati;
pub mod solver;
pub mod transport;
