//! Reference-element machinery: basis functions and quadrature rules.

pub mod basis;
pub mod quadrature;

pub use basis::{
    bubble_ref_gradient, bubble_value, p1_ref_gradients, p1_values, rt0_eval, TriangleGeometry,
};
pub use quadrature::{quad_edge, quad_triangle, EdgeQuadrature, TriangleQuadrature};
