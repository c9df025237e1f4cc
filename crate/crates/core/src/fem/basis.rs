//! Reference-element basis functions: P1, the cubic bubble, lowest-order
//! Raviart-Thomas, and piecewise constants.
//!
//! P1 and the bubble are expressed through barycentric coordinates; the
//! RT0 basis is built directly in physical coordinates (the image of the
//! reference basis under the contravariant Piola map), normalized so the
//! degree of freedom is the integrated flux through the edge.

use crate::error::{Error, Result};

/// Barycentric coordinates at a reference point `(x, y)`.
pub fn p1_values(p: [f64; 2]) -> [f64; 3] {
    [1.0 - p[0] - p[1], p[0], p[1]]
}

/// Constant reference gradients of the three barycentric coordinates.
pub fn p1_ref_gradients() -> [[f64; 2]; 3] {
    [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]
}

/// Bubble function `27 l1 l2 l3`, equal to 1 at the barycenter and zero on
/// the boundary of the reference triangle.
pub fn bubble_value(p: [f64; 2]) -> f64 {
    let l = p1_values(p);
    27.0 * l[0] * l[1] * l[2]
}

/// Reference gradient of the bubble.
pub fn bubble_ref_gradient(p: [f64; 2]) -> [f64; 2] {
    let l = p1_values(p);
    let g = p1_ref_gradients();
    let mut out = [0.0, 0.0];
    let factors = [l[1] * l[2], l[0] * l[2], l[0] * l[1]];
    for i in 0..3 {
        out[0] += 27.0 * factors[i] * g[i][0];
        out[1] += 27.0 * factors[i] * g[i][1];
    }
    out
}

/// Affine geometry of a physical triangle: area, physical barycentric
/// gradients and the reference-to-physical map.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub verts: [[f64; 2]; 3],
    pub area: f64,
    /// Physical gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl TriangleGeometry {
    pub fn new(verts: [[f64; 2]; 3]) -> Result<Self> {
        let [a, b, c] = verts;
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
        if area <= 0.0 {
            return Err(Error::DegenerateTriangle { index: 0, area });
        }
        let inv2a = 1.0 / (2.0 * area);
        let grad_lambda = [
            [(b[1] - c[1]) * inv2a, (c[0] - b[0]) * inv2a],
            [(c[1] - a[1]) * inv2a, (a[0] - c[0]) * inv2a],
            [(a[1] - b[1]) * inv2a, (b[0] - a[0]) * inv2a],
        ];
        Ok(TriangleGeometry {
            verts,
            area,
            grad_lambda,
        })
    }

    /// Physical image of a reference point.
    pub fn map(&self, p: [f64; 2]) -> [f64; 2] {
        let l = p1_values(p);
        let mut x = [0.0, 0.0];
        for i in 0..3 {
            x[0] += l[i] * self.verts[i][0];
            x[1] += l[i] * self.verts[i][1];
        }
        x
    }

    /// Physical gradients of the P1 basis (constant over the triangle).
    pub fn p1_gradients(&self) -> [[f64; 2]; 3] {
        self.grad_lambda
    }

    /// Physical gradient of the bubble at a reference point.
    pub fn bubble_gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let l = p1_values(p);
        let factors = [l[1] * l[2], l[0] * l[2], l[0] * l[1]];
        let mut out = [0.0, 0.0];
        for i in 0..3 {
            out[0] += 27.0 * factors[i] * self.grad_lambda[i][0];
            out[1] += 27.0 * factors[i] * self.grad_lambda[i][1];
        }
        out
    }

    /// Length of the edge opposite local vertex `i`.
    pub fn edge_length(&self, i: usize) -> f64 {
        let a = self.verts[(i + 1) % 3];
        let b = self.verts[(i + 2) % 3];
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }
}

/// Evaluate the three RT0 basis functions of a physical triangle at a
/// physical point, together with their (constant) divergences.
///
/// Local function `i` is attached to the edge opposite vertex `i`. With
/// `signs[i]` relating the global edge normal to the outward normal, the
/// basis is `signs[i] * (x - P_i) / (2 |K|)`, whose flux through its own
/// edge with respect to the outward normal is exactly `signs[i]` and zero
/// through the other two.
pub fn rt0_eval(
    geom: &TriangleGeometry,
    signs: [i8; 3],
    x: [f64; 2],
) -> ([[f64; 2]; 3], [f64; 3]) {
    let inv2a = 1.0 / (2.0 * geom.area);
    let mut values = [[0.0; 2]; 3];
    let mut divs = [0.0; 3];
    for i in 0..3 {
        let s = signs[i] as f64;
        let p = geom.verts[i];
        values[i] = [s * (x[0] - p[0]) * inv2a, s * (x[1] - p[1]) * inv2a];
        divs[i] = s / geom.area;
    }
    (values, divs)
}
