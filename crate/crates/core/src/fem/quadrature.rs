//! Quadrature rules on the reference triangle and the reference edge.
//!
//! Triangle rules of degree 2..=10 are collapsed tensor Gauss-Legendre
//! rules (Duffy map of the unit square onto the triangle), which keeps
//! every weight strictly positive at any degree. Degree 1 is the single
//! centroid point. Edge rules are plain Gauss-Legendre on `[0, 1]`.

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 10;

/// Quadrature on the reference triangle `{(x, y): x, y >= 0, x + y <= 1}`.
/// Weights carry the reference-area measure and sum to 1/2.
#[derive(Debug, Clone)]
pub struct TriangleQuadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Every polynomial of total degree up to this is integrated exactly.
    pub degree: usize,
}

/// Quadrature on the reference edge `[0, 1]`; weights sum to 1.
#[derive(Debug, Clone)]
pub struct EdgeQuadrature {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

pub fn quad_triangle(degree: usize) -> Result<TriangleQuadrature> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::QuadratureDegree(degree));
    }
    if degree == 1 {
        return Ok(TriangleQuadrature {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            degree: 1,
        });
    }
    // The integrand picks up one extra power of (1 - u) from the Duffy
    // Jacobian, so the u-direction needs exactness degree + 1.
    let m = (degree + 3) / 2;
    let (nodes, weights) = gauss_legendre_01(m);
    let mut points = Vec::with_capacity(m * m);
    let mut w = Vec::with_capacity(m * m);
    for (ui, &u) in nodes.iter().enumerate() {
        for (vi, &v) in nodes.iter().enumerate() {
            points.push([u, v * (1.0 - u)]);
            w.push(weights[ui] * weights[vi] * (1.0 - u));
        }
    }
    Ok(TriangleQuadrature {
        points,
        weights: w,
        degree,
    })
}

pub fn quad_edge(degree: usize) -> Result<EdgeQuadrature> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::QuadratureDegree(degree));
    }
    let m = (degree + 2) / 2;
    let (points, weights) = gauss_legendre_01(m);
    Ok(EdgeQuadrature {
        points,
        weights,
        degree,
    })
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, exact through degree 2m-1.
fn gauss_legendre_01(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // The initial guesses enumerate roots from +1 downwards, so the
        // mapped nodes come out ascending.
        nodes.push(0.5 * (1.0 - x));
        weights.push(0.5 * w);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_m` and its derivative at `x` by recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Exact integral of `x^a y^b` over the reference triangle.
pub fn monomial_integral(a: u32, b: u32) -> f64 {
    // a! b! / (a + b + 2)!
    let mut value = 1.0;
    for k in 1..=(a + b + 2) {
        value /= k as f64;
    }
    for k in 1..=a {
        value *= k as f64;
    }
    for k in 1..=b {
        value *= k as f64;
    }
    value
}
