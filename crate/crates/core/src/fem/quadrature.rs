//! Quadrature rules on the reference elements.

use serde::{Deserialize, Serialize};

use super::shape::ElementType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// Rules used to integrate stiffness; their points are the recovery sampling points.
    Stiffness,
    /// High-order rules used for energy-norm error integrals.
    ErrorIntegration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre points and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp;
        loop {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Tensor-product Gauss rule on `[-1, 1]²`.
pub fn quad_gauss(n: usize) -> Rule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    Rule { points, weights }
}

/// Collapsed (Duffy) Gauss rule on the reference triangle, exact to degree `2n - 2`.
pub fn triangle_collapsed(n: usize) -> Rule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        let v = 0.5 * (x[j] + 1.0);
        for i in 0..n {
            let u = 0.5 * (x[i] + 1.0);
            points.push([u * (1.0 - v), v]);
            weights.push(0.25 * w[i] * w[j] * (1.0 - v));
        }
    }
    Rule { points, weights }
}

fn triangle_centroid() -> Rule {
    Rule { points: vec![[1.0 / 3.0, 1.0 / 3.0]], weights: vec![0.5] }
}

fn triangle_three() -> Rule {
    let a = 1.0 / 6.0;
    let b = 2.0 / 3.0;
    Rule { points: vec![[a, a], [b, a], [a, b]], weights: vec![a; 3] }
}

/// Symmetric 19-point rule, degree 9 (Dunavant).
fn triangle_nineteen() -> Rule {
    // (weight, orbit generator in barycentric coordinates)
    const ORBITS: [(f64, [f64; 3]); 6] = [
        (0.097135796282799, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
        (0.031334700227139, [0.020634961602525, 0.489682519198738, 0.489682519198738]),
        (0.077827541004774, [0.125820817014127, 0.437089591492937, 0.437089591492937]),
        (0.079647738927210, [0.623592928761935, 0.188203535619033, 0.188203535619033]),
        (0.025577675658698, [0.910540973211095, 0.044729513394453, 0.044729513394453]),
        (0.043283539377289, [0.036838412054736, 0.221962989160766, 0.741198598784498]),
    ];
    let mut points = Vec::with_capacity(19);
    let mut weights = Vec::with_capacity(19);
    for (w, [a, b, c]) in ORBITS {
        let perms: Vec<[f64; 3]> = if a == b && b == c {
            vec![[a, b, c]]
        } else if b == c {
            vec![[a, b, c], [b, a, c], [b, c, a]]
        } else {
            vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
        };
        for p in perms {
            points.push([p[1], p[2]]);
            weights.push(0.5 * w);
        }
    }
    Rule { points, weights }
}

pub fn rule(elem: ElementType, purpose: Purpose) -> Rule {
    match (elem, purpose) {
        (ElementType::Tri3, Purpose::Stiffness) => triangle_centroid(),
        (ElementType::Tri6, Purpose::Stiffness) => triangle_three(),
        (ElementType::Quad4, Purpose::Stiffness) => quad_gauss(2),
        (ElementType::Quad8, Purpose::Stiffness) => quad_gauss(3),
        (t, Purpose::ErrorIntegration) if t.is_triangle() => triangle_nineteen(),
        (_, Purpose::ErrorIntegration) => quad_gauss(5),
    }
}

/// A rule of roughly doubled polynomial degree relative to the error rule, for
/// quadrature-convergence checks.
pub fn refined_error_rule(elem: ElementType) -> Rule {
    if elem.is_triangle() {
        triangle_collapsed(10)
    } else {
        quad_gauss(10)
    }
}
