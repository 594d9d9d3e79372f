//! Isoparametric Lagrange bases for the four supported element types.
//!
//! Reference domains: triangles live on `{ξ ≥ 0, η ≥ 0, ξ + η ≤ 1}`, quadrilaterals on
//! `[-1, 1]²`. Node numbering is counter-clockwise, vertices first, then mid-edge nodes
//! (edge `i` joins vertex `i` and vertex `i + 1`).

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::Error;

pub const MAX_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ElementType {
    Tri3,
    Tri6,
    Quad4,
    Quad8,
}

/// Shape function values and reference gradients at one point.
#[derive(Debug, Clone, Copy)]
pub struct ShapeEval {
    pub len: usize,
    pub values: [f64; MAX_NODES],
    pub grads: [[f64; 2]; MAX_NODES],
}

impl ShapeEval {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.len]
    }

    pub fn grads(&self) -> &[[f64; 2]] {
        &self.grads[..self.len]
    }
}

impl ElementType {
    pub const ALL: [ElementType; 4] = [Self::Tri3, Self::Tri6, Self::Quad4, Self::Quad8];

    pub fn num_nodes(self) -> usize {
        match self {
            Self::Tri3 => 3,
            Self::Tri6 => 6,
            Self::Quad4 => 4,
            Self::Quad8 => 8,
        }
    }

    pub fn num_vertices(self) -> usize {
        if self.is_triangle() {
            3
        } else {
            4
        }
    }

    pub fn is_triangle(self) -> bool {
        matches!(self, Self::Tri3 | Self::Tri6)
    }

    /// Polynomial order of the displacement interpolation.
    pub fn order(self) -> usize {
        match self {
            Self::Tri3 | Self::Quad4 => 1,
            Self::Tri6 | Self::Quad8 => 2,
        }
    }

    pub fn is_quadratic(self) -> bool {
        self.order() == 2
    }

    /// Local node ids of face `f`: `[start, end]` plus the mid-edge node for quadratic types.
    pub fn face_nodes(self, f: usize) -> ([usize; 2], Option<usize>) {
        let nv = self.num_vertices();
        let ends = [f, (f + 1) % nv];
        let mid = if self.is_quadratic() { Some(nv + f) } else { None };
        (ends, mid)
    }

    /// Reference coordinates of local node `i`.
    pub fn node_ref(self, i: usize) -> [f64; 2] {
        const TRI: [[f64; 2]; 6] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
        const QUAD: [[f64; 2]; 8] = [
            [-1.0, -1.0],
            [1.0, -1.0],
            [1.0, 1.0],
            [-1.0, 1.0],
            [0.0, -1.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [-1.0, 0.0],
        ];
        if self.is_triangle() {
            TRI[i]
        } else {
            QUAD[i]
        }
    }

    /// Reference-domain area (1/2 for triangles, 4 for quadrilaterals).
    pub fn reference_area(self) -> f64 {
        if self.is_triangle() {
            0.5
        } else {
            4.0
        }
    }

    /// Whether `xi` lies in the closed reference element, up to `tol`.
    pub fn contains_ref(self, xi: [f64; 2], tol: f64) -> bool {
        let [r, s] = xi;
        if self.is_triangle() {
            r >= -tol && s >= -tol && r + s <= 1.0 + tol
        } else {
            r.abs() <= 1.0 + tol && s.abs() <= 1.0 + tol
        }
    }

    /// Parametric position along face `f` (`t ∈ [0, 1]` from start to end vertex).
    pub fn face_point(self, f: usize, t: f64) -> [f64; 2] {
        let nv = self.num_vertices();
        let a = self.node_ref(f);
        let b = self.node_ref((f + 1) % nv);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    pub fn shape(self, xi: [f64; 2]) -> ShapeEval {
        let mut out = ShapeEval { len: self.num_nodes(), values: [0.0; MAX_NODES], grads: [[0.0; 2]; MAX_NODES] };
        let [r, s] = xi;
        match self {
            Self::Tri3 => {
                out.values[..3].copy_from_slice(&[1.0 - r - s, r, s]);
                out.grads[..3].copy_from_slice(&[[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
            }
            Self::Tri6 => {
                let l = 1.0 - r - s;
                out.values[..6].copy_from_slice(&[
                    l * (2.0 * l - 1.0),
                    r * (2.0 * r - 1.0),
                    s * (2.0 * s - 1.0),
                    4.0 * r * l,
                    4.0 * r * s,
                    4.0 * s * l,
                ]);
                out.grads[..6].copy_from_slice(&[
                    [1.0 - 4.0 * l, 1.0 - 4.0 * l],
                    [4.0 * r - 1.0, 0.0],
                    [0.0, 4.0 * s - 1.0],
                    [4.0 * (l - r), -4.0 * r],
                    [4.0 * s, 4.0 * r],
                    [-4.0 * s, 4.0 * (l - s)],
                ]);
            }
            Self::Quad4 => {
                for i in 0..4 {
                    let [ri, si] = self.node_ref(i);
                    out.values[i] = 0.25 * (1.0 + ri * r) * (1.0 + si * s);
                    out.grads[i] = [0.25 * ri * (1.0 + si * s), 0.25 * si * (1.0 + ri * r)];
                }
            }
            Self::Quad8 => {
                for i in 0..4 {
                    let [ri, si] = self.node_ref(i);
                    let (a, b) = (1.0 + ri * r, 1.0 + si * s);
                    out.values[i] = 0.25 * a * b * (ri * r + si * s - 1.0);
                    out.grads[i] = [
                        0.25 * ri * b * (2.0 * ri * r + si * s),
                        0.25 * si * a * (ri * r + 2.0 * si * s),
                    ];
                }
                for i in 4..8 {
                    let [ri, si] = self.node_ref(i);
                    if ri == 0.0 {
                        out.values[i] = 0.5 * (1.0 - r * r) * (1.0 + si * s);
                        out.grads[i] = [-r * (1.0 + si * s), 0.5 * si * (1.0 - r * r)];
                    } else {
                        out.values[i] = 0.5 * (1.0 + ri * r) * (1.0 - s * s);
                        out.grads[i] = [0.5 * ri * (1.0 - s * s), -s * (1.0 + ri * r)];
                    }
                }
            }
        }
        out
    }

    /// Quadratic-trace weights on an edge for a point at parameter `t ∈ [0, 1]`:
    /// `(start, mid, end)`.
    pub fn quadratic_edge_weights(t: f64) -> [f64; 3] {
        let u = 2.0 * t - 1.0;
        [0.5 * u * (u - 1.0), 1.0 - u * u, 0.5 * u * (u + 1.0)]
    }
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Tri3 => "TRI3",
            Self::Tri6 => "TRI6",
            Self::Quad4 => "QUAD4",
            Self::Quad8 => "QUAD8",
        };
        f.write_str(s)
    }
}

impl FromStr for ElementType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "TRI3" => Ok(Self::Tri3),
            "TRI6" => Ok(Self::Tri6),
            "QUAD4" => Ok(Self::Quad4),
            "QUAD8" => Ok(Self::Quad8),
            _ => Err(Error::UnknownElementType(s.to_string())),
        }
    }
}
