//! 2D unstructured meshes of isoparametric elements.
//!
//! A [`Mesh`] is immutable once built. Refinement ([`Mesh::refine`]) returns a new
//! mesh in which marked elements are split into four children; mid-edge nodes shared
//! with an unrefined neighbour become hanging nodes tied to the neighbour's edge by
//! [`HangingConstraint`]s. Crack faces are represented by duplicated nodes, so the
//! two faces are topologically distinct edges at the same location.

pub mod generate;
pub mod io;
mod refine;
pub mod spatial;
pub mod support;

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{Matrix2, Vector2};

use crate::fem::ElementType;
use crate::{Error, Point, Result};

pub use support::{BoundarySide, NearestPoint};

/// Boundary condition tag carried by element faces. Its meaning is assigned by the
/// problem definition.
pub type BoundaryTag = u8;

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementType,
    pub nodes: Vec<usize>,
    /// Number of quadrisections separating this element from the initial mesh.
    pub level: u8,
    /// Per-face boundary tags; `None` for interior faces.
    pub faces: [Option<BoundaryTag>; 4],
}

impl Element {
    pub fn new(kind: ElementType, nodes: Vec<usize>) -> Self {
        Self { kind, nodes, level: 0, faces: [None; 4] }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.nodes[..self.kind.num_vertices()]
    }

    /// Vertex ids `(start, end)` of face `f`.
    pub fn face_vertices(&self, f: usize) -> (usize, usize) {
        let nv = self.kind.num_vertices();
        (self.nodes[f], self.nodes[(f + 1) % nv])
    }
}

/// A slave node whose displacement is a fixed combination of master nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HangingConstraint {
    pub slave: usize,
    pub masters: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Crack geometry: a polyline of face points ending at the tip.
#[derive(Debug, Clone, PartialEq)]
pub struct Crack {
    pub path: Vec<Point>,
}

impl Crack {
    pub fn new(path: Vec<Point>) -> Result<Self> {
        if path.len() < 2 {
            return Err(Error::InvalidInput("crack needs at least two points".into()));
        }
        Ok(Self { path })
    }

    pub fn tip(&self) -> Point {
        *self.path.last().expect("crack path is non-empty")
    }

    /// Direction of the crack prolongation at the tip (angle from the x axis).
    pub fn direction(&self) -> f64 {
        let n = self.path.len();
        let d = self.path[n - 1] - self.path[n - 2];
        d.y.atan2(d.x)
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.path.windows(2).map(|w| (w[0], w[1]))
    }

    /// Whether the open segment `a`–`b` crosses a crack face. Touching the tip does not
    /// count as crossing.
    pub fn blocks(&self, a: &Point, b: &Point) -> bool {
        self.segments().any(|(p, q)| segments_cross(a, b, &p, &q))
    }

    /// Whether `p` lies on the crack polyline (excluding the tip).
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        let tip = self.tip();
        if (p - tip).norm() <= tol {
            return false;
        }
        self.segments().any(|(a, b)| {
            let d = b - a;
            let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            (a + d * t - p).norm() <= tol
        })
    }
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Proper crossing of segments `a`–`b` and `p`–`q`. Touching at an endpoint (e.g. a
/// segment passing exactly through the crack tip) does not count.
fn segments_cross(a: &Point, b: &Point, p: &Point, q: &Point) -> bool {
    let scale = (b - a).norm().max((q - p).norm()).max(1e-300);
    let eps = 1e-12 * scale * scale;
    let straddle = |u: f64, v: f64| (u > eps && v < -eps) || (u < -eps && v > eps);
    straddle(orient(p, q, a), orient(p, q, b)) && straddle(orient(a, b, p), orient(a, b, q))
}

/// Per-mesh refinement bookkeeping: nodes created on edges during quadrisection.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct EdgeRegistry {
    /// `(min vertex, max vertex, quarter index from min)` → node on that edge.
    pub(crate) edge_nodes: HashMap<(usize, usize, u8), usize>,
    /// Vertex created at the midpoint of edge `(P, Q)`.
    pub(crate) midpoint_of: HashMap<usize, (usize, usize)>,
}

#[derive(Debug)]
pub struct Mesh {
    nodes: Vec<Point>,
    elements: Vec<Element>,
    constraints: Vec<HangingConstraint>,
    crack: Option<Crack>,
    registry: EdgeRegistry,
    locator: OnceLock<spatial::BucketGrid>,
    sides: OnceLock<Vec<BoundarySide>>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Self {
            nodes: self.nodes.clone(),
            elements: self.elements.clone(),
            constraints: self.constraints.clone(),
            crack: self.crack.clone(),
            registry: self.registry.clone(),
            locator: OnceLock::new(),
            sides: OnceLock::new(),
        }
    }
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.elements == other.elements
            && self.constraints == other.constraints
            && self.crack == other.crack
    }
}

/// Geometry of one element at a reference point.
#[derive(Debug, Clone, Copy)]
pub struct GeomEval {
    pub x: Point,
    pub det_j: f64,
    /// Inverse Jacobian; maps reference gradients to physical gradients.
    pub inv_j: Matrix2<f64>,
}

impl Mesh {
    /// Builds a mesh from nodes and elements; faces are tagged on the elements.
    pub fn new(nodes: Vec<Point>, elements: Vec<Element>, crack: Option<Crack>) -> Result<Self> {
        let mesh = Self::from_parts(nodes, elements, Vec::new(), crack, EdgeRegistry::default());
        mesh.validate()?;
        Ok(mesh)
    }

    pub(crate) fn from_parts(
        nodes: Vec<Point>,
        elements: Vec<Element>,
        constraints: Vec<HangingConstraint>,
        crack: Option<Crack>,
        registry: EdgeRegistry,
    ) -> Self {
        Self { nodes, elements, constraints, crack, registry, locator: OnceLock::new(), sides: OnceLock::new() }
    }

    fn validate(&self) -> Result<()> {
        for (i, e) in self.elements.iter().enumerate() {
            if e.nodes.len() != e.kind.num_nodes() || e.nodes.iter().any(|&n| n >= self.nodes.len()) {
                return Err(Error::InvalidInput(format!("element {i} has invalid connectivity")));
            }
            if !self.jacobian_positive(i) {
                return Err(Error::InvertedElement { element: i });
            }
        }
        Ok(())
    }

    pub(crate) fn jacobian_positive(&self, e: usize) -> bool {
        let kind = self.elements[e].kind;
        let rule = crate::fem::quadrature::rule(kind, crate::fem::Purpose::ErrorIntegration);
        let verts = (0..kind.num_nodes()).map(|i| kind.node_ref(i));
        rule.points.iter().copied().chain(verts).all(|xi| self.geometry(e, xi).det_j > 0.0)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> &Element {
        &self.elements[e]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn constraints(&self) -> &[HangingConstraint] {
        &self.constraints
    }

    pub fn crack(&self) -> Option<&Crack> {
        self.crack.as_ref()
    }

    /// Element types present in the mesh (the first element's type for uniform meshes).
    pub fn element_type(&self) -> ElementType {
        self.elements[0].kind
    }

    /// Displacement interpolation order (max over elements).
    pub fn order(&self) -> usize {
        self.elements.iter().map(|e| e.kind.order()).max().unwrap_or(1)
    }

    /// Boundary faces as `(element, face, tag)`.
    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, usize, BoundaryTag)> + '_ {
        self.elements.iter().enumerate().flat_map(|(e, el)| {
            (0..el.kind.num_vertices()).filter_map(move |f| el.faces[f].map(|t| (e, f, t)))
        })
    }

    pub fn geometry(&self, e: usize, xi: [f64; 2]) -> GeomEval {
        let el = &self.elements[e];
        let sh = el.kind.shape(xi);
        let mut x = Vector2::zeros();
        let mut j = Matrix2::zeros();
        for (k, &n) in el.nodes.iter().enumerate() {
            let p = self.nodes[n].coords;
            x += p * sh.values[k];
            let g = sh.grads[k];
            // J[i][a] = ∂x_i/∂ξ_a
            j[(0, 0)] += p.x * g[0];
            j[(0, 1)] += p.x * g[1];
            j[(1, 0)] += p.y * g[0];
            j[(1, 1)] += p.y * g[1];
        }
        let det_j = j.determinant();
        let inv_j = j.try_inverse().unwrap_or_else(Matrix2::zeros);
        GeomEval { x: Point::from(x), det_j, inv_j }
    }

    /// Physical shape-function gradients at a reference point, with the geometry.
    pub fn physical_gradients(&self, e: usize, xi: [f64; 2]) -> (crate::fem::shape::ShapeEval, GeomEval) {
        let kind = self.elements[e].kind;
        let mut sh = kind.shape(xi);
        let g = self.geometry(e, xi);
        for k in 0..sh.len {
            let [a, b] = sh.grads[k];
            // ∂N/∂x_i = Σ_a ∂N/∂ξ_a ∂ξ_a/∂x_i, with ∂ξ/∂x = J⁻¹
            sh.grads[k] = [a * g.inv_j[(0, 0)] + b * g.inv_j[(1, 0)], a * g.inv_j[(0, 1)] + b * g.inv_j[(1, 1)]];
        }
        (sh, g)
    }

    pub fn map_point(&self, e: usize, xi: [f64; 2]) -> Point {
        self.geometry(e, xi).x
    }

    pub fn area(&self, e: usize) -> f64 {
        let kind = self.elements[e].kind;
        let rule = crate::fem::quadrature::rule(kind, crate::fem::Purpose::Stiffness);
        rule.iter().map(|(xi, w)| w * self.geometry(e, xi).det_j).sum()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.area(e)).sum()
    }

    /// Characteristic size: `√A` for quadrilaterals, the longest edge for triangles.
    pub fn element_size(&self, e: usize) -> f64 {
        let el = &self.elements[e];
        if el.kind.is_triangle() {
            (0..3)
                .map(|f| {
                    let (a, b) = el.face_vertices(f);
                    (self.nodes[a] - self.nodes[b]).norm()
                })
                .fold(0.0, f64::max)
        } else {
            self.area(e).sqrt()
        }
    }

    pub fn centroid(&self, e: usize) -> Point {
        let kind = self.elements[e].kind;
        let xi = if kind.is_triangle() { [1.0 / 3.0, 1.0 / 3.0] } else { [0.0, 0.0] };
        self.map_point(e, xi)
    }

    pub fn bounding_box(&self, e: usize) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &n in &self.elements[e].nodes {
            let p = self.nodes[n];
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// Inverse isoparametric map by Newton iteration; `None` if `x` is not in element `e`.
    pub fn inverse_map(&self, e: usize, x: &Point) -> Option<[f64; 2]> {
        let kind = self.elements[e].kind;
        let mut xi = if kind.is_triangle() { [1.0 / 3.0, 1.0 / 3.0] } else { [0.0, 0.0] };
        let (lo, hi) = self.bounding_box(e);
        let scale = (hi - lo).norm();
        for _ in 0..30 {
            let g = self.geometry(e, xi);
            let r = x - g.x;
            let d = g.inv_j * r;
            xi = [xi[0] + d.x, xi[1] + d.y];
            if r.norm() <= 1e-14 * scale {
                break;
            }
        }
        let ok = kind.contains_ref(xi, 1e-10) && (self.map_point(e, xi) - x).norm() <= 1e-9 * scale;
        ok.then_some(xi)
    }

    fn locator(&self) -> &spatial::BucketGrid {
        self.locator.get_or_init(|| {
            let boxes: Vec<(Point, Point)> = (0..self.num_elements()).map(|e| self.bounding_box(e)).collect();
            spatial::BucketGrid::from_boxes(&boxes)
        })
    }

    /// Locates the element containing `x`. Ties on shared edges resolve to the lowest
    /// element index.
    pub fn locate(&self, x: &Point) -> Result<(usize, [f64; 2])> {
        let mut cands = self.locator().candidates(x);
        cands.sort_unstable();
        for e in cands {
            if let Some(xi) = self.inverse_map(e, x) {
                return Ok((e, xi));
            }
        }
        Err(Error::PointOutsideMesh { x: x.x, y: x.y })
    }

    /// Hanging constraints with chains resolved so that no master is itself a slave.
    pub fn resolved_constraints(&self) -> HashMap<usize, Vec<(usize, f64)>> {
        let direct: HashMap<usize, &HangingConstraint> = self.constraints.iter().map(|c| (c.slave, c)).collect();
        fn expand(
            n: usize,
            w: f64,
            direct: &HashMap<usize, &HangingConstraint>,
            out: &mut Vec<(usize, f64)>,
            depth: usize,
        ) {
            assert!(depth < 64, "cyclic hanging-node constraints");
            match direct.get(&n) {
                Some(c) => {
                    for (&m, &wm) in c.masters.iter().zip(&c.weights) {
                        expand(m, w * wm, direct, out, depth + 1);
                    }
                }
                None => match out.iter_mut().find(|(m, _)| *m == n) {
                    Some(entry) => entry.1 += w,
                    None => out.push((n, w)),
                },
            }
        }
        let mut slaves: Vec<usize> = direct.keys().copied().collect();
        slaves.sort_unstable();
        slaves
            .into_iter()
            .map(|s| {
                let mut out = Vec::new();
                expand(s, 1.0, &direct, &mut out, 0);
                (s, out)
            })
            .collect()
    }

    /// Applies hanging constraints to a nodal scalar field in place.
    pub fn constrain_nodal(&self, values: &mut [f64]) {
        let resolved = self.resolved_constraints();
        let mut slaves: Vec<_> = resolved.iter().collect();
        slaves.sort_unstable_by_key(|(s, _)| **s);
        for (&s, masters) in slaves {
            values[s] = masters.iter().map(|&(m, w)| w * values[m]).sum();
        }
    }

    /// Side of the crack (+1 left of the face direction, -1 right) for nodes lying on a
    /// crack face, 0 otherwise. The side is read from the centroid of an element using
    /// the node.
    pub fn node_crack_sides(&self) -> Vec<i8> {
        let mut sides = vec![0i8; self.num_nodes()];
        let Some(crack) = &self.crack else { return sides };
        let tol = 1e-10 * self.total_area().sqrt();
        for (e, el) in self.elements.iter().enumerate() {
            let c = self.centroid(e);
            for &n in &el.nodes {
                let p = self.nodes[n];
                if sides[n] != 0 || !crack.contains(&p, tol) {
                    continue;
                }
                let (a, b) = crack
                    .segments()
                    .min_by(|(a1, b1), (a2, b2)| seg_dist(&p, a1, b1).total_cmp(&seg_dist(&p, a2, b2)))
                    .expect("crack has segments");
                sides[n] = if orient(&a, &b, &c) > 0.0 { 1 } else { -1 };
            }
        }
        sides
    }

    /// Neighbour pairs across every interior edge, including coarse/fine pairs across
    /// hanging edges: `(element a, element b)` with `a < b`.
    pub fn edge_neighbours(&self) -> Vec<(usize, usize)> {
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (e, el) in self.elements.iter().enumerate() {
            for f in 0..el.kind.num_vertices() {
                let (a, b) = el.face_vertices(f);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(e);
            }
        }
        let mut pairs = Vec::new();
        for (&(a, b), els) in &by_edge {
            for i in 0..els.len() {
                for j in i + 1..els.len() {
                    pairs.push((els[i].min(els[j]), els[i].max(els[j])));
                }
            }
            // coarse edge split by a registered midpoint
            if let Some(&m) = self.registry.edge_nodes.get(&(a, b, 2)) {
                for half in [(a.min(m), a.max(m)), (b.min(m), b.max(m))] {
                    if let Some(fine) = by_edge.get(&half) {
                        for &c in els {
                            for &f in fine {
                                if c != f {
                                    pairs.push((c.min(f), c.max(f)));
                                }
                            }
                        }
                    }
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

fn seg_dist(p: &Point, a: &Point, b: &Point) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (a + d * t - p).norm()
}
