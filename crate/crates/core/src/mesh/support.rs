//! Support geometry for the recovery: radii, boundary sides, nearest boundary points,
//! visibility-adjusted distances and sample collection.

use std::collections::HashMap;

use nalgebra::Vector2;

use super::spatial::BucketGrid;
use super::{BoundaryTag, Crack, Mesh};
use crate::{Error, Point, Result};

/// Turning angle above which two consecutive boundary edges belong to different sides.
const CORNER_ANGLE: f64 = 40.0 * std::f64::consts::PI / 180.0;

/// A maximal run of boundary edges with one tag and no corner.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySide {
    pub tag: BoundaryTag,
    /// Polyline vertices, in the boundary orientation (domain on the left).
    pub vertices: Vec<Point>,
    /// `(element, face)` of each polyline segment.
    pub edges: Vec<(usize, usize)>,
    lo: Point,
    hi: Point,
}

impl BoundarySide {
    fn box_distance(&self, x: &Point) -> f64 {
        let dx = (self.lo.x - x.x).max(x.x - self.hi.x).max(0.0);
        let dy = (self.lo.y - x.y).max(x.y - self.hi.y).max(0.0);
        dx.hypot(dy)
    }

    /// Closest point on the side: `(point, segment index, distance)`.
    pub fn closest(&self, x: &Point) -> (Point, usize, f64) {
        let mut best = (self.vertices[0], 0, f64::INFINITY);
        for (i, w) in self.vertices.windows(2).enumerate() {
            let d = w[1] - w[0];
            let t = ((x - w[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let p = w[0] + d * t;
            let dist = (x - p).norm();
            if dist < best.2 {
                best = (p, i, dist);
            }
        }
        best
    }

    /// Outward unit normal of segment `i`.
    pub fn normal(&self, i: usize) -> Vector2<f64> {
        let d = self.vertices[i + 1] - self.vertices[i];
        Vector2::new(d.y, -d.x).normalize()
    }
}

/// Closest point of one boundary side to an evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestPoint {
    pub side: usize,
    pub tag: BoundaryTag,
    pub point: Point,
    pub normal: Vector2<f64>,
    /// Angle of the outward normal from the x axis.
    pub angle: f64,
    pub distance: f64,
    /// A point of the side just next to `point`, toward the side's interior. It tells
    /// which crack face a side end on the crack line belongs to.
    pub probe: Point,
}

/// Normalized distance and its gradient with respect to the evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance {
    pub s: f64,
    pub ds: Vector2<f64>,
}

/// Normalized distance `s` between `x` and `chi`, routed around the crack tip when the
/// straight segment crosses a crack face. `dr` is `∂R/∂x`, which enters `∂s/∂x`.
pub fn visibility_s(x: &Point, chi: &Point, crack: Option<&Crack>, r: f64, dr: Vector2<f64>) -> Distance {
    let unit = |v: Vector2<f64>| {
        let n = v.norm();
        if n > 0.0 {
            v / n
        } else {
            Vector2::zeros()
        }
    };
    let (d, dd) = match crack {
        Some(c) if c.blocks(x, chi) => {
            let tip = c.tip();
            ((x - tip).norm() + (chi - tip).norm(), unit(x - tip))
        }
        _ => ((x - chi).norm(), unit(x - chi)),
    };
    let s = d / r;
    Distance { s, ds: dd / r - dr * (s / r) }
}

/// Sample points with their integration weights, indexed for radius queries.
#[derive(Debug, Clone)]
pub struct SamplePoints {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    grid: BucketGrid,
}

impl SamplePoints {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Self {
        assert_eq!(points.len(), weights.len());
        let grid = BucketGrid::from_points(&points);
        Self { points, weights, grid }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Everything the recovery needs about the support of one evaluation point.
#[derive(Debug, Clone)]
pub struct SupportGeometry {
    pub center: Point,
    pub radius: f64,
    /// `∂R/∂x`.
    pub dradius: Vector2<f64>,
    /// Sample indices with `s ≤ 1`, ascending, with their distances.
    pub samples: Vec<(usize, Distance)>,
    pub nearest: Vec<(NearestPoint, Distance)>,
    /// Number of 10% enlargements applied.
    pub enlargements: usize,
}

impl Mesh {
    /// Average size of the elements containing each node; slave values follow their
    /// constraints so the interpolated radius is continuous.
    pub fn nodal_sizes(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.num_nodes()];
        let mut count = vec![0usize; self.num_nodes()];
        for e in 0..self.num_elements() {
            let h = self.element_size(e);
            for &n in &self.elements[e].nodes {
                sum[n] += h;
                count[n] += 1;
            }
        }
        let mut l: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
        self.constrain_nodal(&mut l);
        l
    }

    /// Support radius `R = k Σ N_i l_i` and its gradient at a reference point of `e`.
    pub fn support_radius_at(&self, sizes: &[f64], e: usize, xi: [f64; 2], k: f64) -> (f64, Vector2<f64>) {
        let (sh, _) = self.physical_gradients(e, xi);
        let mut r = 0.0;
        let mut dr = Vector2::zeros();
        for (i, &n) in self.elements[e].nodes.iter().enumerate() {
            r += sh.values[i] * sizes[n];
            dr += Vector2::new(sh.grads[i][0], sh.grads[i][1]) * sizes[n];
        }
        (k * r, dr * k)
    }

    /// Support radius at a physical point.
    pub fn support_radius(&self, x: &Point, k: f64) -> Result<(f64, Vector2<f64>)> {
        let (e, xi) = self.locate(x)?;
        Ok(self.support_radius_at(&self.nodal_sizes(), e, xi, k))
    }

    /// Boundary sides, built once per mesh.
    pub fn boundary_sides(&self) -> &[BoundarySide] {
        self.sides.get_or_init(|| self.build_sides())
    }

    fn build_sides(&self) -> Vec<BoundarySide> {
        struct Edge {
            start: usize,
            end: usize,
            tag: BoundaryTag,
            ef: (usize, usize),
        }
        let edges: Vec<Edge> = self
            .boundary_edges()
            .map(|(e, f, tag)| {
                let (start, end) = self.elements[e].face_vertices(f);
                Edge { start, end, tag, ef: (e, f) }
            })
            .collect();
        let by_start: HashMap<usize, usize> = edges.iter().enumerate().map(|(i, e)| (e.start, i)).collect();
        let by_end: HashMap<usize, usize> = edges.iter().enumerate().map(|(i, e)| (e.end, i)).collect();
        let dir = |i: usize| self.nodes[edges[i].end] - self.nodes[edges[i].start];
        let joins = |a: usize, b: usize| {
            if edges[a].tag != edges[b].tag {
                return false;
            }
            let (u, v) = (dir(a), dir(b));
            let turn = (u.x * v.y - u.y * v.x).atan2(u.dot(&v)).abs();
            turn <= CORNER_ANGLE
        };
        let next = |i: usize| by_start.get(&edges[i].end).copied().filter(|&j| joins(i, j));
        let is_start = |i: usize| by_end.get(&edges[i].start).is_none_or(|&p| !joins(p, i));

        let mut visited = vec![false; edges.len()];
        let mut sides = Vec::new();
        let starts: Vec<usize> = (0..edges.len()).filter(|&i| is_start(i)).chain(0..edges.len()).collect();
        for s in starts {
            if visited[s] {
                continue;
            }
            let mut chain = vec![s];
            visited[s] = true;
            let mut cur = s;
            while let Some(j) = next(cur) {
                if visited[j] {
                    break;
                }
                visited[j] = true;
                chain.push(j);
                cur = j;
            }
            let mut vertices = vec![self.nodes[edges[s].start]];
            vertices.extend(chain.iter().map(|&i| self.nodes[edges[i].end]));
            let lo = vertices.iter().fold(Point::new(f64::INFINITY, f64::INFINITY), |a, p| {
                Point::new(a.x.min(p.x), a.y.min(p.y))
            });
            let hi = vertices.iter().fold(Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| {
                Point::new(a.x.max(p.x), a.y.max(p.y))
            });
            sides.push(BoundarySide {
                tag: edges[s].tag,
                vertices,
                edges: chain.iter().map(|&i| edges[i].ef).collect(),
                lo,
                hi,
            });
        }
        sides
    }

    /// The closest point of every side accepted by `filter` that lies within distance
    /// `r` of `x` and faces `x` (so a crack face is not seen from the opposite face).
    pub fn nearest_points(&self, x: &Point, r: f64, filter: impl Fn(BoundaryTag) -> bool) -> Vec<NearestPoint> {
        let mut out = Vec::new();
        for (i, side) in self.boundary_sides().iter().enumerate() {
            if !filter(side.tag) || side.box_distance(x) > r {
                continue;
            }
            let (p, seg, dist) = side.closest(x);
            if dist > r {
                continue;
            }
            let n = side.normal(seg);
            if (x - p).dot(&n) > 1e-12 * r {
                continue;
            }
            let (a, b) = (side.vertices[seg], side.vertices[seg + 1]);
            let probe = p + (Point::from((a.coords + b.coords) * 0.5) - p) * 1e-6;
            // a side reached only through the crack mouth belongs to the other face
            if self.crack().is_some_and(|c| c.blocks(x, &probe)) {
                continue;
            }
            out.push(NearestPoint {
                side: i,
                tag: side.tag,
                point: p,
                normal: n,
                angle: n.y.atan2(n.x),
                distance: dist,
                probe,
            });
        }
        out
    }

    /// Samples and nearest boundary points within the support of `x`. The support is
    /// enlarged by 10% (at most five times) until it holds at least `min_samples`.
    #[allow(clippy::too_many_arguments)]
    pub fn collect_support(
        &self,
        samples: &SamplePoints,
        x: &Point,
        radius: f64,
        dradius: Vector2<f64>,
        min_samples: usize,
        filter: impl Fn(BoundaryTag) -> bool,
    ) -> Result<SupportGeometry> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!("support radius {radius} must be positive")));
        }
        let crack = self.crack();
        let mut cand = Vec::new();
        for attempt in 0..=5 {
            let scale = 1.1f64.powi(attempt);
            let (r, dr) = (radius * scale, dradius * scale);
            samples.grid.within(x, r, &mut cand);
            let found: Vec<(usize, Distance)> = cand
                .iter()
                .filter_map(|&i| {
                    let d = visibility_s(x, &samples.points[i], crack, r, dr);
                    (d.s <= 1.0).then_some((i, d))
                })
                .collect();
            if found.len() >= min_samples {
                let nearest = self
                    .nearest_points(x, r, &filter)
                    .into_iter()
                    .map(|np| (np, visibility_s(x, &np.point, crack, r, dr)))
                    .filter(|(_, d)| d.s <= 1.0)
                    .collect();
                return Ok(SupportGeometry {
                    center: *x,
                    radius: r,
                    dradius: dr,
                    samples: found,
                    nearest,
                    enlargements: attempt as usize,
                });
            }
        }
        Err(Error::SparseSupport { x: x.x, y: x.y, attempts: 5 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::ElementType;
    use crate::mesh::generate;

    fn unit_grid(n: usize) -> Mesh {
        generate::rectangle(ElementType::Quad4, [0.0, 0.0], [1.0, 1.0], n, n, |_, _| Some(1)).unwrap()
    }

    #[test]
    fn uniform_radius() {
        let m = unit_grid(8);
        for p in [Point::new(0.31, 0.77), Point::new(0.5, 0.5), Point::new(0.0, 0.0)] {
            let (r, dr) = m.support_radius(&p, 2.0).unwrap();
            assert!((r - 0.25).abs() < 1e-14);
            assert!(dr.norm() < 1e-12);
            assert_eq!(m.support_radius(&p, 0.0).unwrap().0, 0.0);
        }
    }

    #[test]
    fn graded_radius_at_shared_node() {
        // two columns of size-2 elements next to two columns... node (2,2) is shared by
        // two 2×2 and two 1×1 elements after refining the right half
        let m = generate::rectangle(ElementType::Quad4, [0.0, 0.0], [4.0, 4.0], 2, 2, |_, _| None).unwrap();
        let marks: Vec<bool> = (0..4).map(|e| m.centroid(e).x > 2.0).collect();
        let r = m.refine(&marks).unwrap();
        let (rad, _) = r.support_radius(&Point::new(2.0, 2.0), 1.0).unwrap();
        assert!((rad - 1.5).abs() < 1e-12, "{rad}");
    }

    #[test]
    fn radius_continuous_across_hanging_edge() {
        let m = generate::rectangle(ElementType::Quad4, [0.0, 0.0], [4.0, 4.0], 2, 2, |_, _| None).unwrap();
        let marks: Vec<bool> = (0..4).map(|e| m.centroid(e).x > 2.0).collect();
        let r = m.refine(&marks).unwrap();
        for y in [0.3, 0.9, 1.7, 2.5, 3.3] {
            let a = r.support_radius(&Point::new(2.0 - 1e-9, y), 2.0).unwrap().0;
            let b = r.support_radius(&Point::new(2.0 + 1e-9, y), 2.0).unwrap().0;
            assert!((a - b).abs() < 1e-7, "{a} {b}");
        }
    }

    #[test]
    fn sides_split_at_corners() {
        let m = unit_grid(4);
        let sides = m.boundary_sides();
        assert_eq!(sides.len(), 4);
        for s in sides {
            assert_eq!(s.edges.len(), 4);
        }
    }

    #[test]
    fn nearest_point_projection_and_corner() {
        let m = unit_grid(4);
        let x = Point::new(0.4, 0.1);
        let np = m.nearest_points(&x, 0.2, |_| true);
        assert_eq!(np.len(), 1);
        assert!((np[0].point - Point::new(0.4, 0.0)).norm() < 1e-15);
        assert!((np[0].normal - Vector2::new(0.0, -1.0)).norm() < 1e-15);
        assert!(m.nearest_points(&Point::new(0.5, 0.5), 0.2, |_| true).is_empty());
        let corner = m.nearest_points(&Point::new(0.05, 0.08), 0.2, |_| true);
        assert_eq!(corner.len(), 2);
    }

    #[test]
    fn visibility_distances() {
        let x = Point::new(0.0, 0.0);
        let chi = Point::new(0.3, 0.4);
        let d = visibility_s(&x, &chi, None, 1.0, Vector2::zeros());
        assert_eq!(d.s, 0.5);
        assert_eq!(visibility_s(&x, &x, None, 1.0, Vector2::zeros()).s, 0.0);
        let crack = Crack::new(vec![Point::new(-1.0, 0.0), Point::new(0.0, 0.0)]).unwrap();
        let (a, b) = (Point::new(-0.3, 0.4), Point::new(-0.6, -0.8));
        let d = visibility_s(&a, &b, Some(&crack), 2.0, Vector2::zeros());
        assert!((d.s - 0.75).abs() < 1e-15);
        // same side: plain distance
        let c = Point::new(-0.6, 0.8);
        let plain = visibility_s(&a, &c, None, 2.0, Vector2::zeros());
        assert_eq!(visibility_s(&a, &c, Some(&crack), 2.0, Vector2::zeros()), plain);
    }

    #[test]
    fn distance_gradient_matches_fd() {
        let crack = Crack::new(vec![Point::new(-1.0, 0.0), Point::new(0.0, 0.0)]).unwrap();
        let chi = Point::new(-0.6, -0.3);
        let dr = Vector2::new(0.2, -0.1);
        let s_at = |p: Point| {
            let r = 1.5 + dr.dot(&(p - Point::new(-0.4, 0.3)));
            visibility_s(&p, &chi, Some(&crack), r, dr)
        };
        let x = Point::new(-0.4, 0.3);
        let d = s_at(x);
        let h = 1e-6;
        let fx = (s_at(x + Vector2::new(h, 0.0)).s - s_at(x - Vector2::new(h, 0.0)).s) / (2.0 * h);
        let fy = (s_at(x + Vector2::new(0.0, h)).s - s_at(x - Vector2::new(0.0, h)).s) / (2.0 * h);
        assert!((d.ds.x - fx).abs() < 1e-8 && (d.ds.y - fy).abs() < 1e-8);
    }
}
