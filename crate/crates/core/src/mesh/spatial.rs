//! Uniform bucket grid for point-location and radius queries.

use crate::Point;

#[derive(Debug, Clone)]
pub struct BucketGrid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl BucketGrid {
    fn with_extent(lo: Point, hi: Point, count: usize) -> Self {
        let w = (hi.x - lo.x).max(1e-12);
        let h = (hi.y - lo.y).max(1e-12);
        // roughly one item per bucket
        let cell = ((w * h) / count.max(1) as f64).sqrt().max(1e-12);
        let nx = ((w / cell).ceil() as usize).clamp(1, 4096);
        let ny = ((h / cell).ceil() as usize).clamp(1, 4096);
        let cell = (w / nx as f64).max(h / ny as f64);
        Self { origin: lo, cell, nx, ny, buckets: vec![Vec::new(); nx * ny] }
    }

    fn index(&self, x: f64, y: f64) -> (usize, usize) {
        let i = ((x - self.origin.x) / self.cell).floor();
        let j = ((y - self.origin.y) / self.cell).floor();
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        (clamp(i, self.nx), clamp(j, self.ny))
    }

    /// Grid over axis-aligned boxes; each box is registered in every bucket it overlaps.
    pub fn from_boxes(boxes: &[(Point, Point)]) -> Self {
        let (lo, hi) = extent(boxes.iter().flat_map(|(a, b)| [*a, *b]));
        let mut g = Self::with_extent(lo, hi, boxes.len());
        for (k, (a, b)) in boxes.iter().enumerate() {
            let (i0, j0) = g.index(a.x, a.y);
            let (i1, j1) = g.index(b.x, b.y);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    g.buckets[j * g.nx + i].push(k);
                }
            }
        }
        g
    }

    pub fn from_points(points: &[Point]) -> Self {
        let (lo, hi) = extent(points.iter().copied());
        let mut g = Self::with_extent(lo, hi, points.len());
        for (k, p) in points.iter().enumerate() {
            let (i, j) = g.index(p.x, p.y);
            g.buckets[j * g.nx + i].push(k);
        }
        g
    }

    /// Items whose bucket contains `x` (box grids), a superset of the true hits.
    pub fn candidates(&self, x: &Point) -> Vec<usize> {
        let (i, j) = self.index(x.x, x.y);
        self.buckets[j * self.nx + i].clone()
    }

    /// Point-grid items in buckets overlapping the disc `(x, r)`, in ascending order.
    pub fn within(&self, x: &Point, r: f64, out: &mut Vec<usize>) {
        out.clear();
        let (i0, j0) = self.index(x.x - r, x.y - r);
        let (i1, j1) = self.index(x.x + r, x.y + r);
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.extend_from_slice(&self.buckets[j * self.nx + i]);
            }
        }
        out.sort_unstable();
    }
}

fn extent(points: impl Iterator<Item = Point>) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    if !lo.x.is_finite() {
        return (Point::origin(), Point::new(1.0, 1.0));
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_query_is_superset_of_exact() {
        let pts: Vec<Point> =
            (0..400).map(|k| Point::new((k % 20) as f64 * 0.1, (k / 20) as f64 * 0.07)).collect();
        let g = BucketGrid::from_points(&pts);
        let x = Point::new(0.93, 0.61);
        let mut out = Vec::new();
        g.within(&x, 0.25, &mut out);
        for (k, p) in pts.iter().enumerate() {
            if (p - x).norm() <= 0.25 {
                assert!(out.binary_search(&k).is_ok());
            }
        }
    }
}
