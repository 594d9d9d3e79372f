//! Structured mesh generators for the benchmark domains.
//!
//! Faces not shared by two elements are boundary faces; each one is tagged by a
//! callback receiving the face midpoint and outward unit normal.

use std::collections::HashMap;

use nalgebra::Vector2;

use super::{BoundaryTag, Crack, Element, Mesh};
use crate::fem::ElementType;
use crate::{Error, Point, Result};

/// Builds a mesh from linear cells (3 or 4 vertex ids, counter-clockwise). Quadratic
/// element types get straight-sided mid-edge nodes.
pub fn from_cells<F>(
    kind: ElementType,
    mut nodes: Vec<Point>,
    cells: &[Vec<usize>],
    crack: Option<Crack>,
    tag: F,
) -> Result<Mesh>
where
    F: Fn(Point, Vector2<f64>) -> Option<BoundaryTag>,
{
    let nv = kind.num_vertices();
    let mut face_count: HashMap<(usize, usize), usize> = HashMap::new();
    for c in cells {
        if c.len() != nv {
            return Err(Error::InvalidInput(format!("{kind} cell with {} vertices", c.len())));
        }
        for f in 0..nv {
            let (a, b) = (c[f], c[(f + 1) % nv]);
            *face_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elements = Vec::with_capacity(cells.len());
    for c in cells {
        let mut ids = c.clone();
        if kind.is_quadratic() {
            for f in 0..nv {
                let (a, b) = (c[f], c[(f + 1) % nv]);
                let id = *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    nodes.push(Point::from((nodes[a].coords + nodes[b].coords) * 0.5));
                    nodes.len() - 1
                });
                ids.push(id);
            }
        }
        let mut el = Element::new(kind, ids);
        for f in 0..nv {
            let (a, b) = (c[f], c[(f + 1) % nv]);
            if face_count[&(a.min(b), a.max(b))] == 1 {
                let d = nodes[b] - nodes[a];
                let n = Vector2::new(d.y, -d.x).normalize();
                el.faces[f] = tag(Point::from((nodes[a].coords + nodes[b].coords) * 0.5), n);
            }
        }
        elements.push(el);
    }
    Mesh::new(nodes, elements, crack)
}

/// Splits a quadrilateral cell `[a, b, c, d]` into two triangles along `a–c` or `b–d`.
fn split_cell(c: [usize; 4], along_ac: bool) -> [Vec<usize>; 2] {
    let [a, b, cc, d] = c;
    if along_ac {
        [vec![a, b, cc], vec![a, cc, d]]
    } else {
        [vec![a, b, d], vec![b, cc, d]]
    }
}

fn grid_cells(kind: ElementType, nx: usize, ny: usize, id: impl Fn(usize, usize, bool) -> usize) -> Vec<Vec<usize>> {
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let below = 2 * j < ny;
            let c = [id(i, j, below), id(i + 1, j, below), id(i + 1, j + 1, below), id(i, j + 1, below)];
            if kind.is_triangle() {
                // diagonals mirrored about both centre lines
                cells.extend(split_cell(c, (2 * i < nx) == below));
            } else {
                cells.push(c.to_vec());
            }
        }
    }
    cells
}

/// `nx × ny` cells on the rectangle `[lo, hi]`; triangles use mirror-symmetric diagonals.
pub fn rectangle<F>(kind: ElementType, lo: [f64; 2], hi: [f64; 2], nx: usize, ny: usize, tag: F) -> Result<Mesh>
where
    F: Fn(Point, Vector2<f64>) -> Option<BoundaryTag>,
{
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("grid needs at least one cell per direction".into()));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64;
            let y = lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64;
            nodes.push(Point::new(x, y));
        }
    }
    let cells = grid_cells(kind, nx, ny, |i, j, _| j * (nx + 1) + i);
    from_cells(kind, nodes, &cells, None, tag)
}

/// Rectangle with a crack along its horizontal centre line from the left edge to
/// `tip_x`. Nodes on the crack are duplicated; the tip must fall on a grid line and `ny`
/// must be even.
pub fn edge_cracked_rectangle<F>(
    kind: ElementType,
    lo: [f64; 2],
    hi: [f64; 2],
    nx: usize,
    ny: usize,
    tip_x: f64,
    tag: F,
) -> Result<Mesh>
where
    F: Fn(Point, Vector2<f64>) -> Option<BoundaryTag>,
{
    if !ny.is_multiple_of(2) || nx == 0 {
        return Err(Error::InvalidInput("cracked grid needs an even number of rows".into()));
    }
    let dx = (hi[0] - lo[0]) / nx as f64;
    let tip_i = ((tip_x - lo[0]) / dx).round() as usize;
    if tip_i == 0 || tip_i > nx || ((tip_x - lo[0]) / dx - tip_i as f64).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("crack tip x={tip_x} is not on an interior grid line")));
    }
    let mid_j = ny / 2;
    let mut nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let x = lo[0] + dx * i as f64;
            let y = lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64;
            nodes.push(Point::new(x, y));
        }
    }
    let base = nodes.len();
    // lower copies of the crack-face nodes
    for i in 0..tip_i {
        nodes.push(nodes[mid_j * (nx + 1) + i]);
    }
    let id = |i: usize, j: usize, below: bool| {
        if below && j == mid_j && i < tip_i {
            base + i
        } else {
            j * (nx + 1) + i
        }
    };
    let cells = grid_cells(kind, nx, ny, id);
    let y0 = nodes[mid_j * (nx + 1)].y;
    let crack = Crack::new(vec![Point::new(lo[0], y0), Point::new(tip_x, y0)])?;
    from_cells(kind, nodes, &cells, Some(crack), tag)
}

/// Quarter annulus `a ≤ r ≤ b`, `0 ≤ θ ≤ π/2`, with `nr × nt` cells.
pub fn quarter_annulus<F>(kind: ElementType, a: f64, b: f64, nr: usize, nt: usize, tag: F) -> Result<Mesh>
where
    F: Fn(Point, Vector2<f64>) -> Option<BoundaryTag>,
{
    if !(0.0 < a && a < b) || nr == 0 || nt == 0 {
        return Err(Error::InvalidInput(format!("annulus a={a}, b={b}, {nr}×{nt}")));
    }
    let mut nodes = Vec::new();
    for j in 0..=nt {
        for i in 0..=nr {
            let r = a + (b - a) * i as f64 / nr as f64;
            let t = std::f64::consts::FRAC_PI_2 * j as f64 / nt as f64;
            // exact zeros on the symmetry cuts
            let (s, c) = if j == nt { (1.0, 0.0) } else { t.sin_cos() };
            nodes.push(Point::new(r * c, r * s));
        }
    }
    let cells = grid_cells(kind, nr, nt, |i, j, _| j * (nr + 1) + i);
    from_cells(kind, nodes, &cells, None, tag)
}

/// Reflects a mesh about the vertical line `x = x0`, keeping counter-clockwise order.
/// Used to build mirror-image meshes in tests.
pub fn mirror_x(mesh: &Mesh, x0: f64) -> Result<Mesh> {
    let nodes = mesh.nodes().iter().map(|p| Point::new(2.0 * x0 - p.x, p.y)).collect();
    let elements = mesh
        .elements()
        .iter()
        .map(|el| {
            let nv = el.kind.num_vertices();
            // reversing vertex order keeps orientation; face f maps to face nv-2-f mod nv
            let mut v: Vec<usize> = el.vertices().iter().rev().copied().collect();
            v.rotate_right(1);
            let mut ids = v.clone();
            let mut faces = [None; 4];
            for (f, face) in faces.iter_mut().enumerate().take(nv) {
                let old = (2 * nv - 1 - f) % nv;
                *face = el.faces[old];
                if el.kind.is_quadratic() {
                    ids.push(el.nodes[nv + old]);
                }
            }
            Element { kind: el.kind, nodes: ids, level: el.level, faces }
        })
        .collect();
    let crack = mesh
        .crack()
        .map(|c| Crack::new(c.path.iter().map(|p| Point::new(2.0 * x0 - p.x, p.y)).collect()))
        .transpose()?;
    Mesh::new(nodes, elements, crack)
}
