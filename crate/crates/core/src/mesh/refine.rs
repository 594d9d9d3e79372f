//! Quadrisection refinement with one-level irregularity and hanging-node constraints.

use std::collections::HashMap;

use super::{EdgeRegistry, Element, HangingConstraint, Mesh};
use crate::fem::ElementType;
use crate::{Error, Result};

const TRI_CHILDREN: [[[f64; 2]; 3]; 4] = [
    [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]],
    [[0.5, 0.0], [1.0, 0.0], [0.5, 0.5]],
    [[0.0, 0.5], [0.5, 0.5], [0.0, 1.0]],
    [[0.5, 0.5], [0.0, 0.5], [0.5, 0.0]],
];

const QUAD_CHILDREN: [[[f64; 2]; 4]; 4] = [
    [[-1.0, -1.0], [0.0, -1.0], [0.0, 0.0], [-1.0, 0.0]],
    [[0.0, -1.0], [1.0, -1.0], [1.0, 0.0], [0.0, 0.0]],
    [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    [[-1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [-1.0, 1.0]],
];

enum Location {
    Vertex(usize),
    /// Face index and parameter from the face's start vertex.
    Edge(usize, f64),
    Interior,
}

fn locate_ref(kind: ElementType, xi: [f64; 2]) -> Location {
    let nv = kind.num_vertices();
    let tol = 1e-12;
    for v in 0..nv {
        let r = kind.node_ref(v);
        if (r[0] - xi[0]).abs() < tol && (r[1] - xi[1]).abs() < tol {
            return Location::Vertex(v);
        }
    }
    for f in 0..nv {
        if let Some(t) = edge_param(kind, f, xi) {
            return Location::Edge(f, t);
        }
    }
    Location::Interior
}

/// Parameter of `xi` along face `f` if it lies on that face (endpoints included).
fn edge_param(kind: ElementType, f: usize, xi: [f64; 2]) -> Option<f64> {
    let nv = kind.num_vertices();
    let a = kind.node_ref(f);
    let b = kind.node_ref((f + 1) % nv);
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = ((xi[0] - a[0]) * d[0] + (xi[1] - a[1]) * d[1]) / len2;
    let px = a[0] + t * d[0] - xi[0];
    let py = a[1] + t * d[1] - xi[1];
    (px.abs() < 1e-12 && py.abs() < 1e-12 && (-1e-12..=1.0 + 1e-12).contains(&t)).then_some(t)
}

fn edge_key(p: usize, q: usize, quarter_from_p: u8) -> (usize, usize, u8) {
    if p < q {
        (p, q, quarter_from_p)
    } else {
        (q, p, 4 - quarter_from_p)
    }
}

impl Mesh {
    /// Splits every element.
    pub fn refine_uniform(&self) -> Result<Mesh> {
        self.refine(&vec![true; self.num_elements()])
    }

    /// Splits marked elements into four children; neighbours are also split where needed
    /// to keep at most one level of difference across any edge.
    pub fn refine(&self, marks: &[bool]) -> Result<Mesh> {
        if marks.len() != self.num_elements() {
            return Err(Error::InvalidInput(format!(
                "{} refinement marks for {} elements",
                marks.len(),
                self.num_elements()
            )));
        }
        let split = self.irregularity_closure(marks);

        let mut nodes = self.nodes.clone();
        let mut registry = self.registry.clone();
        let mut elements = Vec::with_capacity(self.num_elements() + 3 * split.iter().filter(|&&s| s).count());
        let mut parent_of = Vec::with_capacity(elements.capacity());

        for (e, el) in self.elements.iter().enumerate() {
            if !split[e] {
                elements.push(el.clone());
                parent_of.push(e);
                continue;
            }
            for child in self.children(e, &mut nodes, &mut registry) {
                elements.push(child);
                parent_of.push(e);
            }
        }

        let constraints = hanging_constraints(&elements, &registry);
        let mesh = Mesh::from_parts(nodes, elements, constraints, self.crack.clone(), registry);
        for (i, &p) in parent_of.iter().enumerate() {
            if split[p] && !mesh.jacobian_positive(i) {
                return Err(Error::InvertedElement { element: p });
            }
        }
        Ok(mesh)
    }

    fn irregularity_closure(&self, marks: &[bool]) -> Vec<bool> {
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (e, el) in self.elements.iter().enumerate() {
            for f in 0..el.kind.num_vertices() {
                let (a, b) = el.face_vertices(f);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(e);
            }
        }
        let mut split = marks.to_vec();
        let mut stack: Vec<usize> = (0..marks.len()).filter(|&e| marks[e]).collect();
        while let Some(e) = stack.pop() {
            let el = &self.elements[e];
            for f in 0..el.kind.num_vertices() {
                let (a, b) = el.face_vertices(f);
                for (x, y) in [(a, b), (b, a)] {
                    let Some(&(p, q)) = self.registry.midpoint_of.get(&x) else { continue };
                    if y != p && y != q {
                        continue;
                    }
                    // this face is half of a coarser neighbour's edge (p, q)
                    if let Some(coarse) = by_edge.get(&(p.min(q), p.max(q))) {
                        for &g in coarse {
                            if !split[g] {
                                split[g] = true;
                                stack.push(g);
                            }
                        }
                    }
                }
            }
        }
        split
    }

    fn children(
        &self,
        e: usize,
        nodes: &mut Vec<crate::Point>,
        registry: &mut EdgeRegistry,
    ) -> Vec<Element> {
        let parent = &self.elements[e];
        let kind = parent.kind;
        let nv = kind.num_vertices();
        let templates: Vec<Vec<[f64; 2]>> = if kind.is_triangle() {
            TRI_CHILDREN.iter().map(|c| c.to_vec()).collect()
        } else {
            QUAD_CHILDREN.iter().map(|c| c.to_vec()).collect()
        };
        let mut interior: HashMap<(i64, i64), usize> = HashMap::new();

        let mut node_at = |xi: [f64; 2]| -> usize {
            match locate_ref(kind, xi) {
                Location::Vertex(v) => parent.nodes[v],
                Location::Edge(f, t) => {
                    let (p, q) = parent.face_vertices(f);
                    let quarter = (4.0 * t).round() as u8;
                    let key = edge_key(p, q, quarter);
                    if quarter == 2 && kind.is_quadratic() {
                        let mid = parent.nodes[nv + f];
                        registry.edge_nodes.entry(key).or_insert(mid);
                        registry.midpoint_of.insert(mid, (key.0, key.1));
                        return mid;
                    }
                    if let Some(&n) = registry.edge_nodes.get(&key) {
                        return n;
                    }
                    let n = nodes.len();
                    nodes.push(self.map_point(e, xi));
                    registry.edge_nodes.insert(key, n);
                    if quarter == 2 {
                        registry.midpoint_of.insert(n, (key.0, key.1));
                    }
                    n
                }
                Location::Interior => {
                    let k = ((xi[0] * 8.0).round() as i64, (xi[1] * 8.0).round() as i64);
                    *interior.entry(k).or_insert_with(|| {
                        nodes.push(self.map_point(e, xi));
                        nodes.len() - 1
                    })
                }
            }
        };

        templates
            .iter()
            .map(|verts| {
                let mut ids: Vec<usize> = verts.iter().map(|&v| node_at(v)).collect();
                if kind.is_quadratic() {
                    for k in 0..nv {
                        let (a, b) = (verts[k], verts[(k + 1) % nv]);
                        ids.push(node_at([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]));
                    }
                }
                let mut faces = [None; 4];
                for (k, face) in faces.iter_mut().enumerate().take(nv) {
                    let (a, b) = (verts[k], verts[(k + 1) % nv]);
                    *face = (0..nv)
                        .find(|&f| edge_param(kind, f, a).is_some() && edge_param(kind, f, b).is_some())
                        .and_then(|f| parent.faces[f]);
                }
                Element { kind, nodes: ids, level: parent.level + 1, faces }
            })
            .collect()
    }
}

/// Constraints for every node registered on an edge that is still a whole edge of some
/// element: such nodes were created by a refined neighbour and hang on this edge.
pub(crate) fn hanging_constraints(elements: &[Element], registry: &EdgeRegistry) -> Vec<HangingConstraint> {
    let mut out: Vec<HangingConstraint> = Vec::new();
    for el in elements {
        let nv = el.kind.num_vertices();
        for f in 0..nv {
            let (p, q) = el.face_vertices(f);
            let (lo, hi) = (p.min(q), p.max(q));
            if el.kind.is_quadratic() {
                let mid = el.nodes[nv + f];
                for quarter in [1u8, 3] {
                    if let Some(&n) = registry.edge_nodes.get(&(lo, hi, quarter)) {
                        let w = ElementType::quadratic_edge_weights(f64::from(quarter) / 4.0);
                        out.push(HangingConstraint { slave: n, masters: vec![lo, mid, hi], weights: w.to_vec() });
                    }
                }
            } else if let Some(&n) = registry.edge_nodes.get(&(lo, hi, 2)) {
                out.push(HangingConstraint { slave: n, masters: vec![lo, hi], weights: vec![0.5, 0.5] });
            }
        }
    }
    out.sort_by_key(|c| c.slave);
    out.dedup_by_key(|c| c.slave);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate;
    use crate::Point;

    fn two_quads() -> Mesh {
        let nodes = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 1.0),
        ];
        let elements = vec![
            Element::new(ElementType::Quad4, vec![0, 1, 4, 3]),
            Element::new(ElementType::Quad4, vec![1, 2, 5, 4]),
        ];
        Mesh::new(nodes, elements, None).unwrap()
    }

    #[test]
    fn single_quad_split() {
        let m = generate::rectangle(ElementType::Quad4, [0.0, 0.0], [1.0, 1.0], 1, 1, |_, _| None).unwrap();
        let r = m.refine(&[true]).unwrap();
        assert_eq!(r.num_elements(), 4);
        assert_eq!(r.num_nodes(), m.num_nodes() + 5);
        assert!(r.constraints().is_empty());
        assert!((r.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shared_midpoint_hangs_on_unrefined_neighbour() {
        let m = two_quads();
        let r = m.refine(&[true, false]).unwrap();
        assert_eq!(r.constraints().len(), 1);
        let c = &r.constraints()[0];
        assert_eq!(r.node(c.slave), Point::new(1.0, 0.5));
        let mut masters = c.masters.clone();
        masters.sort_unstable();
        assert_eq!(masters, vec![1, 4]);
        assert_eq!(c.weights, vec![0.5, 0.5]);
        // refining the neighbour too removes the hanging node
        let marks: Vec<bool> = (0..r.num_elements()).map(|e| r.element(e).level == 0).collect();
        let rr = r.refine(&marks).unwrap();
        assert!(rr.constraints().is_empty());
        assert_eq!(rr.num_elements(), 8);
    }

    #[test]
    fn quadratic_hanging_uses_edge_trace() {
        let m = generate::rectangle(ElementType::Quad8, [0.0, 0.0], [2.0, 1.0], 2, 1, |_, _| None).unwrap();
        let r = m.refine(&[true, false]).unwrap();
        assert_eq!(r.constraints().len(), 2);
        for c in r.constraints() {
            assert_eq!(c.masters.len(), 3);
            assert!((c.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            // reproduces linear fields
            let f = |p: Point| 3.0 * p.x - 2.0 * p.y + 0.5;
            let interp: f64 = c.masters.iter().zip(&c.weights).map(|(&n, w)| w * f(r.node(n))).sum();
            assert!((interp - f(r.node(c.slave))).abs() < 1e-14);
        }
    }

    #[test]
    fn one_level_irregularity_enforced() {
        let m = generate::rectangle(ElementType::Quad4, [0.0, 0.0], [4.0, 4.0], 4, 4, |_, _| None).unwrap();
        // mark the corner element
        let corner = (0..m.num_elements()).find(|&e| m.centroid(e) == Point::new(0.5, 0.5)).unwrap();
        let mut marks = vec![false; m.num_elements()];
        marks[corner] = true;
        let mut cur = m.refine(&marks).unwrap();
        // then (the descendants of) its diagonal neighbour, twice
        for _ in 0..2 {
            let e = cur.locate(&Point::new(1.26, 1.26)).unwrap().0;
            let mut marks = vec![false; cur.num_elements()];
            marks[e] = true;
            cur = cur.refine(&marks).unwrap();
        }
        for (a, b) in cur.edge_neighbours() {
            let (la, lb) = (cur.element(a).level as i32, cur.element(b).level as i32);
            assert!((la - lb).abs() <= 1, "elements {a} (level {la}) and {b} (level {lb})");
        }
        assert!((cur.total_area() - 16.0).abs() < 1e-12);
        for c in cur.constraints() {
            assert!((c.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_tags_inherited() {
        let m = generate::rectangle(ElementType::Tri3, [0.0, 0.0], [1.0, 1.0], 1, 1, |_, n| {
            (n.y < -0.5).then_some(7)
        })
        .unwrap();
        let tagged = m.boundary_edges().filter(|e| e.2 == 7).count();
        let r = m.refine_uniform().unwrap();
        assert_eq!(r.boundary_edges().filter(|e| e.2 == 7).count(), 2 * tagged);
    }
}
