//! Plain-text mesh format.
//!
//! ```text
//! nodes 4 elements 1
//! 0 0.0 0.0
//! 1 1.0 0.0
//! 2 1.0 1.0
//! 3 0.0 1.0
//! 0 QUAD4 0 1 2 3
//! boundary 1
//! 0 0 1
//! ```
//!
//! The header is followed by `N` node lines `id x y` and `M` element lines
//! `id type n1 .. nk`, then a `boundary B` section of `elem face tag` lines. Two
//! optional sections follow: `hanging H` with lines `slave k m1 w1 .. mk wk`, and
//! `crack P` with `P` polyline points `x y` ending at the tip. Ids may be any unique
//! integers; `#` starts a comment.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::refine::hanging_constraints;
use super::{Crack, EdgeRegistry, Element, HangingConstraint, Mesh};
use crate::fem::ElementType;
use crate::{Error, Point, Result};

pub fn to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "nodes {} elements {}", mesh.num_nodes(), mesh.num_elements());
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(s, "{i} {:?} {:?}", p.x, p.y);
    }
    for (e, el) in mesh.elements().iter().enumerate() {
        let _ = write!(s, "{e} {}", el.kind);
        for n in &el.nodes {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    let edges: Vec<_> = mesh.boundary_edges().collect();
    let _ = writeln!(s, "boundary {}", edges.len());
    for (e, f, t) in edges {
        let _ = writeln!(s, "{e} {f} {t}");
    }
    if !mesh.constraints().is_empty() {
        let _ = writeln!(s, "hanging {}", mesh.constraints().len());
        for c in mesh.constraints() {
            let _ = write!(s, "{} {}", c.slave, c.masters.len());
            for (m, w) in c.masters.iter().zip(&c.weights) {
                let _ = write!(s, " {m} {w:?}");
            }
            s.push('\n');
        }
    }
    if let Some(crack) = mesh.crack() {
        let _ = writeln!(s, "crack {}", crack.path.len());
        for p in &crack.path {
            let _ = writeln!(s, "{:?} {:?}", p.x, p.y);
        }
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Option<Vec<&'a str>> {
        for (i, raw) in self.inner.by_ref() {
            let content = raw.split('#').next().unwrap_or("");
            let toks: Vec<&str> = content.split_whitespace().collect();
            if !toks.is_empty() {
                self.line = i + 1;
                return Some(toks);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<Vec<&'a str>> {
        self.next_tokens().ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn err(&self, message: String) -> Error {
        Error::MeshFormat { line: self.line, message }
    }

    fn num<T: std::str::FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(format!("cannot parse `{tok}`")))
    }

    fn section(&mut self, toks: &[&str], name: &str) -> Result<usize> {
        if toks.len() != 2 || toks[0] != name {
            return Err(self.err(format!("expected `{name} <count>`")));
        }
        self.num(toks[1])
    }
}

pub fn parse(text: &str) -> Result<Mesh> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    let head = lines.expect("header")?;
    if head.len() != 4 || head[0] != "nodes" || head[2] != "elements" {
        return Err(lines.err("expected `nodes N elements M`".into()));
    }
    let (n_nodes, n_elems): (usize, usize) = (lines.num(head[1])?, lines.num(head[3])?);

    let mut node_index: HashMap<i64, usize> = HashMap::with_capacity(n_nodes);
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let t = lines.expect("node line")?;
        if t.len() != 3 {
            return Err(lines.err("expected `id x y`".into()));
        }
        let id: i64 = lines.num(t[0])?;
        if node_index.insert(id, nodes.len()).is_some() {
            return Err(lines.err(format!("duplicate node id {id}")));
        }
        nodes.push(Point::new(lines.num(t[1])?, lines.num(t[2])?));
    }
    let node = |lines: &Lines, tok: &str| -> Result<usize> {
        let id: i64 = lines.num(tok)?;
        node_index.get(&id).copied().ok_or_else(|| lines.err(format!("unknown node id {id}")))
    };

    let mut elem_index: HashMap<i64, usize> = HashMap::with_capacity(n_elems);
    let mut elements = Vec::with_capacity(n_elems);
    for _ in 0..n_elems {
        let t = lines.expect("element line")?;
        if t.len() < 2 {
            return Err(lines.err("expected `id type n1 .. nk`".into()));
        }
        let kind: ElementType = t[1].parse().map_err(|e: Error| lines.err(e.to_string()))?;
        if t.len() != 2 + kind.num_nodes() {
            return Err(lines.err(format!("{kind} needs {} nodes", kind.num_nodes())));
        }
        let ids = t[2..].iter().map(|tok| node(&lines, tok)).collect::<Result<Vec<_>>>()?;
        let id: i64 = lines.num(t[0])?;
        if elem_index.insert(id, elements.len()).is_some() {
            return Err(lines.err(format!("duplicate element id {id}")));
        }
        elements.push(Element::new(kind, ids));
    }

    let t = lines.expect("boundary section")?;
    let nb = lines.section(&t, "boundary")?;
    for _ in 0..nb {
        let t = lines.expect("boundary line")?;
        if t.len() != 3 {
            return Err(lines.err("expected `elem face tag`".into()));
        }
        let id: i64 = lines.num(t[0])?;
        let e = *elem_index.get(&id).ok_or_else(|| lines.err(format!("unknown element id {id}")))?;
        let f: usize = lines.num(t[1])?;
        if f >= elements[e].kind.num_vertices() {
            return Err(lines.err(format!("face {f} out of range")));
        }
        elements[e].faces[f] = Some(lines.num(t[2])?);
    }

    let mut constraints = Vec::new();
    let mut crack = None;
    while let Some(t) = lines.next_tokens() {
        match t[0] {
            "hanging" => {
                let nh = lines.section(&t, "hanging")?;
                for _ in 0..nh {
                    let t = lines.expect("hanging line")?;
                    let k: usize = lines.num(t.get(1).copied().unwrap_or(""))?;
                    if t.len() != 2 + 2 * k {
                        return Err(lines.err("expected `slave k m1 w1 .. mk wk`".into()));
                    }
                    let slave = node(&lines, t[0])?;
                    let mut masters = Vec::with_capacity(k);
                    let mut weights = Vec::with_capacity(k);
                    for pair in t[2..].chunks(2) {
                        masters.push(node(&lines, pair[0])?);
                        weights.push(lines.num(pair[1])?);
                    }
                    let sum: f64 = weights.iter().sum();
                    if (sum - 1.0).abs() > 1e-12 {
                        return Err(lines.err(format!("constraint weights sum to {sum}")));
                    }
                    constraints.push(HangingConstraint { slave, masters, weights });
                }
            }
            "crack" => {
                let np = lines.section(&t, "crack")?;
                let mut path = Vec::with_capacity(np);
                for _ in 0..np {
                    let t = lines.expect("crack point")?;
                    if t.len() != 2 {
                        return Err(lines.err("expected `x y`".into()));
                    }
                    path.push(Point::new(lines.num(t[0])?, lines.num(t[1])?));
                }
                crack = Some(Crack::new(path)?);
            }
            other => return Err(lines.err(format!("unknown section `{other}`"))),
        }
    }

    let registry = registry_from_constraints(&constraints);
    // validate connectivity and orientation, then attach the refinement state
    let base = Mesh::new(nodes, elements, crack)?;
    let rebuilt = hanging_constraints(base.elements(), &registry);
    let mut given = constraints.clone();
    given.sort_by_key(|c| c.slave);
    if rebuilt.len() != given.len() || rebuilt.iter().zip(&given).any(|(a, b)| a.slave != b.slave) {
        return Err(Error::MeshFormat { line: lines.line, message: "hanging section does not match the mesh edges".into() });
    }
    let Mesh { nodes, elements, crack, .. } = base;
    Ok(Mesh::from_parts(nodes, elements, given, crack, registry))
}

/// Edge registrations implied by hanging constraints, so that a mesh read back from
/// text refines exactly like the one that was written.
fn registry_from_constraints(constraints: &[HangingConstraint]) -> EdgeRegistry {
    let mut reg = EdgeRegistry::default();
    for c in constraints {
        match *c.masters.as_slice() {
            [p, q] => {
                let key = (p.min(q), p.max(q));
                reg.edge_nodes.insert((key.0, key.1, 2), c.slave);
                reg.midpoint_of.insert(c.slave, key);
            }
            [lo, mid, hi] => {
                // quarter point nearer to `lo` carries the larger weight on `lo`
                let quarter = if c.weights[0] > c.weights[2] { 1 } else { 3 };
                let (a, b, q) = if lo < hi { (lo, hi, quarter) } else { (hi, lo, 4 - quarter) };
                reg.edge_nodes.insert((a, b, q), c.slave);
                reg.edge_nodes.insert((a, b, 2), mid);
                reg.midpoint_of.insert(mid, (a, b));
            }
            _ => {}
        }
    }
    reg
}

pub fn read(path: &std::path::Path) -> Result<Mesh> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn write(mesh: &Mesh, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_string(mesh))?;
    Ok(())
}
