//! Legacy ASCII VTK unstructured grids, with a reader for the subset the writer emits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::fem::ElementType;
use crate::mesh::Mesh;
use crate::{Error, Result};

pub fn cell_type(kind: ElementType) -> u8 {
    match kind {
        ElementType::Tri3 => 5,
        ElementType::Tri6 => 22,
        ElementType::Quad4 => 9,
        ElementType::Quad8 => 23,
    }
}

/// Named arrays attached to cells or points; every entry has `components` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub components: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<(u8, Vec<usize>)>,
    pub cell_data: BTreeMap<String, Array>,
    pub point_data: BTreeMap<String, Array>,
}

impl Grid {
    pub fn from_mesh(mesh: &Mesh, title: &str) -> Self {
        Self {
            title: title.to_string(),
            points: mesh.nodes().iter().map(|p| [p.x, p.y, 0.0]).collect(),
            cells: mesh.elements().iter().map(|el| (cell_type(el.kind), el.nodes.clone())).collect(),
            ..Default::default()
        }
    }

    pub fn to_vtk(&self) -> String {
        let mut s = String::new();
        s.push_str("# vtk DataFile Version 3.0\n");
        let _ = writeln!(s, "{}", self.title.replace('\n', " "));
        s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
        }
        let size: usize = self.cells.iter().map(|c| c.1.len() + 1).sum();
        let _ = writeln!(s, "CELLS {} {size}", self.cells.len());
        for (_, nodes) in &self.cells {
            let _ = write!(s, "{}", nodes.len());
            for n in nodes {
                let _ = write!(s, " {n}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cells.len());
        for (t, _) in &self.cells {
            let _ = writeln!(s, "{t}");
        }
        write_section(&mut s, "CELL_DATA", self.cells.len(), &self.cell_data);
        write_section(&mut s, "POINT_DATA", self.points.len(), &self.point_data);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let err = |line: usize, m: &str| Error::MeshFormat { line, message: m.to_string() };
        let (n, first) = lines.next().ok_or_else(|| err(0, "empty file"))?;
        if !first.starts_with("# vtk DataFile") {
            return Err(err(n, "missing VTK signature"));
        }
        let title = lines.next().ok_or_else(|| err(n, "missing title"))?.1.to_string();
        let mut grid = Grid { title, ..Default::default() };
        let mut tokens: Vec<(usize, &str)> = Vec::new();
        for (n, l) in lines {
            tokens.extend(l.split_whitespace().map(|t| (n, t)));
        }
        let mut it = tokens.into_iter().peekable();
        let mut next = |what: &str| it.next().ok_or_else(|| err(0, &format!("unexpected end, expected {what}")));
        let expect = |(n, t): (usize, &str), want: &str| if t == want { Ok(()) } else { Err(err(n, &format!("expected {want}, found {t}"))) };
        fn num<T: std::str::FromStr>((n, t): (usize, &str)) -> Result<T> {
            t.parse().map_err(|_| Error::MeshFormat { line: n, message: format!("bad number `{t}`") })
        }
        expect(next("ASCII")?, "ASCII")?;
        expect(next("DATASET")?, "DATASET")?;
        expect(next("UNSTRUCTURED_GRID")?, "UNSTRUCTURED_GRID")?;
        expect(next("POINTS")?, "POINTS")?;
        let np: usize = num(next("count")?)?;
        next("type")?;
        for _ in 0..np {
            grid.points.push([num(next("x")?)?, num(next("y")?)?, num(next("z")?)?]);
        }
        expect(next("CELLS")?, "CELLS")?;
        let nc: usize = num(next("count")?)?;
        next("size")?;
        let mut conn = Vec::with_capacity(nc);
        for _ in 0..nc {
            let k: usize = num(next("node count")?)?;
            conn.push((0..k).map(|_| next("node").and_then(num)).collect::<Result<Vec<usize>>>()?);
        }
        expect(next("CELL_TYPES")?, "CELL_TYPES")?;
        num::<usize>(next("count")?)?;
        for nodes in conn {
            grid.cells.push((num(next("cell type")?)?, nodes));
        }
        let mut section: Option<(bool, usize)> = None;
        while let Ok(tok) = next("section") {
            match tok.1 {
                "CELL_DATA" | "POINT_DATA" => section = Some((tok.1 == "CELL_DATA", num(next("count")?)?)),
                "SCALARS" | "VECTORS" => {
                    let (cells, count) = section.ok_or_else(|| err(tok.0, "data before CELL_DATA or POINT_DATA"))?;
                    let name = next("name")?.1.to_string();
                    next("type")?;
                    let components = if tok.1 == "VECTORS" {
                        3
                    } else {
                        // optional component count, then the lookup table line
                        let t = next("LOOKUP_TABLE")?;
                        if t.1 == "LOOKUP_TABLE" {
                            next("table")?;
                            1
                        } else {
                            let c = num(t)?;
                            expect(next("LOOKUP_TABLE")?, "LOOKUP_TABLE")?;
                            next("table")?;
                            c
                        }
                    };
                    let values = (0..count * components).map(|_| next("value").and_then(num)).collect::<Result<Vec<f64>>>()?;
                    let target = if cells { &mut grid.cell_data } else { &mut grid.point_data };
                    target.insert(name, Array { components, values });
                }
                other => return Err(err(tok.0, &format!("unsupported keyword `{other}`"))),
            }
        }
        Ok(grid)
    }
}

fn write_section(s: &mut String, keyword: &str, count: usize, data: &BTreeMap<String, Array>) {
    if data.is_empty() {
        return;
    }
    let _ = writeln!(s, "{keyword} {count}");
    for (name, a) in data {
        assert_eq!(a.values.len(), count * a.components, "array {name} has the wrong length");
        if a.components == 3 && keyword == "POINT_DATA" {
            let _ = writeln!(s, "VECTORS {name} double");
        } else {
            let _ = writeln!(s, "SCALARS {name} double {}", a.components);
            s.push_str("LOOKUP_TABLE default\n");
        }
        for row in a.values.chunks(a.components) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
    }
}
