//! Global assembly with hanging-node and Dirichlet elimination.
//!
//! Every nodal dof is either an equation unknown, prescribed, or a slave expressed
//! through its masters. Element matrices are transformed accordingly, so the reduced
//! system stays symmetric positive definite.

use std::collections::HashMap;

use nalgebra::{DMatrix, Vector2};

use super::quadrature::{gauss_legendre, rule, Purpose};
use super::Material;
use crate::mesh::{BoundaryTag, Mesh};
use crate::{par, Point, Result};

/// Loads and boundary conditions of a problem.
pub trait Loads: Sync {
    fn body_force(&self, x: &Point) -> Vector2<f64>;

    /// Traction on a face carrying `tag`, or `None` if the face has no Neumann data.
    fn traction(&self, tag: BoundaryTag, x: &Point, normal: &Vector2<f64>) -> Option<Vector2<f64>>;

    /// Prescribed displacement components for the nodes of a face carrying `tag`.
    fn displacement(&self, tag: BoundaryTag, x: &Point) -> [Option<f64>; 2];

    /// Extra prescribed dofs `(node, component, value)`, e.g. rigid-body pins.
    fn pinned(&self, _mesh: &Mesh) -> Vec<(usize, usize, f64)> {
        Vec::new()
    }
}

/// Relation of one nodal dof to the reduced unknowns: `u = Σ w·x[eq] + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofExpansion {
    pub terms: Vec<(usize, f64)>,
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct DofMap {
    expansions: Vec<DofExpansion>,
    num_equations: usize,
    /// Nodal dof of each equation.
    equation_dof: Vec<usize>,
}

impl DofMap {
    pub fn build(mesh: &Mesh, loads: &dyn Loads) -> Self {
        let ndof = 2 * mesh.num_nodes();
        let mut prescribed: Vec<Option<f64>> = vec![None; ndof];
        for (e, f, tag) in mesh.boundary_edges() {
            let el = mesh.element(e);
            let ([a, b], mid) = el.kind.face_nodes(f);
            for local in [Some(a), Some(b), mid].into_iter().flatten() {
                let n = el.nodes[local];
                let vals = loads.displacement(tag, &mesh.node(n));
                for c in 0..2 {
                    if let Some(v) = vals[c] {
                        prescribed[2 * n + c] = Some(v);
                    }
                }
            }
        }
        for (n, c, v) in loads.pinned(mesh) {
            prescribed[2 * n + c] = Some(v);
        }
        let slaves = mesh.resolved_constraints();

        let mut expansions = vec![DofExpansion { terms: Vec::new(), offset: 0.0 }; ndof];
        let mut equation_dof = Vec::new();
        for d in 0..ndof {
            if slaves.contains_key(&(d / 2)) {
                continue;
            }
            match prescribed[d] {
                Some(v) => expansions[d].offset = v,
                None => {
                    expansions[d].terms.push((equation_dof.len(), 1.0));
                    equation_dof.push(d);
                }
            }
        }
        let mut slave_nodes: Vec<_> = slaves.keys().copied().collect();
        slave_nodes.sort_unstable();
        for s in slave_nodes {
            for c in 0..2 {
                let mut exp = DofExpansion { terms: Vec::new(), offset: 0.0 };
                for &(m, w) in &slaves[&s] {
                    let me = &expansions[2 * m + c];
                    exp.offset += w * me.offset;
                    for &(eq, wm) in &me.terms {
                        match exp.terms.iter_mut().find(|t| t.0 == eq) {
                            Some(t) => t.1 += w * wm,
                            None => exp.terms.push((eq, w * wm)),
                        }
                    }
                }
                expansions[2 * s + c] = exp;
            }
        }
        Self { num_equations: equation_dof.len(), expansions, equation_dof }
    }

    pub fn num_equations(&self) -> usize {
        self.num_equations
    }

    pub fn expansion(&self, dof: usize) -> &DofExpansion {
        &self.expansions[dof]
    }

    pub fn equation_dof(&self, eq: usize) -> usize {
        self.equation_dof[eq]
    }

    /// Full nodal displacement vector from the reduced solution.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.expansions.iter().map(|e| e.offset + e.terms.iter().map(|&(eq, w)| w * x[eq]).sum::<f64>()).collect()
    }
}

/// Symmetric sparse matrix stored by rows; only `col ≥ row` entries are kept.
#[derive(Debug, Clone)]
pub struct SymmetricSparse {
    pub n: usize,
    pub upper: Vec<Vec<(usize, f64)>>,
}

impl SymmetricSparse {
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, row) in self.upper.iter().enumerate() {
            for &(j, v) in row {
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = (i.min(j), i.max(j));
        self.upper[r].iter().find(|e| e.0 == c).map_or(0.0, |e| e.1)
    }
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SymmetricSparse,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

/// Element stiffness `∫ Bᵀ D B dΩ` (upper triangle computed, then mirrored).
pub fn element_stiffness(mesh: &Mesh, material: &Material, e: usize) -> DMatrix<f64> {
    let kind = mesh.element(e).kind;
    let nn = kind.num_nodes();
    let d = material.stiffness();
    let mut k = DMatrix::zeros(2 * nn, 2 * nn);
    for (xi, w) in rule(kind, Purpose::Stiffness).iter() {
        let (sh, g) = mesh.physical_gradients(e, xi);
        let wd = w * g.det_j;
        for a in 0..nn {
            let [ax, ay] = sh.grads[a];
            // D·B_a columns for the x and y dofs of node a
            let dba = [
                [d[(0, 0)] * ax, d[(1, 0)] * ax, d[(2, 2)] * ay],
                [d[(0, 1)] * ay, d[(1, 1)] * ay, d[(2, 2)] * ax],
            ];
            for b in a..nn {
                let [bx, by] = sh.grads[b];
                for (ca, col) in dba.iter().enumerate() {
                    // B_b rows dotted with D·B_a
                    let kx = bx * col[0] + by * col[2];
                    let ky = by * col[1] + bx * col[2];
                    k[(2 * a + ca, 2 * b)] += wd * kx;
                    k[(2 * a + ca, 2 * b + 1)] += wd * ky;
                }
            }
        }
    }
    for i in 0..2 * nn {
        for j in 0..i {
            k[(i, j)] = k[(j, i)];
        }
    }
    k
}

/// Element load vector from body forces and Neumann tractions.
pub fn element_load(mesh: &Mesh, loads: &dyn Loads, e: usize) -> Vec<f64> {
    let el = mesh.element(e);
    let kind = el.kind;
    let nn = kind.num_nodes();
    let mut f = vec![0.0; 2 * nn];
    for (xi, w) in rule(kind, Purpose::ErrorIntegration).iter() {
        let g = mesh.geometry(e, xi);
        let sh = kind.shape(xi);
        let b = loads.body_force(&g.x);
        for a in 0..nn {
            f[2 * a] += w * g.det_j * sh.values[a] * b.x;
            f[2 * a + 1] += w * g.det_j * sh.values[a] * b.y;
        }
    }
    let (gp, gw) = gauss_legendre(5);
    for face in 0..kind.num_vertices() {
        let Some(tag) = el.faces[face] else { continue };
        let (p, q) = el.face_vertices(face);
        let d = mesh.node(q) - mesh.node(p);
        let normal = Vector2::new(d.y, -d.x).normalize();
        for (&t, &w) in gp.iter().zip(&gw) {
            let xi = kind.face_point(face, 0.5 * (t + 1.0));
            let x = mesh.map_point(e, xi);
            let Some(tr) = loads.traction(tag, &x, &normal) else { break };
            // straight faces: |dΓ/dt| = L/2 on [-1, 1]
            let jw = 0.5 * d.norm() * w;
            let sh = kind.shape(xi);
            for a in 0..nn {
                f[2 * a] += jw * sh.values[a] * tr.x;
                f[2 * a + 1] += jw * sh.values[a] * tr.y;
            }
        }
    }
    f
}

/// Element dof list: `2·node + component`.
pub fn element_dofs(mesh: &Mesh, e: usize) -> Vec<usize> {
    mesh.element(e).nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect()
}

pub fn assemble(mesh: &Mesh, material: &Material, loads: &dyn Loads) -> Result<LinearSystem> {
    let dofs = DofMap::build(mesh, loads);
    let neq = dofs.num_equations();
    let local: Vec<(DMatrix<f64>, Vec<f64>)> = par::map_range(mesh.num_elements(), |e| {
        (element_stiffness(mesh, material, e), element_load(mesh, loads, e))
    });

    let mut rows: Vec<HashMap<usize, f64>> = vec![HashMap::new(); neq];
    let mut rhs = vec![0.0; neq];
    for (e, (k, f)) in local.iter().enumerate() {
        let edofs = element_dofs(mesh, e);
        let exps: Vec<&DofExpansion> = edofs.iter().map(|&d| dofs.expansion(d)).collect();
        for (i, ei) in exps.iter().enumerate() {
            // f_red = Tᵀ (f − K c)
            let kc: f64 = exps.iter().enumerate().map(|(j, ej)| k[(i, j)] * ej.offset).sum();
            for &(eq, w) in &ei.terms {
                rhs[eq] += w * (f[i] - kc);
            }
            for (j, ej) in exps.iter().enumerate().skip(i) {
                let kij = k[(i, j)];
                if kij == 0.0 {
                    continue;
                }
                for &(p, wp) in &ei.terms {
                    for &(q, wq) in &ej.terms {
                        if i == j && p > q {
                            continue;
                        }
                        let v = wp * wq * kij;
                        let (r, c) = (p.min(q), p.max(q));
                        *rows[r].entry(c).or_insert(0.0) += v;
                        if i != j && p == q {
                            // both (i, j) and (j, i) land on the diagonal
                            *rows[r].entry(c).or_insert(0.0) += v;
                        }
                    }
                }
            }
        }
    }
    let upper = rows
        .into_iter()
        .map(|r| {
            let mut v: Vec<(usize, f64)> = r.into_iter().collect();
            v.sort_unstable_by_key(|e| e.0);
            v
        })
        .collect();
    Ok(LinearSystem { matrix: SymmetricSparse { n: neq, upper }, rhs, dofs })
}
