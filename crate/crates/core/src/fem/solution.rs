use std::sync::OnceLock;

use nalgebra::{Matrix2, Vector2};

use super::assembly::{assemble, Loads};
use super::quadrature::{rule, Purpose};
use super::{solver, Material};
use crate::mesh::Mesh;
use crate::{par, Error, Point, Result, Stress};

/// Nodal displacements on a mesh, with stress evaluation anywhere.
#[derive(Debug)]
pub struct Solution<'m> {
    mesh: &'m Mesh,
    material: Material,
    /// `[u0, v0, u1, v1, ...]`.
    displacements: Vec<f64>,
    /// Number of reduced unknowns.
    pub num_equations: usize,
    /// Relative residual of the reduced system.
    pub residual: f64,
    stiffness_stresses: OnceLock<Vec<Vec<Stress>>>,
}

/// Assembles and solves the problem on `mesh`.
pub fn solve<'m>(mesh: &'m Mesh, material: &Material, loads: &dyn Loads) -> Result<Solution<'m>> {
    let sys = assemble(mesh, material, loads)?;
    let (x, residual) = solver::solve(&sys.matrix, &sys.rhs).map_err(|e| match e {
        Error::RigidBody { equation, pivot } => Error::RigidBody { equation: sys.dofs.equation_dof(equation), pivot },
        other => other,
    })?;
    let mut sol = Solution::from_displacements(mesh, *material, sys.dofs.expand(&x));
    sol.num_equations = sys.dofs.num_equations();
    sol.residual = residual;
    Ok(sol)
}

impl<'m> Solution<'m> {
    /// Wraps given nodal displacements, e.g. an interpolated exact field.
    pub fn from_displacements(mesh: &'m Mesh, material: Material, displacements: Vec<f64>) -> Self {
        assert_eq!(displacements.len(), 2 * mesh.num_nodes());
        Self {
            mesh,
            material,
            displacements,
            num_equations: 0,
            residual: 0.0,
            stiffness_stresses: OnceLock::new(),
        }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn displacements(&self) -> &[f64] {
        &self.displacements
    }

    pub fn node_displacement(&self, n: usize) -> Vector2<f64> {
        Vector2::new(self.displacements[2 * n], self.displacements[2 * n + 1])
    }

    pub fn displacement_at(&self, e: usize, xi: [f64; 2]) -> Vector2<f64> {
        let el = self.mesh.element(e);
        let sh = el.kind.shape(xi);
        el.nodes.iter().enumerate().map(|(k, &n)| self.node_displacement(n) * sh.values[k]).sum()
    }

    /// Displacement gradient `∂u_i/∂x_j` at a reference point.
    pub fn gradient_at(&self, e: usize, xi: [f64; 2]) -> Matrix2<f64> {
        let (sh, _) = self.mesh.physical_gradients(e, xi);
        let mut g = Matrix2::zeros();
        for (k, &n) in self.mesh.element(e).nodes.iter().enumerate() {
            let u = self.node_displacement(n);
            let [gx, gy] = sh.grads[k];
            g += Matrix2::new(u.x * gx, u.x * gy, u.y * gx, u.y * gy);
        }
        g
    }

    /// `σ^h = D B u` inside element `e`.
    pub fn stress_at(&self, e: usize, xi: [f64; 2]) -> Stress {
        let g = self.gradient_at(e, xi);
        let strain = Stress::new(g[(0, 0)], g[(1, 1)], g[(0, 1)] + g[(1, 0)]);
        self.material.stiffness() * strain
    }

    /// FE stress at a physical point (element found by point location).
    pub fn fe_stress(&self, x: &Point) -> Result<Stress> {
        let (e, xi) = self.mesh.locate(x)?;
        Ok(self.stress_at(e, xi))
    }

    /// Cached stresses at every element's stiffness quadrature points.
    pub fn stiffness_point_stresses(&self) -> &[Vec<Stress>] {
        self.stiffness_stresses.get_or_init(|| {
            par::map_range(self.mesh.num_elements(), |e| {
                let r = rule(self.mesh.element(e).kind, Purpose::Stiffness);
                r.points.iter().map(|&xi| self.stress_at(e, xi)).collect()
            })
        })
    }

    /// Strain energy `½ ∫ σᵀ ε dΩ`.
    pub fn strain_energy(&self) -> f64 {
        let per: Vec<f64> = par::map_range(self.mesh.num_elements(), |e| {
            let kind = self.mesh.element(e).kind;
            rule(kind, Purpose::ErrorIntegration)
                .iter()
                .map(|(xi, w)| {
                    let s = self.stress_at(e, xi);
                    w * self.mesh.geometry(e, xi).det_j * self.material.energy_density(&s)
                })
                .sum()
        });
        0.5 * per.iter().sum::<f64>()
    }
}
