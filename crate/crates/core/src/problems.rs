//! Closed-form benchmarks: a polynomial solution on a square, a pressurized thick
//! cylinder and the Westergaard crack.

use std::f64::consts::PI;

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fem::assembly::Loads;
use crate::fem::{ElementType, Material};
use crate::mesh::{generate, BoundaryTag, Mesh};
use crate::{Error, Point, Result, Stress};

/// Boundary tags used by the benchmark meshes.
pub mod tags {
    use crate::mesh::BoundaryTag;

    /// Exact traction applied.
    pub const TRACTION: BoundaryTag = 1;
    /// Exact displacement prescribed on both components.
    pub const FIXED: BoundaryTag = 2;
    /// Symmetry cut normal to x: `u_x = 0`, zero shear.
    pub const SYMMETRY_X: BoundaryTag = 3;
    /// Symmetry cut normal to y: `u_y = 0`, zero shear.
    pub const SYMMETRY_Y: BoundaryTag = 4;
    /// Traction-free crack face.
    pub const CRACK: BoundaryTag = 5;
}

/// Which traction components a boundary side prescribes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownTraction {
    None,
    /// Tangential component only (symmetry cuts).
    Shear,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    Square,
    Cylinder,
    Westergaard,
}

impl std::str::FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Self::Square),
            "cylinder" => Ok(Self::Cylinder),
            "westergaard" => Ok(Self::Westergaard),
            _ => Err(Error::Config(format!("unknown problem `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    /// `[-1, 1]²` with a cubic displacement field; exact displacements on `x = -1` and
    /// `y = -1`, exact tractions on `x = 1` and `y = 1`.
    Square { material: Material },
    /// Quarter of a thick cylinder `a ≤ r ≤ b` under internal pressure `p`.
    Cylinder { material: Material, a: f64, b: f64, p: f64 },
    /// Infinite plate with a crack `|x| ≤ a` under biaxial `σ∞` and shear `τ∞`; the model
    /// is `[0, 2a] × [-a, a]` with the crack from the left midside to the tip `(a, 0)`.
    Westergaard { material: Material, a: f64, sigma: f64, tau: f64 },
}

impl Problem {
    pub fn square() -> Self {
        Self::Square { material: Material { young: 1000.0, poisson: 0.3 } }
    }

    pub fn cylinder() -> Self {
        Self::Cylinder { material: Material { young: 1000.0, poisson: 0.3 }, a: 5.0, b: 20.0, p: 1.0 }
    }

    pub fn westergaard(sigma: f64, tau: f64) -> Self {
        Self::Westergaard { material: Material { young: 1e7, poisson: 0.333 }, a: 1.0, sigma, tau }
    }

    pub fn id(&self) -> ProblemId {
        match self {
            Self::Square { .. } => ProblemId::Square,
            Self::Cylinder { .. } => ProblemId::Cylinder,
            Self::Westergaard { .. } => ProblemId::Westergaard,
        }
    }

    pub fn material(&self) -> Material {
        match self {
            Self::Square { material } | Self::Cylinder { material, .. } | Self::Westergaard { material, .. } => {
                *material
            }
        }
    }

    /// Initial structured mesh with `n` divisions per direction (`n` even for the crack).
    pub fn initial_mesh(&self, kind: ElementType, n: usize) -> Result<Mesh> {
        use tags::*;
        match *self {
            Self::Square { .. } => generate::rectangle(kind, [-1.0, -1.0], [1.0, 1.0], n, n, |_, nrm| {
                Some(if nrm.x < -0.5 || nrm.y < -0.5 { FIXED } else { TRACTION })
            }),
            Self::Cylinder { a, b, .. } => generate::quarter_annulus(kind, a, b, n, n, |p, _| {
                Some(if p.x.abs() < 1e-9 {
                    SYMMETRY_X
                } else if p.y.abs() < 1e-9 {
                    SYMMETRY_Y
                } else {
                    TRACTION
                })
            }),
            Self::Westergaard { a, .. } => {
                generate::edge_cracked_rectangle(kind, [0.0, -a], [2.0 * a, a], n, n, a, |p, _| {
                    Some(if p.y.abs() < 1e-12 && p.x < a { CRACK } else { TRACTION })
                })
            }
        }
    }

    pub fn known_traction(&self, tag: BoundaryTag) -> KnownTraction {
        match tag {
            tags::TRACTION | tags::CRACK => KnownTraction::Both,
            tags::SYMMETRY_X | tags::SYMMETRY_Y => KnownTraction::Shear,
            _ => KnownTraction::None,
        }
    }

    pub fn exact_displacement(&self, x: &Point) -> Result<Vector2<f64>> {
        self.exact_displacement_side(x, 0)
    }

    /// Exact displacement; `side` (+1 upper, -1 lower) selects the crack face for points
    /// lying on it.
    pub fn exact_displacement_side(&self, x: &Point, side: i8) -> Result<Vector2<f64>> {
        match *self {
            Self::Square { .. } => {
                let (x, y) = (x.x, x.y);
                Ok(Vector2::new(
                    x + x * x - 2.0 * x * y + x.powi(3) - 3.0 * x * y * y + x * x * y,
                    -y - 2.0 * x * y + y * y - 3.0 * x * x * y + y.powi(3) - x * y * y,
                ))
            }
            Self::Cylinder { material, a, b, p } => {
                let r = x.coords.norm();
                if r == 0.0 {
                    return Err(Error::SingularPoint { x: x.x, y: x.y });
                }
                let (e, nu) = (material.young, material.poisson);
                let c = b / a;
                let ur = p * (1.0 + nu) / (e * (c * c - 1.0)) * (r * (1.0 - 2.0 * nu) + b * b / r);
                Ok(x.coords * (ur / r))
            }
            Self::Westergaard { material, a, sigma, tau } => {
                let z = westergaard_z(x, side, a)?;
                let root = (z - a).sqrt() * (z + a).sqrt();
                let zz = z / root;
                let y = z.im;
                let mu = material.shear_modulus();
                let k = material.kolosov();
                let u1 = (k - 1.0) / 2.0 * root.re - y * zz.im;
                let v1 = (k + 1.0) / 2.0 * root.im - y * zz.re;
                let u2 = (k + 1.0) / 2.0 * root.im + y * zz.re;
                let v2 = -(k - 1.0) / 2.0 * root.re - y * zz.im;
                Ok(Vector2::new(sigma * u1 + tau * u2, sigma * v1 + tau * v2) / (2.0 * mu))
            }
        }
    }

    pub fn exact_stress(&self, x: &Point) -> Result<Stress> {
        self.exact_stress_side(x, 0)
    }

    pub fn exact_stress_side(&self, x: &Point, side: i8) -> Result<Stress> {
        match *self {
            Self::Square { material } => {
                let c = material.young / (1.0 + material.poisson);
                let (x, y) = (x.x, x.y);
                let sxx = 1.0 + 2.0 * x - 2.0 * y + 3.0 * x * x - 3.0 * y * y + 2.0 * x * y;
                let sxy = -x - y + 0.5 * x * x - 0.5 * y * y - 6.0 * x * y;
                Ok(Stress::new(c * sxx, -c * sxx, c * sxy))
            }
            Self::Cylinder { a, b, p, .. } => {
                let r2 = x.coords.norm_squared();
                if r2 == 0.0 {
                    return Err(Error::SingularPoint { x: x.x, y: x.y });
                }
                let c2 = (b / a).powi(2);
                let sr = p / (c2 - 1.0) * (1.0 - b * b / r2);
                let st = p / (c2 - 1.0) * (1.0 + b * b / r2);
                let (cs, sn) = (x.x / r2.sqrt(), x.y / r2.sqrt());
                Ok(Stress::new(sr * cs * cs + st * sn * sn, sr * sn * sn + st * cs * cs, (sr - st) * sn * cs))
            }
            Self::Westergaard { a, sigma, tau, .. } => {
                let z = westergaard_z(x, side, a)?;
                let t = (z - a).sqrt() * (z + a).sqrt();
                let zz = z / t;
                // Z' = -a² / t³
                let dz = -(a * a) / (t * t * t);
                let y = z.im;
                let mode1 = Stress::new(zz.re - y * dz.im, zz.re + y * dz.im, -y * dz.re);
                let mode2 = Stress::new(2.0 * zz.im + y * dz.re, -y * dz.re, zz.re - y * dz.im);
                Ok(mode1 * sigma + mode2 * tau)
            }
        }
    }

    pub fn body_force(&self, x: &Point) -> Vector2<f64> {
        match *self {
            Self::Square { material } => {
                let c = material.young / (1.0 + material.poisson);
                Vector2::new(-c * (1.0 + x.y), -c * (1.0 - x.x))
            }
            _ => Vector2::zeros(),
        }
    }

    /// `σ_exact · n`.
    pub fn boundary_traction(&self, x: &Point, n: &Vector2<f64>) -> Result<Vector2<f64>> {
        let s = self.exact_stress(x)?;
        Ok(Vector2::new(s.x * n.x + s.z * n.y, s.z * n.x + s.y * n.y))
    }

    /// Exact `(K_I, K_II)` for singular problems.
    pub fn exact_sif(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Westergaard { a, sigma, tau, .. } => Some((sigma * (PI * a).sqrt(), tau * (PI * a).sqrt())),
            _ => None,
        }
    }

    /// Exact displacements at every node; crack-face nodes take their own face's value.
    pub fn nodal_displacements(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        let sides = mesh.node_crack_sides();
        let mut u = Vec::with_capacity(2 * mesh.num_nodes());
        for (n, p) in mesh.nodes().iter().enumerate() {
            let d = self.exact_displacement_side(p, sides[n])?;
            u.extend([d.x, d.y]);
        }
        Ok(u)
    }
}

/// Complex coordinate for the Westergaard potentials. Points on the crack line take the
/// requested face through a signed infinitesimal imaginary part.
fn westergaard_z(x: &Point, side: i8, a: f64) -> Result<Complex64> {
    if (x.x.abs() - a).abs() < 1e-14 * a && x.y.abs() < 1e-14 * a {
        return Err(Error::SingularPoint { x: x.x, y: x.y });
    }
    let y = if x.y == 0.0 && side != 0 { f64::from(side) * 1e-300 } else { x.y };
    Ok(Complex64::new(x.x, y))
}

impl Loads for Problem {
    fn body_force(&self, x: &Point) -> Vector2<f64> {
        Problem::body_force(self, x)
    }

    fn traction(&self, tag: BoundaryTag, x: &Point, normal: &Vector2<f64>) -> Option<Vector2<f64>> {
        match tag {
            tags::TRACTION => self.boundary_traction(x, normal).ok(),
            tags::CRACK => Some(Vector2::zeros()),
            _ => None,
        }
    }

    fn displacement(&self, tag: BoundaryTag, x: &Point) -> [Option<f64>; 2] {
        match tag {
            tags::FIXED => match self.exact_displacement(x) {
                Ok(u) => [Some(u.x), Some(u.y)],
                Err(_) => [None, None],
            },
            tags::SYMMETRY_X => [Some(0.0), None],
            tags::SYMMETRY_Y => [None, Some(0.0)],
            _ => [None, None],
        }
    }

    fn pinned(&self, mesh: &Mesh) -> Vec<(usize, usize, f64)> {
        let Self::Westergaard { a, .. } = *self else { return Vec::new() };
        // both components at the lower right corner, u_x at the upper right corner
        let find = |p: Point| mesh.nodes().iter().position(|q| (q - p).norm() < 1e-9 * a);
        let mut out = Vec::new();
        for (corner, comps) in [(Point::new(2.0 * a, -a), &[0usize, 1][..]), (Point::new(2.0 * a, a), &[0][..])] {
            if let (Some(n), Ok(u)) = (find(corner), self.exact_displacement(&corner)) {
                for &c in comps {
                    out.push((n, c, u[c]));
                }
            }
        }
        out
    }
}
