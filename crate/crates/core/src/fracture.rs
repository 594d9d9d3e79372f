//! Crack-tip asymptotic fields, stress intensity factor extraction with the
//! interaction integral, and the singular/smooth stress split used by the recovery.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

use crate::fem::quadrature::{rule, Purpose};
use crate::fem::{Material, Solution};
use crate::mesh::{BoundaryTag, Crack, NearestPoint};
use crate::problems::KnownTraction;
use crate::recovery::BoundaryData;
use crate::{par, Error, Point, Result, Stress};

/// Polar frame at a crack tip; `φ = 0` along the crack prolongation, `±π` on the faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackFrame {
    pub tip: Point,
    /// Angle of the crack prolongation from the x axis.
    pub angle: f64,
}

impl CrackFrame {
    pub fn new(tip: Point, angle: f64) -> Self {
        Self { tip, angle }
    }

    pub fn from_crack(crack: &Crack) -> Self {
        Self::new(crack.tip(), crack.direction())
    }

    /// Rotation taking global components to crack components.
    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.angle.sin_cos();
        Matrix2::new(c, s, -s, c)
    }

    /// Crack-frame Cartesian coordinates.
    pub fn local(&self, x: &Point) -> Vector2<f64> {
        self.rotation() * (x - self.tip)
    }

    /// `(r, φ)`.
    pub fn polar(&self, x: &Point) -> (f64, f64) {
        let l = self.local(x);
        (l.norm(), l.y.atan2(l.x))
    }

    fn stress_to_global(&self, s: &Stress) -> Stress {
        let q = self.rotation();
        let m = q.transpose() * Matrix2::new(s.x, s.z, s.z, s.y) * q;
        Stress::new(m[(0, 0)], m[(1, 1)], m[(0, 1)])
    }

    fn stress_to_local(&self, s: &Stress) -> Stress {
        let q = self.rotation();
        let m = q * Matrix2::new(s.x, s.z, s.z, s.y) * q.transpose();
        Stress::new(m[(0, 0)], m[(1, 1)], m[(0, 1)])
    }
}

/// First-term crack-tip displacement in the crack frame.
pub fn asymptotic_displacement(k1: f64, k2: f64, r: f64, phi: f64, material: &Material) -> Vector2<f64> {
    asymptotic_displacement_derivatives(k1, k2, r, phi, material).0
}

/// Displacement and its derivatives `∂u/∂r`, `∂u/∂φ` (crack frame).
fn asymptotic_displacement_derivatives(
    k1: f64,
    k2: f64,
    r: f64,
    phi: f64,
    material: &Material,
) -> (Vector2<f64>, Vector2<f64>, Vector2<f64>) {
    let kappa = material.kolosov();
    let c = 1.0 / (2.0 * material.shear_modulus() * (2.0 * PI).sqrt());
    let (sh, ch) = (phi / 2.0).sin_cos();
    let (sp, cp) = phi.sin_cos();
    let f = Vector2::new(
        k1 * ch * (kappa - cp) + k2 * sh * (2.0 + kappa + cp),
        k1 * sh * (kappa - cp) + k2 * ch * (2.0 - kappa - cp),
    ) * c;
    let df = Vector2::new(
        k1 * (-0.5 * sh * (kappa - cp) + ch * sp) + k2 * (0.5 * ch * (2.0 + kappa + cp) - sh * sp),
        k1 * (0.5 * ch * (kappa - cp) + sh * sp) + k2 * (-0.5 * sh * (2.0 - kappa - cp) + ch * sp),
    ) * c;
    let sr = r.sqrt();
    let dr = if r > 0.0 { f / (2.0 * sr) } else { Vector2::zeros() };
    (f * sr, dr, df * sr)
}

/// First-term crack-tip stress in the crack frame.
pub fn asymptotic_stress(k1: f64, k2: f64, r: f64, phi: f64) -> Result<Stress> {
    if !(r > 0.0) {
        return Err(Error::SingularPoint { x: r, y: phi });
    }
    let a = 1.0 / (2.0 * PI * r).sqrt();
    let (sh, ch) = (phi / 2.0).sin_cos();
    let (s3, c3) = (1.5 * phi).sin_cos();
    Ok(Stress::new(
        k1 * ch * (1.0 - sh * s3) - k2 * sh * (2.0 + ch * c3),
        k1 * ch * (1.0 + sh * s3) + k2 * sh * ch * c3,
        k1 * sh * ch * c3 + k2 * ch * (1.0 - sh * s3),
    ) * a)
}

/// Stress intensity factors with the extraction radius used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sif {
    pub k1: f64,
    pub k2: f64,
    pub rq: f64,
}

/// Asymptotic field of given intensities at a crack tip, in global components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularField {
    pub frame: CrackFrame,
    pub k1: f64,
    pub k2: f64,
}

impl SingularField {
    pub fn stress(&self, x: &Point) -> Result<Stress> {
        let (r, phi) = self.frame.polar(x);
        asymptotic_stress(self.k1, self.k2, r, phi)
            .map(|s| self.frame.stress_to_global(&s))
            .map_err(|_| Error::SingularPoint { x: x.x, y: x.y })
    }

    /// Stress with the crack face chosen by `side` for points on the crack line.
    pub fn stress_side(&self, x: &Point, side: i8) -> Result<Stress> {
        let (r, mut phi) = self.frame.polar(x);
        if side != 0 && (phi.abs() - PI).abs() < 1e-12 {
            phi = f64::from(side) * PI;
        }
        asymptotic_stress(self.k1, self.k2, r, phi)
            .map(|s| self.frame.stress_to_global(&s))
            .map_err(|_| Error::SingularPoint { x: x.x, y: x.y })
    }

    pub fn displacement(&self, x: &Point, material: &Material) -> Vector2<f64> {
        let (r, phi) = self.frame.polar(x);
        self.frame.rotation().transpose() * asymptotic_displacement(self.k1, self.k2, r, phi, material)
    }

    /// Displacement with the crack face chosen by `side` (+1 upper, -1 lower) for points
    /// on the crack line behind the tip.
    pub fn displacement_side(&self, x: &Point, side: i8, material: &Material) -> Vector2<f64> {
        let (r, mut phi) = self.frame.polar(x);
        if side != 0 && (phi.abs() - PI).abs() < 1e-12 {
            phi = f64::from(side) * PI;
        }
        self.frame.rotation().transpose() * asymptotic_displacement(self.k1, self.k2, r, phi, material)
    }
}

/// Plateau cutoff: 1 for `r ≤ rq/2`, linear to 0 at `rq`. Returns `(q, dq/dr)`.
pub fn plateau(r: f64, rq: f64) -> (f64, f64) {
    let inner = 0.5 * rq;
    if r <= inner {
        (1.0, 0.0)
    } else if r >= rq {
        (0.0, 0.0)
    } else {
        ((rq - r) / (rq - inner), -1.0 / (rq - inner))
    }
}

/// `(K_I, K_II)` from the equivalent domain form of the interaction integral.
pub fn extract_sif(solution: &Solution, frame: &CrackFrame, rq: f64) -> Result<Sif> {
    let mesh = solution.mesh();
    let material = solution.material();
    let q_rot = frame.rotation();
    let compliance = material.compliance();
    let e_prime = material.effective_modulus();
    let parts: Vec<Option<[f64; 2]>> = par::map_range(mesh.num_elements(), |e| {
        let r = rule(mesh.element(e).kind, Purpose::ErrorIntegration);
        let mut acc = [0.0; 2];
        let mut touched = false;
        for (xi, w) in r.iter() {
            let g = mesh.geometry(e, xi);
            let l = frame.local(&g.x);
            let rad = l.norm();
            let (_, dq) = plateau(rad, rq);
            if dq == 0.0 {
                continue;
            }
            touched = true;
            let grad_q = l * (dq / rad);
            let sig = frame.stress_to_local(&solution.stress_at(e, xi));
            let grad_u = q_rot * solution.gradient_at(e, xi) * q_rot.transpose();
            let phi = l.y.atan2(l.x);
            let (sp, cp) = phi.sin_cos();
            for (mode, out) in acc.iter_mut().enumerate() {
                let (k1, k2) = if mode == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
                let sa = asymptotic_stress(k1, k2, rad, phi)?;
                let (_, ur, uphi) = asymptotic_displacement_derivatives(k1, k2, rad, phi, material);
                // ∂/∂x₁ = cos φ ∂/∂r − sin φ / r ∂/∂φ
                let dua = ur * cp - uphi * (sp / rad);
                let ea = compliance * sa;
                let w12 = sig.x * ea.x + sig.y * ea.y + sig.z * ea.z;
                let s = Matrix2::new(sig.x, sig.z, sig.z, sig.y);
                let s_aux = Matrix2::new(sa.x, sa.z, sa.z, sa.y);
                let du = grad_u.column(0);
                let mut integrand = 0.0;
                for j in 0..2 {
                    let mut t = 0.0;
                    for i in 0..2 {
                        t += s[(i, j)] * dua[i] + s_aux[(i, j)] * du[i];
                    }
                    if j == 0 {
                        t -= w12;
                    }
                    integrand += t * grad_q[j];
                }
                *out += integrand * w * g.det_j;
            }
        }
        Ok::<_, Error>(touched.then_some(acc))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut total = [0.0; 2];
    let mut any = false;
    for p in parts.into_iter().flatten() {
        any = true;
        total[0] += p[0];
        total[1] += p[1];
    }
    if !any {
        return Err(Error::EmptyExtractionDomain { radius: rq });
    }
    Ok(Sif { k1: 0.5 * e_prime * total[0], k2: 0.5 * e_prime * total[1], rq })
}

/// Boundary data of the smooth part: tractions minus the singular field's traction.
pub struct SmoothPart<'a> {
    pub inner: &'a dyn BoundaryData,
    pub singular: SingularField,
}

impl BoundaryData for SmoothPart<'_> {
    fn body_force(&self, x: &Point) -> Vector2<f64> {
        self.inner.body_force(x)
    }

    fn known(&self, tag: BoundaryTag) -> KnownTraction {
        self.inner.known(tag)
    }

    fn traction(&self, at: &NearestPoint) -> Vector2<f64> {
        let n = at.normal;
        // the probe is off the crack line at side ends; on a face, an outward normal
        // pointing down the local y axis marks the upper face
        let probe_y = self.singular.frame.local(&at.probe).y;
        let side = if probe_y.abs() > 1e-14 * (1.0 + at.probe.coords.norm()) {
            if probe_y > 0.0 { 1 } else { -1 }
        } else if (self.singular.frame.rotation() * n).y < 0.0 {
            1
        } else {
            -1
        };
        let s = self.singular.stress_side(&at.point, side).unwrap_or_else(|_| Stress::zeros());
        self.inner.traction(at) - Vector2::new(s.x * n.x + s.z * n.y, s.z * n.x + s.y * n.y)
    }
}
