use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Stress};

/// Isotropic material under plane strain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
}

impl Material {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !(0.0..0.5).contains(&poisson) {
            return Err(Error::InvalidInput(format!("material E={young}, nu={poisson} out of range")));
        }
        Ok(Self { young, poisson })
    }

    pub fn shear_modulus(&self) -> f64 {
        self.young / (2.0 * (1.0 + self.poisson))
    }

    /// Kolosov constant for plane strain.
    pub fn kolosov(&self) -> f64 {
        3.0 - 4.0 * self.poisson
    }

    /// E' used to convert energy release rates to stress intensity factors.
    pub fn effective_modulus(&self) -> f64 {
        self.young / (1.0 - self.poisson * self.poisson)
    }

    /// Constitutive matrix `D` with `σ = D ε`, engineering shear strain.
    pub fn stiffness(&self) -> Matrix3<f64> {
        let (e, nu) = (self.young, self.poisson);
        let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
        Matrix3::new(
            c * (1.0 - nu),
            c * nu,
            0.0,
            c * nu,
            c * (1.0 - nu),
            0.0,
            0.0,
            0.0,
            c * (1.0 - 2.0 * nu) / 2.0,
        )
    }

    /// `D⁻¹`, in closed form.
    pub fn compliance(&self) -> Matrix3<f64> {
        let (e, nu) = (self.young, self.poisson);
        let a = (1.0 + nu) / e;
        Matrix3::new(a * (1.0 - nu), -a * nu, 0.0, -a * nu, a * (1.0 - nu), 0.0, 0.0, 0.0, 2.0 * a)
    }

    /// `σᵀ D⁻¹ σ`.
    pub fn energy_density(&self, s: &Stress) -> f64 {
        (s.transpose() * self.compliance() * s)[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compliance_inverts_stiffness() {
        let m = Material::new(1000.0, 0.3).unwrap();
        let prod = m.stiffness() * m.compliance();
        assert!((prod - Matrix3::identity()).norm() < 1e-13);
        assert_eq!(m.stiffness(), m.stiffness().transpose());
        assert!(m.stiffness().cholesky().is_some());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Material::new(-1.0, 0.3).is_err());
        assert!(Material::new(1.0, 0.5).is_err());
        assert!(Material::new(1.0, -0.1).is_err());
    }
}
