//! Energy-norm errors, effectivity indices and element sizes for the next mesh.

use serde::{Deserialize, Serialize};

use crate::fem::quadrature::{rule, Purpose, Rule};
use crate::fem::{self, Material, Solution};
use crate::fracture::Sif;
use crate::mesh::Mesh;
use crate::problems::Problem;
use crate::recovery::{recover_field, RecoveryOptions, RecoveryStats};
use crate::{par, Result, Stress};

/// `∫ (a − b)ᵀ D⁻¹ (a − b) dΩ` over element `e` with `rule`, given both fields at its
/// points.
pub fn element_error(mesh: &Mesh, material: &Material, e: usize, rule: &Rule, a: &[Stress], b: &[Stress]) -> f64 {
    rule.iter()
        .zip(a.iter().zip(b))
        .map(|((xi, w), (sa, sb))| w * mesh.geometry(e, xi).det_j * material.energy_density(&(sa - sb)))
        .sum()
}

/// Squared element errors between two fields sampled at the error-integration points.
pub fn element_errors(mesh: &Mesh, material: &Material, a: &[Vec<Stress>], b: &[Vec<Stress>]) -> Vec<f64> {
    par::map_range(mesh.num_elements(), |e| {
        let r = rule(mesh.element(e).kind, Purpose::ErrorIntegration);
        element_error(mesh, material, e, &r, &a[e], &b[e])
    })
}

/// FE stresses at the error-integration points.
pub fn fe_stresses(solution: &Solution) -> Vec<Vec<Stress>> {
    let mesh = solution.mesh();
    par::map_range(mesh.num_elements(), |e| {
        rule(mesh.element(e).kind, Purpose::ErrorIntegration).points.iter().map(|&xi| solution.stress_at(e, xi)).collect()
    })
}

/// Exact stresses at the error-integration points.
pub fn exact_stresses(mesh: &Mesh, problem: &Problem) -> Result<Vec<Vec<Stress>>> {
    par::map_range(mesh.num_elements(), |e| {
        rule(mesh.element(e).kind, Purpose::ErrorIntegration)
            .points
            .iter()
            .map(|&xi| problem.exact_stress(&mesh.map_point(e, xi)))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect()
}

/// Local effectivity `D`: `θ − 1` above one, `1 − 1/θ` below.
pub fn local_effectivity(theta: f64) -> f64 {
    if theta >= 1.0 {
        theta - 1.0
    } else {
        1.0 - 1.0 / theta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub step: usize,
    pub dof: usize,
    /// Estimated element errors `‖e_es‖ᵉ`.
    pub estimated: Vec<f64>,
    /// Exact element errors `‖e‖ᵉ`.
    pub exact: Vec<f64>,
    /// `D` per element; `None` where the exact error vanishes.
    pub local: Vec<Option<f64>>,
    pub estimated_global: f64,
    pub exact_global: f64,
    pub theta: f64,
    pub mean_abs_d: f64,
    pub sigma_d: f64,
    /// Elements left out of the `D` statistics.
    pub excluded: usize,
}

impl ErrorReport {
    /// Builds the report from squared element errors.
    pub fn new(step: usize, dof: usize, estimated_sq: &[f64], exact_sq: &[f64]) -> Self {
        assert_eq!(estimated_sq.len(), exact_sq.len());
        let estimated: Vec<f64> = estimated_sq.iter().map(|v| v.max(0.0).sqrt()).collect();
        let exact: Vec<f64> = exact_sq.iter().map(|v| v.max(0.0).sqrt()).collect();
        let local: Vec<Option<f64>> =
            estimated.iter().zip(&exact).map(|(&es, &ex)| (ex > 0.0).then(|| local_effectivity(es / ex))).collect();
        let used: Vec<f64> = local.iter().flatten().copied().collect();
        let n = used.len() as f64;
        let (mean_abs_d, sigma_d) = if used.is_empty() {
            (0.0, 0.0)
        } else {
            let mean = used.iter().sum::<f64>() / n;
            let var = used.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
            (used.iter().map(|d| d.abs()).sum::<f64>() / n, var.sqrt())
        };
        let estimated_global = estimated_sq.iter().sum::<f64>().sqrt();
        let exact_global = exact_sq.iter().sum::<f64>().sqrt();
        Self {
            step,
            dof,
            estimated,
            exact,
            excluded: local.len() - used.len(),
            local,
            estimated_global,
            exact_global,
            theta: estimated_global / exact_global,
            mean_abs_d,
            sigma_d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeUpdate {
    pub converged: bool,
    pub sizes: Vec<f64>,
    /// Elements to split.
    pub marks: Vec<bool>,
}

/// Target element sizes that equidistribute the error at the prescribed global error.
/// `order` is the convergence exponent.
pub fn new_sizes(estimated: &[f64], target: f64, sizes: &[f64], order: usize) -> SizeUpdate {
    assert!(target > 0.0, "target error must be positive");
    assert_eq!(estimated.len(), sizes.len());
    let global = estimated.iter().map(|e| e * e).sum::<f64>().sqrt();
    if global <= target {
        return SizeUpdate { converged: true, sizes: sizes.to_vec(), marks: vec![false; sizes.len()] };
    }
    let p = order as f64;
    let size_for = |per_element: f64| -> Vec<f64> {
        estimated
            .iter()
            .zip(sizes)
            .map(|(&e, &h)| if e > 0.0 { h * (per_element / e).powf(1.0 / p) } else { h })
            .collect()
    };
    let first = size_for(target / (sizes.len() as f64).sqrt());
    let predicted: f64 = first.iter().zip(sizes).map(|(hn, h)| (h / hn).powi(2)).sum();
    let new = size_for(target / predicted.sqrt());
    let marks = new.iter().zip(sizes).map(|(hn, h)| *hn < h / std::f64::consts::SQRT_2).collect();
    SizeUpdate { converged: false, sizes: new, marks }
}

/// One solve, recover and estimate pass on a mesh.
#[derive(Debug, Clone)]
pub struct StepAnalysis {
    pub report: ErrorReport,
    pub sif: Option<Sif>,
    pub stats: RecoveryStats,
    pub displacements: Vec<f64>,
    /// Fields at the error-integration points.
    pub fe: Vec<Vec<Stress>>,
    pub recovered: Vec<Vec<Stress>>,
    pub exact: Vec<Vec<Stress>>,
}

pub fn analyze(mesh: &Mesh, problem: &Problem, options: RecoveryOptions, rq: f64, step: usize) -> Result<StepAnalysis> {
    let material = problem.material();
    let solution = fem::solve(mesh, &material, problem)?;
    let field = recover_field(&solution, problem, options, rq)?;
    let fe = fe_stresses(&solution);
    let exact = exact_stresses(mesh, problem)?;
    let est = element_errors(mesh, &material, &field.values, &fe);
    let ex = element_errors(mesh, &material, &exact, &fe);
    Ok(StepAnalysis {
        report: ErrorReport::new(step, solution.num_equations, &est, &ex),
        sif: field.sif,
        stats: field.stats,
        displacements: solution.displacements().to_vec(),
        fe,
        recovered: field.values,
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Refinement {
    Uniform,
    Adaptive,
}

/// Next mesh of a sequence. Adaptive steps aim at the global error `target`; at least
/// the element with the largest estimated error is split.
pub fn refine_step(mesh: &Mesh, report: &ErrorReport, refinement: Refinement, target: f64) -> Result<Mesh> {
    match refinement {
        Refinement::Uniform => mesh.refine_uniform(),
        Refinement::Adaptive => {
            let sizes: Vec<f64> = (0..mesh.num_elements()).map(|e| mesh.element_size(e)).collect();
            let mut marks = new_sizes(&report.estimated, target, &sizes, mesh.order()).marks;
            if !marks.iter().any(|&m| m) {
                let worst = (0..marks.len()).max_by(|&a, &b| report.estimated[a].total_cmp(&report.estimated[b]));
                if let Some(w) = worst {
                    marks[w] = true;
                }
            }
            mesh.refine(&marks)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{quadrature, ElementType};
    use crate::mesh::generate;
    use crate::recovery::{Recovery, RecoveryOptions};

    #[test]
    fn constant_difference_closed_form() {
        let mesh = generate::rectangle(ElementType::Quad8, [0.0, 0.0], [2.0, 1.5], 1, 1, |_, _| None).unwrap();
        let mat = Material::new(200.0, 0.25).unwrap();
        let r = rule(ElementType::Quad8, Purpose::ErrorIntegration);
        let d = Stress::new(1.0, -2.0, 0.5);
        let a = vec![d; r.len()];
        let z = vec![Stress::zeros(); r.len()];
        let v = element_error(&mesh, &mat, 0, &r, &a, &z);
        let want = mat.energy_density(&d) * 3.0;
        assert!((v - want).abs() <= 1e-12 * want);
        let a2: Vec<Stress> = a.iter().map(|s| s * 2.0).collect();
        assert!((element_error(&mesh, &mat, 0, &r, &a2, &z) - 4.0 * v).abs() <= 1e-12 * v);
        assert_eq!(element_error(&mesh, &mat, 0, &r, &a, &a), 0.0);
    }

    #[test]
    fn local_effectivity_values() {
        assert_eq!(local_effectivity(1.0), 0.0);
        assert_eq!(local_effectivity(2.0), 1.0);
        assert_eq!(local_effectivity(0.5), -1.0);
        let mut prev = f64::NEG_INFINITY;
        for i in 1..200 {
            let t = i as f64 * 0.05;
            assert!((local_effectivity(t) + local_effectivity(1.0 / t)).abs() < 1e-12);
            assert!(local_effectivity(t) > prev);
            prev = local_effectivity(t);
        }
    }

    #[test]
    fn report_statistics() {
        let r = ErrorReport::new(0, 10, &[1.0, 4.0, 0.25], &[1.0, 1.0, 1.0]);
        assert_eq!(r.local, vec![Some(0.0), Some(1.0), Some(-1.0)]);
        assert!((r.mean_abs_d - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.sigma_d - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((r.theta - (5.25f64 / 3.0).sqrt()).abs() < 1e-15);
        let e = ErrorReport::new(0, 10, &[0.3, 0.2], &[0.3, 0.2]);
        assert_eq!((e.theta, e.mean_abs_d, e.sigma_d), (1.0, 0.0, 0.0));
        let f = ErrorReport::new(0, 10, &[0.3, 0.2], &[0.3, 0.0]);
        assert_eq!(f.excluded, 1);
        assert_eq!(f.local[1], None);
    }

    #[test]
    fn sizes_equidistribute() {
        let h = vec![0.5; 4];
        // every element exactly at its share of the target
        let u = new_sizes(&[0.5; 4], 0.99, &h, 1);
        assert!(!u.converged);
        assert!(u.marks.iter().all(|m| !m));
        let u = new_sizes(&[0.0, 2.0, 0.0, 0.0], 1.0, &h, 2);
        assert_eq!(u.marks, vec![false, true, false, false]);
        assert_eq!(u.sizes[0], 0.5);
        let u = new_sizes(&[0.1, 0.1], 1.0, &[1.0, 1.0], 1);
        assert!(u.converged && u.marks.iter().all(|m| !m));
    }

    #[test]
    fn error_quadrature_converged() {
        let p = Problem::square();
        let mesh = p.initial_mesh(ElementType::Quad4, 4).unwrap();
        let sol = crate::fem::solve(&mesh, &p.material(), &p).unwrap();
        let rec = Recovery::from_solution(&sol, &p, RecoveryOptions::default(), None);
        let total = |refined: bool| -> f64 {
            (0..mesh.num_elements())
                .map(|e| {
                    let kind = mesh.element(e).kind;
                    let r = if refined { quadrature::refined_error_rule(kind) } else { rule(kind, Purpose::ErrorIntegration) };
                    let a: Vec<Stress> = r.points.iter().map(|&xi| rec.at(e, xi).unwrap().stress).collect();
                    let b: Vec<Stress> = r.points.iter().map(|&xi| sol.stress_at(e, xi)).collect();
                    element_error(&mesh, &p.material(), e, &r, &a, &b)
                })
                .sum::<f64>()
                .sqrt()
        };
        let (base, fine) = (total(false), total(true));
        assert!((base - fine).abs() < 1e-3 * fine, "{base} {fine}");
    }
}
