//! Cross-module invariants: work balance, hanging-node exactness, support geometry,
//! sizing rules and end-to-end runs of the batch driver.

use mlscx::estimate::{analyze, new_sizes};
use mlscx::fem::{self, assemble, ElementType, Material};
use mlscx::fem::assembly::Loads;
use mlscx::mesh::generate;
use mlscx::mesh::support::{visibility_s, SamplePoints};
use mlscx::mesh::{BoundaryTag, Crack, Mesh};
use mlscx::problems::Problem;
use mlscx::recovery::{RecoveryOptions, Variant};
use mlscx::{Point, Vector2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FIXED: BoundaryTag = 2;
const LOADED: BoundaryTag = 1;

fn tag_left_fixed(_: Point, n: Vector2<f64>) -> Option<BoundaryTag> {
    Some(if n.x < -0.5 { FIXED } else { LOADED })
}

/// A rectangle with two levels of local refinement, so it carries hanging nodes.
fn graded(kind: ElementType) -> Mesh {
    let m = generate::rectangle(kind, [0.0, 0.0], [2.0, 1.0], 4, 2, tag_left_fixed).unwrap();
    let mut marks = vec![false; m.num_elements()];
    marks[0] = true;
    marks[m.num_elements() / 2] = true;
    let m = m.refine(&marks).unwrap();
    let mut marks = vec![false; m.num_elements()];
    marks[1] = true;
    let m = m.refine(&marks).unwrap();
    assert!(!m.constraints().is_empty(), "{kind}");
    m
}

struct Cantilever;
impl Loads for Cantilever {
    fn body_force(&self, x: &Point) -> Vector2<f64> {
        Vector2::new(0.3 * x.y, -1.0)
    }
    fn traction(&self, tag: BoundaryTag, x: &Point, _: &Vector2<f64>) -> Option<Vector2<f64>> {
        (tag == LOADED).then(|| Vector2::new(0.5, 2.0 + x.x))
    }
    fn displacement(&self, tag: BoundaryTag, _: &Point) -> [Option<f64>; 2] {
        if tag == FIXED {
            [Some(0.0), Some(0.0)]
        } else {
            [None, None]
        }
    }
}

#[test]
fn work_equals_twice_strain_energy() {
    let mat = Material::new(1000.0, 0.3).unwrap();
    for kind in ElementType::ALL {
        let m = graded(kind);
        let sys = assemble(&m, &mat, &Cantilever).unwrap();
        let (x, _) = fem::solver::solve(&sys.matrix, &sys.rhs).unwrap();
        let work: f64 = x.iter().zip(&sys.rhs).map(|(a, b)| a * b).sum();
        let energy = fem::solve(&m, &mat, &Cantilever).unwrap().strain_energy();
        assert!(work > 0.0);
        assert!((work - 2.0 * energy).abs() < 1e-10 * work, "{kind}: {work} vs {}", 2.0 * energy);
    }
}

/// Quadratic displacement field, loaded by the matching constant body force.
struct Quadratic(Material);
impl Quadratic {
    fn u(x: &Point) -> Vector2<f64> {
        let (a, b) = (x.x, x.y);
        Vector2::new(a * a + 0.5 * a * b - 0.3 * b * b, 0.2 * a * a - a * b + 0.4 * b * b) * 1e-3
    }
    fn stress(&self, x: &Point) -> mlscx::Stress {
        let eps = mlscx::Vector3::new(2.0 * x.x + 0.5 * x.y, -x.x + 0.8 * x.y, 0.9 * x.x - 1.6 * x.y) * 1e-3;
        self.0.stiffness() * eps
    }
}
impl Loads for Quadratic {
    fn body_force(&self, _: &Point) -> Vector2<f64> {
        let d = self.0.stiffness();
        let dx = d * mlscx::Vector3::new(2.0, -1.0, 0.9) * 1e-3;
        let dy = d * mlscx::Vector3::new(0.5, 0.8, -1.6) * 1e-3;
        -Vector2::new(dx.x + dy.z, dx.z + dy.y)
    }
    fn traction(&self, _: BoundaryTag, _: &Point, _: &Vector2<f64>) -> Option<Vector2<f64>> {
        None
    }
    fn displacement(&self, _: BoundaryTag, x: &Point) -> [Option<f64>; 2] {
        let u = Self::u(x);
        [Some(u.x), Some(u.y)]
    }
}

#[test]
fn quadratic_elements_exact_across_hanging_nodes() {
    let mat = Material::new(1000.0, 0.3).unwrap();
    let load = Quadratic(mat);
    for kind in [ElementType::Tri6, ElementType::Quad8] {
        let m = graded(kind);
        let sol = fem::solve(&m, &mat, &load).unwrap();
        for n in 0..m.num_nodes() {
            let err = (sol.node_displacement(n) - Quadratic::u(&m.node(n))).norm();
            assert!(err < 1e-12, "{kind} node {n}: {err}");
        }
        for (e, x) in (0..m.num_elements()).map(|e| (e, m.centroid(e))) {
            let s = sol.fe_stress(&x).unwrap();
            let exact = load.stress(&x);
            assert!((s - exact).norm() < 1e-9 * exact.norm(), "{kind} element {e}");
        }
    }
}

#[test]
fn uniform_refinement_reduces_exact_error() {
    let p = Problem::square();
    let opts = RecoveryOptions { variant: Variant::Mls, ..Default::default() };
    for kind in ElementType::ALL {
        let mut m = p.initial_mesh(kind, 4).unwrap();
        let mut last = f64::INFINITY;
        for step in 0..3 {
            let e = analyze(&m, &p, opts, 0.9, step).unwrap().report.exact_global;
            assert!(e < last, "{kind} step {step}: {e} after {last}");
            last = e;
            m = m.refine_uniform().unwrap();
        }
    }
}

fn centroid_samples(m: &Mesh) -> SamplePoints {
    let pts: Vec<Point> = (0..m.num_elements()).map(|e| m.centroid(e)).collect();
    let w = (0..m.num_elements()).map(|e| m.area(e)).collect();
    SamplePoints::new(pts, w)
}

fn support_points(m: &Mesh, x: &Point) -> (Vec<[u64; 2]>, Vec<[u64; 2]>) {
    let s = centroid_samples(m);
    let g = m.collect_support(&s, x, 0.7, Vector2::zeros(), 1, |_| true).unwrap();
    let key = |p: &Point| [p.x.to_bits(), p.y.to_bits()];
    let mut inner: Vec<_> = g.samples.iter().map(|(i, _)| key(&s.points[*i])).collect();
    let mut near: Vec<_> = g.nearest.iter().map(|(np, _)| key(&np.point)).collect();
    inner.sort();
    near.sort();
    (inner, near)
}

#[test]
fn support_ignores_element_order() {
    let p = Problem::westergaard(100.0, 0.0);
    let m = p.initial_mesh(ElementType::Quad4, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let mut els = m.elements().to_vec();
        els.shuffle(&mut rng);
        let shuffled = Mesh::new(m.nodes().to_vec(), els, m.crack().cloned()).unwrap();
        for x in [Point::new(0.9, 0.05), Point::new(0.3, -0.2), Point::new(1.8, 0.9)] {
            let (a, b) = (support_points(&m, &x), support_points(&shuffled, &x));
            assert!(!a.0.is_empty());
            assert_eq!(a, b, "at {x}");
        }
    }
}

#[test]
fn visibility_without_crack_is_plain_distance() {
    let crack = Crack::new(vec![Point::new(-1.0, 0.0), Point::new(0.0, 0.0)]).unwrap();
    let (x, chi) = (Point::new(-0.5, 0.3), Point::new(-0.4, -0.2));
    let plain = visibility_s(&x, &chi, None, 2.0, Vector2::zeros());
    assert_eq!(plain.s, (x - chi).norm() / 2.0);
    let routed = visibility_s(&x, &chi, Some(&crack), 2.0, Vector2::zeros());
    assert!(routed.s > plain.s);
    let same_side = visibility_s(&x, &Point::new(-0.2, 0.1), Some(&crack), 2.0, Vector2::zeros());
    assert_eq!(same_side.s, (x - Point::new(-0.2, 0.1)).norm() / 2.0);
}

#[test]
fn sizing_marks_only_the_erroneous_element() {
    let sizes = vec![0.5; 10];
    let mut est = vec![0.0; 10];
    est[3] = 1.0;
    let u = new_sizes(&est, 0.5, &sizes, 1);
    assert!(!u.converged);
    assert_eq!(u.marks.iter().filter(|&&m| m).count(), 1);
    assert!(u.marks[3]);
    let done = new_sizes(&est, 1.0, &sizes, 1);
    assert!(done.converged && done.marks.iter().all(|&m| !m));
}

#[cfg(feature = "cli")]
mod driver {
    use mlscx::cli::{run_case, vtk, RunConfig, Termination, CSV_HEADER};
    use mlscx::estimate::Refinement;
    use mlscx::fem::ElementType;
    use mlscx::problems::ProblemId;

    fn rows(dir: &std::path::Path) -> Vec<Vec<String>> {
        let text = std::fs::read_to_string(dir.join("results.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        lines.filter(|l| !l.starts_with('#')).map(|l| l.split(',').map(str::to_string).collect()).collect()
    }

    #[test]
    fn uniform_run_writes_all_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(ProblemId::Square, ElementType::Quad8, Refinement::Uniform, 3);
        cfg.output_dir = dir.path().join("a");
        let out = run_case(&cfg).unwrap();
        assert_eq!(out.termination, Termination::Completed);
        let r = rows(&cfg.output_dir);
        assert_eq!(r.len(), 3);
        for (i, row) in r.iter().enumerate() {
            assert_eq!(row.len(), 9);
            assert_eq!(row[0], i.to_string());
            let theta: f64 = row[4].parse().unwrap();
            assert!(theta.is_finite() && theta > 0.0);
            assert!(row[7].is_empty() && row[8].is_empty());
            let grid = vtk::Grid::parse(&std::fs::read_to_string(cfg.output_dir.join(format!("mesh_{i}.vtk"))).unwrap()).unwrap();
            for name in ["sigma_h", "sigma_star", "sigma_exact", "D"] {
                assert!(grid.cell_data.contains_key(name), "{name}");
            }
        }
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(cfg.output_dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config_hash"], cfg.hash());
        assert_eq!(manifest["converged"], false);

        cfg.output_dir = dir.path().join("b");
        run_case(&cfg).unwrap();
        let read = |d: &str| std::fs::read(dir.path().join(d).join("results.csv")).unwrap();
        assert_eq!(read("a"), read("b"));
    }

    #[test]
    fn adaptive_crack_run_converges_to_target() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(ProblemId::Westergaard, ElementType::Quad4, Refinement::Adaptive, 4);
        cfg.output_dir = dir.path().join("steps");
        run_case(&cfg).unwrap();
        let est: Vec<f64> = rows(&cfg.output_dir).iter().map(|r| r[3].parse().unwrap()).collect();
        assert_eq!(est.len(), 4);
        assert!(est.windows(2).all(|w| w[1] < w[0]), "{est:?}");
        assert!(rows(&cfg.output_dir).iter().all(|r| !r[7].is_empty() && !r[8].is_empty()));

        cfg.steps = None;
        cfg.target_error = Some(est[1]);
        cfg.max_steps = 8;
        cfg.output_dir = dir.path().join("target");
        let out = run_case(&cfg).unwrap();
        assert!(out.converged, "{:?}", out.termination);
        let Termination::Converged { step } = out.termination else { unreachable!() };
        assert!(step < 8);
        let last = out.steps.last().unwrap();
        assert!(last.est_err <= est[1]);
        assert!(out.steps[..out.steps.len() - 1].iter().all(|s| s.est_err > est[1]));
    }

    #[test]
    fn failed_step_keeps_partial_results() {
        let dir = tempfile::tempdir().unwrap();
        // every side loaded by tractions: the stiffness matrix is singular
        let m = mlscx::mesh::generate::rectangle(ElementType::Quad4, [-1.0, -1.0], [1.0, 1.0], 4, 4, |_, _| Some(1)).unwrap();
        let mesh_file = dir.path().join("free.mesh");
        mlscx::mesh::io::write(&m, &mesh_file).unwrap();
        let mut cfg = RunConfig::new(ProblemId::Square, ElementType::Quad4, Refinement::Uniform, 2);
        cfg.mesh_file = Some(mesh_file);
        cfg.output_dir = dir.path().join("out");
        let out = run_case(&cfg).unwrap();
        assert!(matches!(out.termination, Termination::Failed { step: 0, .. }));
        let text = std::fs::read_to_string(cfg.output_dir.join("results.csv")).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.lines().any(|l| l.starts_with("# step 0 failed")), "{text}");
        assert!(cfg.output_dir.join("manifest.json").exists());
    }
}
