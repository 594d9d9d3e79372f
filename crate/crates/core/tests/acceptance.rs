//! Benchmark acceptance suite. Prints one PASS/FAIL line per criterion; the test fails
//! when the set of failing criteria differs from `KNOWN_FAILURES`.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see the report.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use mlscx::cli::{run_case, Loading, Outcome, RunConfig, StepRecord, Termination};
use mlscx::estimate::Refinement;
use mlscx::fem::{self, ElementType, Material, Solution};
use mlscx::fracture::{asymptotic_stress, extract_sif, CrackFrame, SingularField};
use mlscx::mesh::{generate, BoundaryTag, Mesh, NearestPoint};
use mlscx::problems::{KnownTraction, Problem, ProblemId};
use mlscx::recovery::{stiffness_samples, BoundaryData, Recovery, RecoveryOptions, Variant};
use mlscx::{Point, Stress, Vector2};
use sha2::{Digest, Sha256};

/// Criteria that fail with the current implementation; see the README for the analysis.
const KNOWN_FAILURES: &[usize] = &[1, 2];

const K_EXACT: f64 = 177.245_385_090_551_6;

struct Report {
    failed: BTreeSet<usize>,
}

impl Report {
    fn criterion(&mut self, n: usize, checks: &[(bool, String)]) {
        let ok = checks.iter().all(|c| c.0);
        println!("criterion {n}: {}", if ok { "PASS" } else { "FAIL" });
        for (pass, what) in checks {
            println!("    [{}] {what}", if *pass { "ok" } else { "FAIL" });
        }
        if !ok {
            self.failed.insert(n);
        }
    }
}

fn run(config: RunConfig, dir: &Path, name: &str) -> Outcome {
    let mut c = config;
    c.output_dir = dir.join(name);
    let o = run_case(&c).expect("run completes");
    assert!(!matches!(o.termination, Termination::Failed { .. }), "{name}: {:?}", o.termination);
    o
}

/// Number of consecutive increases, and the largest relative one.
fn inversions(values: &[f64]) -> (usize, f64) {
    values.windows(2).filter(|w| w[1] > w[0]).fold((0, 0.0), |(n, worst), w| (n + 1, f64::max(worst, w[1] / w[0] - 1.0)))
}

fn theta_dev(s: &StepRecord) -> f64 {
    (s.theta - 1.0).abs()
}

fn fmt_list(values: impl IntoIterator<Item = f64>, digits: usize) -> String {
    values.into_iter().map(|v| format!("{v:.digits$}")).collect::<Vec<_>>().join(", ")
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn square_uniform(report: &mut Report, dir: &Path) {
    let start = Instant::now();
    let runs: Vec<(ElementType, Outcome)> = ElementType::ALL
        .into_iter()
        .map(|kind| (kind, run(RunConfig::new(ProblemId::Square, kind, Refinement::Uniform, 4), dir, &format!("square-{kind}"))))
        .collect();
    let elapsed = start.elapsed();

    let mut c1 = Vec::new();
    for (kind, o) in &runs {
        let s = &o.steps;
        let thetas: Vec<f64> = s.iter().map(|r| r.theta).collect();
        c1.push((thetas.iter().all(|t| (0.9..=1.1).contains(t)), format!("{kind}: theta [{}] within [0.90, 1.10]", fmt_list(thetas.clone(), 4))));
        let devs: Vec<f64> = s[s.len() - 3..].iter().map(theta_dev).collect();
        c1.push((devs.windows(2).all(|w| w[1] <= w[0]), format!("{kind}: |theta-1| over the last 3 steps [{}] non-increasing", fmt_list(devs, 4))));
        for (name, v) in [("m(|D|)", s.iter().map(|r| r.mean_abs_d).collect::<Vec<_>>()), ("sigma(D)", s.iter().map(|r| r.sigma_d).collect())] {
            let (n, worst) = inversions(&v);
            c1.push((
                n == 0 || (n == 1 && worst <= 0.1),
                format!("{kind}: {name} [{}] non-increasing ({n} inversions, worst {:.1}%)", fmt_list(v, 4), 100.0 * worst),
            ));
        }
    }
    c1.push((elapsed <= Duration::from_secs(120), format!("runtime {:.1} s <= 120 s", elapsed.as_secs_f64())));
    report.criterion(1, &c1);

    let mut c5 = Vec::new();
    for (kind, o) in &runs {
        let p = kind.order() as f64;
        let pts: Vec<(f64, f64)> = o.steps[1..].iter().map(|r| (r.dof as f64, r.exact_err)).collect();
        let slope = log_slope(&pts);
        let want = -p / 2.0;
        c5.push(((slope - want).abs() <= 0.15 * want.abs(), format!("{kind}: exact error slope {slope:.3} vs {want:.1} +- 15%")));
    }
    report.criterion(5, &c5);
}

fn variant_ranking(report: &mut Report, dir: &Path) {
    let dev: Vec<(Variant, f64)> = Variant::ALL
        .into_iter()
        .map(|variant| {
            let mut c = RunConfig::new(ProblemId::Square, ElementType::Tri3, Refinement::Adaptive, 5);
            c.variant = variant;
            let o = run(c, dir, &format!("rank-{variant}"));
            (variant, theta_dev(o.steps.last().unwrap()))
        })
        .collect();
    let get = |v: Variant| dev.iter().find(|d| d.0 == v).unwrap().1;
    let listing = dev.iter().map(|(v, d)| format!("{v} {d:.5}")).collect::<Vec<_>>().join(", ");
    report.criterion(
        2,
        &[
            (get(Variant::Mlscx) <= get(Variant::MlsBe), format!("final |theta-1|: {listing}; MLSCX <= MLS_BE")),
            (get(Variant::MlsBe) <= get(Variant::Mls), "MLS_BE <= MLS".into()),
        ],
    );
}

fn cylinder(report: &mut Report, dir: &Path) {
    let o = run(RunConfig::new(ProblemId::Cylinder, ElementType::Tri3, Refinement::Uniform, 5), dir, "cylinder");
    let (first, last) = (&o.steps[0], o.steps.last().unwrap());
    report.criterion(
        3,
        &[
            (
                first.d_min >= -0.7 && first.d_max <= 0.6,
                format!("coarsest D range [{:.3}, {:.3}] within [-0.7, 0.6]", first.d_min, first.d_max),
            ),
            (
                last.d_max - last.d_min < first.d_max - first.d_min,
                format!("finest D range [{:.3}, {:.3}] narrower than the coarsest", last.d_min, last.d_max),
            ),
            ((0.9..=1.1).contains(&last.theta), format!("finest theta {:.4} within [0.90, 1.10]", last.theta)),
        ],
    );
}

fn westergaard(report: &mut Report, dir: &Path) {
    let mut checks = Vec::new();
    for loading in [Loading::Mode1, Loading::Mode2, Loading::Mixed] {
        let mut c = RunConfig::new(ProblemId::Westergaard, ElementType::Quad4, Refinement::Adaptive, 7);
        c.loading = Some(loading);
        let o = run(c, dir, &format!("westergaard-{loading:?}"));
        let last = o.steps.last().unwrap();
        let name = format!("{loading:?}").to_lowercase();
        let (k1, k2) = (last.ki_star.unwrap(), last.kii_star.unwrap());
        let want = match loading {
            Loading::Mode1 => (K_EXACT, 0.0),
            Loading::Mode2 => (0.0, K_EXACT),
            Loading::Mixed => (K_EXACT, K_EXACT),
        };
        let k_ok = |k: f64, w: f64| (k - w).abs() <= 0.01 * K_EXACT;
        checks.push((
            k_ok(k1, want.0) && k_ok(k2, want.1),
            format!("{name}: K* = ({k1:.3}, {k2:.3}) vs ({:.4}, {:.4}) within 1%", want.0, want.1),
        ));
        checks.push(((0.85..=1.15).contains(&last.theta), format!("{name}: finest theta {:.4} within [0.85, 1.15]", last.theta)));
        let md: Vec<f64> = o.steps.iter().map(|r| r.mean_abs_d).collect();
        checks.push((md.windows(2).all(|w| w[1] < w[0]), format!("{name}: m(|D|) [{}] decreasing", fmt_list(md, 4))));
    }
    report.criterion(4, &checks);
}

/// Equilibrated quadratic stress field with its body force and exact tractions.
struct Quadratic;

impl Quadratic {
    fn stress(x: &Point) -> (Stress, [Stress; 2]) {
        let (a, b) = (x.x, x.y);
        (
            Stress::new(a * a + 2.0 * a * b - b, 3.0 * b * b - a * b + 1.0, a * b - 0.5 * a * a + b * b),
            [Stress::new(2.0 * a + 2.0 * b, -b, b - a), Stress::new(2.0 * a - 1.0, 6.0 * b - a, a + 2.0 * b)],
        )
    }
}

impl BoundaryData for Quadratic {
    fn body_force(&self, x: &Point) -> Vector2<f64> {
        let (_, [gx, gy]) = Self::stress(x);
        -Vector2::new(gx[0] + gy[2], gx[2] + gy[1])
    }
    fn known(&self, _: BoundaryTag) -> KnownTraction {
        KnownTraction::Both
    }
    fn traction(&self, at: &NearestPoint) -> Vector2<f64> {
        let (s, n) = (Self::stress(&at.point).0, at.normal);
        Vector2::new(s.x * n.x + s.z * n.y, s.z * n.x + s.y * n.y)
    }
}

/// Constant boundary traction that disagrees with the interior samples.
struct Conflicting;

impl BoundaryData for Conflicting {
    fn body_force(&self, _: &Point) -> Vector2<f64> {
        Vector2::zeros()
    }
    fn known(&self, tag: BoundaryTag) -> KnownTraction {
        if tag == 7 {
            KnownTraction::Both
        } else {
            KnownTraction::None
        }
    }
    fn traction(&self, _: &NearestPoint) -> Vector2<f64> {
        Vector2::new(5.0, -2.0)
    }
}

fn sampled<'a>(mesh: &'a Mesh, data: &'a dyn BoundaryData, f: impl Fn(&Point) -> Stress, options: RecoveryOptions) -> Recovery<'a> {
    let zero = Solution::from_displacements(mesh, Material::new(1.0, 0.3).unwrap(), vec![0.0; 2 * mesh.num_nodes()]);
    let (samples, _) = stiffness_samples(mesh, &zero);
    let values = samples.points.iter().map(f).collect();
    Recovery::new(mesh, samples, values, data, options)
}

/// Deterministic scatter of points in `[-r, r]²`.
fn scatter(n: usize, r: f64) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let t = i as f64;
            Point::new(r * (2.0 * ((t * 0.618_034).fract()) - 1.0), r * (2.0 * ((t * 0.414_214 + 0.3).fract()) - 1.0))
        })
        .collect()
}

fn recovery_properties(report: &mut Report) {
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for kind in ElementType::ALL {
        let base = generate::rectangle(kind, [-1.0, -1.0], [1.0, 1.0], 4, 4, |_, _| Some(1)).unwrap();
        let mesh = base.refine(&(0..base.num_elements()).map(|e| e % 3 == 0).collect::<Vec<_>>()).unwrap();
        for variant in Variant::ALL {
            let rec = sampled(&mesh, &Quadratic, |x| Quadratic::stress(x).0, RecoveryOptions { variant, ..Default::default() });
            for x in scatter(40, 0.99) {
                let s = Quadratic::stress(&x).0;
                worst = worst.max((rec.at_point(&x).unwrap().stress - s).norm() / s.norm());
            }
        }
    }
    checks.push((worst <= 1e-9, format!("polynomial reproduction, all element types and variants: worst relative error {worst:.2e} <= 1e-9")));

    let mesh = generate::rectangle(ElementType::Quad4, [0.0, 0.0], [1.0, 1.0], 8, 8, |m, _| {
        Some(if (m.x - 1.0).abs() < 1e-12 { 7 } else { 1 })
    })
    .unwrap();
    let rec = sampled(&mesh, &Conflicting, |_| Stress::new(1.0, 3.0, 0.5), RecoveryOptions { variant: Variant::MlsBe, ..Default::default() });
    let r = mesh.support_radius(&Point::new(0.999, 0.5), 2.0).unwrap().0;
    let s = rec.at_point(&Point::new(1.0 - 1e-3 * r, 0.43)).unwrap().stress;
    let gap = f64::max((s.x - 5.0).abs() / 5.0, (s.z + 2.0).abs() / 2.0);
    checks.push((gap <= 0.01, format!("boundary-limit traction at s = 1e-3: relative gap {gap:.2e} <= 1%")));

    let p = Problem::square();
    let mesh = p.initial_mesh(ElementType::Quad4, 4).unwrap();
    let sol = fem::solve(&mesh, &p.material(), &p).unwrap();
    let pts = scatter(101, 0.99);
    let median = |variant| {
        let rec = Recovery::from_solution(&sol, &p, RecoveryOptions { variant, ..Default::default() }, None);
        let mut r: Vec<f64> = pts.iter().map(|x| rec.at_point(x).unwrap().equilibrium_residual(&p.body_force(x)).norm()).collect();
        r.sort_by(f64::total_cmp);
        r[r.len() / 2]
    };
    let (mls, cx) = (median(Variant::Mls), median(Variant::Mlscx));
    checks.push((cx <= 0.05 * mls, format!("median interior equilibrium residual MLSCX {cx:.3e} <= 0.05 x MLS {mls:.3e}")));

    let base = generate::rectangle(ElementType::Tri3, [-1.0, -1.0], [1.0, 1.0], 6, 6, |_, _| Some(1)).unwrap();
    let mesh = base.refine(&(0..base.num_elements()).map(|e| e % 5 == 0).collect::<Vec<_>>()).unwrap();
    let smooth = |x: &Point| Stress::new(x.x.sin() * x.y.exp(), (x.x * x.y).cos(), x.x * x.x - x.y);
    let rec = sampled(&mesh, &Quadratic, smooth, RecoveryOptions { variant: Variant::Mls, ..Default::default() });
    let mut worst: f64 = 0.0;
    for x in scatter(20, 0.6) {
        let (r, dr) = mesh.support_radius(&x, 2.0).unwrap();
        let sup = rec.support(&x, r, dr).unwrap();
        let basis = mlscx::recovery::Basis::new(2, x, sup.radius);
        let sys = rec.build_system(&x, &sup, basis).unwrap();
        let eps = 1e-6 * sup.radius;
        for k in 0..2 {
            let mut off = Vector2::zeros();
            off[k] = eps;
            let at = |y: Point| {
                let (r, dr) = mesh.support_radius(&y, 2.0).unwrap();
                rec.build_system(&y, &rec.support(&y, r, dr).unwrap(), basis).unwrap()
            };
            let (sp, sm) = (at(x + off), at(x - off));
            let dm = (&sp.m - &sm.m) / (2.0 * eps);
            let dg = (&sp.g - &sm.g) / (2.0 * eps);
            worst = worst.max((dm - &sys.dm[k]).norm() / sys.dm[k].norm()).max((dg - &sys.dg[k]).norm() / sys.dg[k].norm());
        }
    }
    checks.push((worst <= 1e-5, format!("dM/dx and dG/dx vs central differences: worst relative gap {worst:.2e} <= 1e-5")));

    let p = Problem::square();
    let mesh = p.initial_mesh(ElementType::Quad4, 4).unwrap();
    let sol = fem::solve(&mesh, &p.material(), &p).unwrap();
    let rec = Recovery::from_solution(&sol, &p, RecoveryOptions::default(), None);
    let jump = |a: Point, b: Point, n: usize| {
        let v: Vec<Stress> = (0..=n).map(|i| rec.at_point(&(a + (b - a) * (i as f64 / n as f64))).unwrap().stress).collect();
        v.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max)
    };
    let (a, b) = (Point::new(-0.2, 0.31), Point::new(0.98, 0.31));
    let ratio = jump(a, b, 400) / jump(a, b, 200);
    checks.push((
        (0.4..=0.6).contains(&ratio),
        format!("continuity transect: largest step halves with the spacing (ratio {ratio:.3})"),
    ));
    report.criterion(6, &checks);
}

fn fracture_suite(report: &mut Report) {
    let mut checks = Vec::new();
    let material = Material::new(1e7, 0.333).unwrap();
    let mesh = generate::edge_cracked_rectangle(ElementType::Quad8, [0.0, -1.0], [2.0, 1.0], 32, 32, 1.0, |_, _| Some(1)).unwrap();
    let frame = CrackFrame::new(Point::new(1.0, 0.0), 0.0);
    let sides = mesh.node_crack_sides();
    let field = |k1: f64, k2: f64| {
        let f = SingularField { frame, k1, k2 };
        let u: Vec<f64> = mesh
            .nodes()
            .iter()
            .enumerate()
            .flat_map(|(n, p)| {
                let d = f.displacement_side(p, sides[n], &material);
                [d.x, d.y]
            })
            .collect();
        Solution::from_displacements(&mesh, material, u)
    };
    let (s1, s2) = (field(1.0, 0.0), field(0.0, 1.0));
    let (a, b) = (extract_sif(&s1, &frame, 0.9).unwrap(), extract_sif(&s2, &frame, 0.9).unwrap());
    let gap = [(a.k1 - 1.0).abs(), a.k2.abs(), (b.k2 - 1.0).abs(), b.k1.abs()].into_iter().fold(0.0, f64::max);
    checks.push((
        gap <= 5e-3,
        format!("unit asymptotic input: mode I -> ({:.5}, {:.1e}), mode II -> ({:.1e}, {:.5}); within 0.5%", a.k1, a.k2, b.k1, b.k2),
    ));

    let p = Problem::westergaard(100.0, 100.0);
    let wmesh = p.initial_mesh(ElementType::Quad8, 32).unwrap();
    let sol = fem::solve(&wmesh, &p.material(), &p).unwrap();
    let ks: Vec<(f64, f64)> = [0.5, 0.7, 0.9]
        .into_iter()
        .map(|rq| {
            let s = extract_sif(&sol, &frame, rq).unwrap();
            (s.k1, s.k2)
        })
        .collect();
    let spread = ks.iter().map(|k| f64::max((k.0 - ks[2].0).abs() / ks[2].0, (k.1 - ks[2].1).abs() / ks[2].1)).fold(0.0, f64::max);
    checks.push((
        spread <= 5e-3,
        format!(
            "r_q in {{0.5, 0.7, 0.9}} on a mixed-mode FE solution: K = {} ; spread {:.2e} <= 0.5%",
            ks.iter().map(|k| format!("({:.3}, {:.3})", k.0, k.1)).collect::<Vec<_>>().join(", "),
            spread
        ),
    ));

    let mut worst: f64 = 0.0;
    for r in [1e-3, 0.1, 2.0] {
        for phi in [PI, -PI] {
            let s = asymptotic_stress(1.3, -0.7, r, phi).unwrap();
            worst = worst.max(s.y.abs()).max(s.z.abs());
        }
    }
    checks.push((worst <= 1e-10, format!("singular-field crack-face tractions {worst:.1e} <= 1e-10")));

    let (k1, k2) = p.exact_sif().unwrap();
    let sing = SingularField { frame, k1, k2 };
    let r = 1e-3;
    let (mut smooth, mut singular): (f64, f64) = (0.0, 0.0);
    for i in 0..16 {
        let phi = -PI + (i as f64 + 0.5) * 2.0 * PI / 16.0;
        let x = Point::new(1.0 + r * phi.cos(), r * phi.sin());
        let s = sing.stress(&x).unwrap();
        smooth = smooth.max((p.exact_stress(&x).unwrap() - s).norm());
        singular = singular.max(s.norm());
    }
    checks.push((
        smooth <= 3.0 * 100.0 && smooth <= 0.05 * singular,
        format!("splitting at r = 1e-3 a: smooth part {smooth:.1} bounded (far field 100) against singular part {singular:.0}"),
    ));
    report.criterion(7, &checks);
}

fn k_study(report: &mut Report, dir: &Path) {
    let mut checks = Vec::new();
    let mut dofs = Vec::new();
    for k in [1.5, 2.0, 3.0] {
        let mut c = RunConfig::new(ProblemId::Square, ElementType::Quad4, Refinement::Uniform, 3);
        c.support_k = k;
        let o = run(c, dir, &format!("k-{k}"));
        let csv = std::fs::read_to_string(o.config.output_dir.join("results.csv")).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        let finite = rows.iter().all(|r| r.split(',').take(7).all(|f| f.parse::<f64>().is_ok_and(f64::is_finite)));
        dofs.push(o.steps.iter().map(|s| s.dof).collect::<Vec<_>>());
        let thetas = fmt_list(o.steps.iter().map(|s| s.theta), 4);
        checks.push((rows.len() == 3 && finite, format!("k = {k}: {} rows, finite fields, theta [{thetas}]", rows.len())));
    }
    checks.push((dofs.windows(2).all(|w| w[0] == w[1]), "same mesh sequence for every k".into()));
    report.criterion(8, &checks);
}

fn digest(dir: &Path) -> String {
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    names.sort();
    let mut h = Sha256::new();
    for n in &names {
        h.update(n.as_bytes());
        h.update(std::fs::read(dir.join(n)).unwrap());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn determinism(dir: &Path) -> (bool, String) {
    let mut c = RunConfig::new(ProblemId::Westergaard, ElementType::Tri6, Refinement::Adaptive, 3);
    c.loading = Some(Loading::Mixed);
    let mut hashes = Vec::new();
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let o = pool.install(|| run(c.clone(), dir, &format!("determinism-{threads}")));
        hashes.push((digest(&o.config.output_dir), o.config_hash));
    }
    (
        hashes[0] == hashes[1],
        format!("output hash with 1 and 4 threads: {} / {}", &hashes[0].0[..16], &hashes[1].0[..16]),
    )
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut report = Report { failed: BTreeSet::new() };
    square_uniform(&mut report, dir);
    variant_ranking(&mut report, dir);
    cylinder(&mut report, dir);
    westergaard(&mut report, dir);
    recovery_properties(&mut report);
    fracture_suite(&mut report);
    k_study(&mut report, dir);
    let det = determinism(dir);
    let elapsed = start.elapsed();
    report.criterion(9, &[(elapsed <= Duration::from_secs(900), format!("suite wall clock {:.1} s <= 900 s", elapsed.as_secs_f64())), det]);

    let want: BTreeSet<usize> = KNOWN_FAILURES.iter().copied().collect();
    println!("failing criteria: {:?} (known: {:?})", report.failed, want);
    assert_eq!(report.failed, want, "the set of failing criteria changed");
}
