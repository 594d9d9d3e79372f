//! Moving least squares stress recovery with boundary-equilibrium terms and
//! internal-equilibrium constraints.
//!
//! The recovered stress at `x` is `σ*(x) = P(x) A(x)` where `P` holds one polynomial
//! block per stress component and `A` minimizes the weighted misfit to the sampled FE
//! stresses plus, for the boundary variants, the misfit to known tractions at the
//! nearest boundary points. The constrained variants add two Lagrange rows that make
//! `∇·σ* + b` vanish at `x`.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::fem::quadrature::{rule, Purpose};
use crate::fem::Solution;
use crate::fracture::{extract_sif, CrackFrame, Sif, SingularField, SmoothPart};
use crate::mesh::support::{Distance, SamplePoints, SupportGeometry};
use crate::mesh::{BoundaryTag, Mesh, NearestPoint};
use crate::problems::{tags, KnownTraction, Problem};
use crate::{par, Error, Point, Result, Stress};

/// Largest accepted estimate of `cond(M)`.
const MAX_CONDITION: f64 = 1e12;
/// Enlargements tried when `M` is ill-conditioned.
const CONDITION_RETRIES: i32 = 5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "MLS")]
    Mls,
    #[serde(rename = "MLS_BE")]
    MlsBe,
    #[serde(rename = "MLS_BE_PIE")]
    MlsBePie,
    #[serde(rename = "MLSCX")]
    #[default]
    Mlscx,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Self::Mls, Self::MlsBe, Self::MlsBePie, Self::Mlscx];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mls => "MLS",
            Self::MlsBe => "MLS_BE",
            Self::MlsBePie => "MLS_BE_PIE",
            Self::Mlscx => "MLSCX",
        }
    }

    pub fn boundary_terms(self) -> bool {
        self != Self::Mls
    }

    pub fn constrained(self) -> bool {
        matches!(self, Self::MlsBePie | Self::Mlscx)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// Quartic spline `W(s)` and `dW/ds`; zero outside the support.
pub fn weight(s: f64) -> (f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let s2 = s * s;
    (1.0 - 6.0 * s2 + 8.0 * s2 * s - 3.0 * s2 * s2, -12.0 * s + 24.0 * s2 - 12.0 * s2 * s)
}

/// Boundary weight `W̃ = W/s` and its derivative. Requires `s > 0`.
pub fn boundary_weight(s: f64) -> (f64, f64) {
    debug_assert!(s > 0.0, "boundary weight evaluated on the boundary");
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let s2 = s * s;
    (1.0 / s - 6.0 * s + 8.0 * s2 - 3.0 * s2 * s, -1.0 / s2 - 6.0 + 16.0 * s - 9.0 * s2)
}

/// Stress rotation to a frame whose x̃ axis makes angle `alpha` with x. Rows are
/// `σx̃x̃`, `σỹỹ`, `σx̃ỹ` in terms of `(σxx, σyy, σxy)`.
pub fn stress_rotation(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(
        c * c,
        s * s,
        2.0 * s * c,
        s * s,
        c * c,
        -2.0 * s * c,
        -s * c,
        s * c,
        c * c - s * s,
    )
}

const MAX_TERMS: usize = 15;

/// Complete polynomial basis in scaled local coordinates `(x − center)/scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    pub degree: usize,
    pub center: Point,
    pub scale: f64,
}

/// Basis values and physical gradients at one point.
#[derive(Debug, Clone, Copy)]
pub struct BasisEval {
    pub len: usize,
    pub p: [f64; MAX_TERMS],
    pub dx: [f64; MAX_TERMS],
    pub dy: [f64; MAX_TERMS],
}

impl Basis {
    pub fn new(degree: usize, center: Point, scale: f64) -> Self {
        assert!(degree <= 4, "basis degree {degree} not supported");
        Self { degree, center, scale }
    }

    pub fn len(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Monomials ordered by total degree: `1, x, y, x², xy, y², ...`.
    pub fn eval(&self, x: &Point) -> BasisEval {
        let u = (x.x - self.center.x) / self.scale;
        let v = (x.y - self.center.y) / self.scale;
        let mut pu = [1.0; 5];
        let mut pv = [1.0; 5];
        for i in 1..=self.degree {
            pu[i] = pu[i - 1] * u;
            pv[i] = pv[i - 1] * v;
        }
        let mut out = BasisEval { len: self.len(), p: [0.0; MAX_TERMS], dx: [0.0; MAX_TERMS], dy: [0.0; MAX_TERMS] };
        let mut k = 0;
        for d in 0..=self.degree {
            for j in 0..=d {
                let i = d - j;
                out.p[k] = pu[i] * pv[j];
                if i > 0 {
                    out.dx[k] = i as f64 * pu[i - 1] * pv[j] / self.scale;
                }
                if j > 0 {
                    out.dy[k] = j as f64 * pu[i] * pv[j - 1] / self.scale;
                }
                k += 1;
            }
        }
        out
    }

    /// `P(x)`, 3 × 3m, one block per stress component.
    pub fn matrix(&self, x: &Point) -> DMatrix<f64> {
        let b = self.eval(x);
        block_rows(&b.p[..b.len])
    }
}

fn block_rows(p: &[f64]) -> DMatrix<f64> {
    let m = p.len();
    let mut out = DMatrix::zeros(3, 3 * m);
    for c in 0..3 {
        for i in 0..m {
            out[(c, c * m + i)] = p[i];
        }
    }
    out
}

/// Body force and known boundary tractions seen by the recovery.
pub trait BoundaryData: Sync {
    fn body_force(&self, x: &Point) -> Vector2<f64>;

    /// Which traction components a side with `tag` prescribes.
    fn known(&self, tag: BoundaryTag) -> KnownTraction;

    /// Traction at a nearest boundary point; only the components named by
    /// [`BoundaryData::known`] are used.
    fn traction(&self, at: &NearestPoint) -> Vector2<f64>;
}

impl BoundaryData for Problem {
    fn body_force(&self, x: &Point) -> Vector2<f64> {
        Problem::body_force(self, x)
    }

    fn known(&self, tag: BoundaryTag) -> KnownTraction {
        self.known_traction(tag)
    }

    fn traction(&self, at: &NearestPoint) -> Vector2<f64> {
        match at.tag {
            tags::TRACTION => self.boundary_traction(&at.point, &at.normal).unwrap_or_else(|_| Vector2::zeros()),
            _ => Vector2::zeros(),
        }
    }
}

/// Moment system at one evaluation point.
#[derive(Debug, Clone)]
pub struct MlsSystem {
    pub basis: Basis,
    pub m: DMatrix<f64>,
    pub g: DVector<f64>,
    /// `∂M/∂x`, `∂M/∂y`.
    pub dm: [DMatrix<f64>; 2],
    pub dg: [DVector<f64>; 2],
}

/// Recovered stress at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recovered {
    pub stress: Stress,
    /// `∂σ*/∂x`, `∂σ*/∂y` from the derivative chain with `Cᵀλ` neglected.
    pub gradient: [Stress; 2],
    /// `C A − D` (zero rows for the unconstrained variants).
    pub constraint_residual: Vector2<f64>,
    pub fallback: bool,
    pub enlargements: usize,
}

impl Recovered {
    /// `∇·σ* + b` from the gradient chain.
    pub fn equilibrium_residual(&self, b: &Vector2<f64>) -> Vector2<f64> {
        let [gx, gy] = self.gradient;
        Vector2::new(gx[0] + gy[2] + b.x, gx[2] + gy[1] + b.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub variant: Variant,
    /// Support radius factor.
    pub k: f64,
    /// Basis degree; FE order + 1 when `None`.
    pub degree: Option<usize>,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { variant: Variant::default(), k: 2.0, degree: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RecoveryStats {
    pub points: usize,
    /// Saddle systems that fell back to the unconstrained fit.
    pub fallbacks: usize,
    /// Support enlargements (sparse or ill-conditioned supports).
    pub enlargements: usize,
}

/// Immutable recovery context; evaluation is safe from many threads.
pub struct Recovery<'a> {
    mesh: &'a Mesh,
    samples: SamplePoints,
    values: Vec<Stress>,
    data: &'a dyn BoundaryData,
    sizes: Vec<f64>,
    options: RecoveryOptions,
    degree: usize,
    points: AtomicUsize,
    fallbacks: AtomicUsize,
    enlargements: AtomicUsize,
}

impl<'a> Recovery<'a> {
    pub fn new(
        mesh: &'a Mesh,
        samples: SamplePoints,
        values: Vec<Stress>,
        data: &'a dyn BoundaryData,
        options: RecoveryOptions,
    ) -> Self {
        assert_eq!(samples.len(), values.len());
        let degree = options.degree.unwrap_or(mesh.order() + 1);
        Self {
            mesh,
            samples,
            values,
            data,
            sizes: mesh.nodal_sizes(),
            options,
            degree,
            points: AtomicUsize::new(0),
            fallbacks: AtomicUsize::new(0),
            enlargements: AtomicUsize::new(0),
        }
    }

    /// Samples the FE stresses at the stiffness quadrature points, minus `subtract`.
    pub fn from_solution(
        solution: &Solution<'a>,
        data: &'a dyn BoundaryData,
        options: RecoveryOptions,
        subtract: Option<&(dyn Fn(&Point) -> Stress + Sync)>,
    ) -> Self {
        let mesh = solution.mesh();
        let (samples, stresses) = stiffness_samples(mesh, solution);
        let values = match subtract {
            Some(f) => stresses.iter().zip(&samples.points).map(|(s, x)| s - f(x)).collect(),
            None => stresses,
        };
        Self::new(mesh, samples, values, data, options)
    }

    pub fn mesh(&self) -> &'a Mesh {
        self.mesh
    }

    pub fn options(&self) -> &RecoveryOptions {
        &self.options
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn stats(&self) -> RecoveryStats {
        RecoveryStats {
            points: self.points.load(Ordering::Relaxed),
            fallbacks: self.fallbacks.load(Ordering::Relaxed),
            enlargements: self.enlargements.load(Ordering::Relaxed),
        }
    }

    /// Samples and nearest points with known tractions around `x`.
    pub fn support(&self, x: &Point, radius: f64, dradius: Vector2<f64>) -> Result<SupportGeometry> {
        let m = Basis::new(self.degree, *x, 1.0).len();
        let boundary = self.options.variant.boundary_terms();
        self.mesh.collect_support(&self.samples, x, radius, dradius, m, |tag| {
            boundary && self.data.known(tag) != KnownTraction::None
        })
    }

    /// Assembles `M`, `G` and their derivatives for the support of `x` in `basis`.
    pub fn build_system(&self, x: &Point, support: &SupportGeometry, basis: Basis) -> Result<MlsSystem> {
        let m = basis.len();
        let n = 3 * m;
        let mut mp = DMatrix::zeros(m, m);
        let mut dmp = [DMatrix::zeros(m, m), DMatrix::zeros(m, m)];
        let mut gp = DMatrix::zeros(m, 3);
        let mut dgp = [DMatrix::zeros(m, 3), DMatrix::zeros(m, 3)];
        for &(i, Distance { s, ds }) in &support.samples {
            let (w, dw) = weight(s);
            let area = self.samples.weights[i];
            let b = basis.eval(&self.samples.points[i]);
            let p = DVector::from_column_slice(&b.p[..m]);
            let ppt = &p * p.transpose();
            let ps = &p * self.values[i].transpose();
            mp += &ppt * (w * area);
            gp += &ps * (w * area);
            for k in 0..2 {
                let f = dw * ds[k] * area;
                dmp[k] += &ppt * f;
                dgp[k] += &ps * f;
            }
        }
        let mut sys = MlsSystem {
            basis,
            m: DMatrix::zeros(n, n),
            g: DVector::zeros(n),
            dm: [DMatrix::zeros(n, n), DMatrix::zeros(n, n)],
            dg: [DVector::zeros(n), DVector::zeros(n)],
        };
        for c in 0..3 {
            let r = c * m..(c + 1) * m;
            sys.m.view_mut((r.start, r.start), (m, m)).copy_from(&mp);
            sys.g.rows_mut(r.start, m).copy_from(&gp.column(c));
            for k in 0..2 {
                sys.dm[k].view_mut((r.start, r.start), (m, m)).copy_from(&dmp[k]);
                sys.dg[k].rows_mut(r.start, m).copy_from(&dgp[k].column(c));
            }
        }
        if self.options.variant.boundary_terms() {
            for (np, Distance { s, ds }) in &support.nearest {
                let known = self.data.known(np.tag);
                if known == KnownTraction::None {
                    continue;
                }
                let t = self.data.traction(np);
                if !(*s > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "recovery point ({}, {}) lies on the boundary",
                        x.x, x.y
                    )));
                }
                let (w, dw) = boundary_weight(*s);
                let rot = stress_rotation(np.angle);
                let tangent = Vector2::new(-np.normal.y, np.normal.x);
                let mut rows: Vec<(Vector3<f64>, f64)> = vec![(rot.row(2).transpose(), t.dot(&tangent))];
                if known == KnownTraction::Both {
                    rows.push((rot.row(0).transpose(), t.dot(&np.normal)));
                }
                let b = basis.eval(&np.point);
                for (r, target) in rows {
                    let mut q = DVector::zeros(n);
                    for c in 0..3 {
                        for i in 0..m {
                            q[c * m + i] = r[c] * b.p[i];
                        }
                    }
                    let qqt = &q * q.transpose();
                    sys.m += &qqt * w;
                    sys.g += &q * (w * target);
                    for k in 0..2 {
                        sys.dm[k] += &qqt * (dw * ds[k]);
                        sys.dg[k] += &q * (dw * ds[k] * target);
                    }
                }
            }
        }
        Ok(sys)
    }

    /// Recovered stress at a reference point of element `e`.
    pub fn at(&self, e: usize, xi: [f64; 2]) -> Result<Recovered> {
        let x = self.mesh.map_point(e, xi);
        let (r, dr) = self.mesh.support_radius_at(&self.sizes, e, xi, self.options.k);
        self.points.fetch_add(1, Ordering::Relaxed);
        let mut last_err = None;
        for attempt in 0..=CONDITION_RETRIES {
            let scale = 1.1f64.powi(attempt);
            let support = self.support(&x, r * scale, dr * scale)?;
            let basis = Basis::new(self.degree, x, support.radius);
            let sys = self.build_system(&x, &support, basis)?;
            match solve_point(&sys, &x, self.options.variant, &self.data.body_force(&x)) {
                Ok(mut rec) => {
                    rec.enlargements = support.enlargements + attempt as usize;
                    self.enlargements.fetch_add(rec.enlargements, Ordering::Relaxed);
                    if rec.fallback {
                        self.fallbacks.fetch_add(1, Ordering::Relaxed);
                    }
                    return Ok(rec);
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    /// Recovered stress at a physical point.
    pub fn at_point(&self, x: &Point) -> Result<Recovered> {
        let (e, xi) = self.mesh.locate(x)?;
        self.at(e, xi)
    }

    /// σ* at every error-integration point, per element.
    pub fn field(&self) -> Result<Vec<Vec<Stress>>> {
        par::map_range(self.mesh.num_elements(), |e| {
            rule(self.mesh.element(e).kind, Purpose::ErrorIntegration)
                .points
                .iter()
                .map(|&xi| self.at(e, xi).map(|r| r.stress))
                .collect::<Result<Vec<_>>>()
        })
        .into_iter()
        .collect()
    }
}

/// σ* at every error-integration point with run diagnostics.
#[derive(Debug, Clone)]
pub struct RecoveredField {
    pub values: Vec<Vec<Stress>>,
    pub stats: RecoveryStats,
    /// Intensities used for the split on cracked meshes.
    pub sif: Option<Sif>,
}

/// Recovers σ* over the whole mesh. On a cracked mesh the FE stresses and tractions are
/// split: the asymptotic field of the extracted intensities is removed before the fit
/// and added back afterwards.
pub fn recover_field(
    solution: &Solution,
    data: &dyn BoundaryData,
    options: RecoveryOptions,
    rq: f64,
) -> Result<RecoveredField> {
    let mesh = solution.mesh();
    let Some(crack) = mesh.crack() else {
        let rec = Recovery::from_solution(solution, data, options, None);
        let values = rec.field()?;
        return Ok(RecoveredField { values, stats: rec.stats(), sif: None });
    };
    let frame = CrackFrame::from_crack(crack);
    let sif = extract_sif(solution, &frame, rq)?;
    let singular = SingularField { frame, k1: sif.k1, k2: sif.k2 };
    let smooth = SmoothPart { inner: data, singular };
    let subtract = |x: &Point| singular.stress(x).unwrap_or_else(|_| Stress::zeros());
    let rec = Recovery::from_solution(solution, &smooth, options, Some(&subtract));
    let mut values = rec.field()?;
    for (e, vals) in values.iter_mut().enumerate() {
        let r = rule(mesh.element(e).kind, Purpose::ErrorIntegration);
        for (v, &xi) in vals.iter_mut().zip(&r.points) {
            *v += singular.stress(&mesh.map_point(e, xi))?;
        }
    }
    Ok(RecoveredField { values, stats: rec.stats(), sif: Some(sif) })
}

/// Stiffness quadrature points of every element, their area weights `|J|H`, and the FE
/// stresses there.
pub fn stiffness_samples(mesh: &Mesh, solution: &Solution) -> (SamplePoints, Vec<Stress>) {
    let stresses = solution.stiffness_point_stresses();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut values = Vec::new();
    for (e, element_stresses) in stresses.iter().enumerate() {
        let r = rule(mesh.element(e).kind, Purpose::Stiffness);
        for (q, (xi, w)) in r.iter().enumerate() {
            let g = mesh.geometry(e, xi);
            points.push(g.x);
            weights.push(w * g.det_j);
            values.push(element_stresses[q]);
        }
    }
    (SamplePoints::new(points, weights), values)
}

/// Solves the moment system at the evaluation point `x`. Fails (so the caller enlarges
/// the support) when `M` is not safely positive definite.
pub fn solve_point(sys: &MlsSystem, x: &Point, variant: Variant, body: &Vector2<f64>) -> Result<Recovered> {
    let ill = || Error::InvalidInput(format!("moment matrix ill-conditioned at ({}, {})", x.x, x.y));
    let chol = sys.m.clone().cholesky().ok_or_else(ill)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &d| (a.min(d.abs()), b.max(d.abs())));
    if !(lo > 0.0) || (hi / lo).powi(2) > MAX_CONDITION {
        return Err(ill());
    }
    let b = sys.basis.eval(x);
    let m = b.len;
    let p = block_rows(&b.p[..m]);
    let dp = [block_rows(&b.dx[..m]), block_rows(&b.dy[..m])];
    // Z = M⁻¹ Pᵀ, so P M⁻¹ X = Zᵀ X
    let z = chol.solve(&p.transpose());
    let zt = z.transpose();
    let e: [DMatrix<f64>; 2] = [&dp[0] - &zt * &sys.dm[0], &dp[1] - &zt * &sys.dm[1]];
    let f: [Vector3<f64>; 2] = [to3(&(&zt * &sys.dg[0])), to3(&(&zt * &sys.dg[1]))];

    let mut a = chol.solve(&sys.g);
    let mut fallback = false;
    let mut residual = Vector2::zeros();
    if variant.constrained() {
        let (c, d) = if variant == Variant::Mlscx {
            let c0 = e[0].row(0) + e[1].row(2);
            let c1 = e[0].row(2) + e[1].row(1);
            let d = Vector2::new(-(f[0][0] + f[1][2]) - body.x, -(f[0][2] + f[1][1]) - body.y);
            (stack(&c0, &c1), d)
        } else {
            let c0 = dp[0].row(0) + dp[1].row(2);
            let c1 = dp[0].row(2) + dp[1].row(1);
            (stack(&c0, &c1), -body)
        };
        let y = chol.solve(&c.transpose());
        let s = &c * &y;
        let s = Matrix2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
        let eig = s.symmetric_eigenvalues();
        let (smin, smax) = (eig.min(), eig.max());
        if smax > 0.0 && smin > 1e-12 * smax {
            let ca = &c * &a;
            let lambda = s.try_inverse().expect("checked") * (Vector2::new(ca[0], ca[1]) - d);
            a -= &y * DVector::from_column_slice(lambda.as_slice());
            let ca = &c * &a;
            residual = Vector2::new(ca[0], ca[1]) - d;
        } else {
            fallback = true;
        }
    }
    let stress = to3(&(&p * &a));
    let gradient = [to3(&(&e[0] * &a)) + f[0], to3(&(&e[1] * &a)) + f[1]];
    Ok(Recovered { stress, gradient, constraint_residual: residual, fallback, enlargements: 0 })
}

fn to3(v: &DVector<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn stack(a: &nalgebra::RowDVector<f64>, b: &nalgebra::RowDVector<f64>) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(2, a.len());
    c.row_mut(0).copy_from(a);
    c.row_mut(1).copy_from(b);
    c
}
