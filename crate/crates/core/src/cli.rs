//! Batch driver: solve, recover, estimate and refine over a mesh sequence, writing
//! `results.csv`, one `mesh_<step>.vtk` per step and `manifest.json`.
//!
//! A run is described by a TOML file:
//!
//! ```toml
//! problem = "westergaard"      # square | cylinder | westergaard
//! element_type = "QUAD4"       # TRI3 | TRI6 | QUAD4 | QUAD8
//! refinement = "adaptive"      # uniform | adaptive
//! steps = 6                    # or target_error = 2e-3 (with max_steps)
//! variant = "MLSCX"            # MLS | MLS_BE | MLS_BE_PIE | MLSCX
//! support_k = 2.0
//! rq = 0.9
//! loading = "mixed"            # westergaard only: mode1 | mode2 | mixed
//! output_dir = "out/w-mixed"
//! ```

pub mod vtk;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::estimate::{analyze, refine_step, Refinement, StepAnalysis};
use crate::fem::quadrature::{rule, Purpose};
use crate::fem::ElementType;
use crate::mesh::{self, Mesh};
use crate::problems::{Problem, ProblemId};
use crate::recovery::{RecoveryOptions, RecoveryStats, Variant};
use crate::{Error, Result, Stress};

pub const CSV_HEADER: &str = "step,dof,exact_err,est_err,theta,mD,sigmaD,KI_star,KII_star";
/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MLSCX_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loading {
    Mode1,
    Mode2,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub element_type: ElementType,
    pub refinement: Refinement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Energy-norm error at which the run stops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_error: Option<f64>,
    /// Cap on the number of steps when `target_error` drives termination.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default = "default_k")]
    pub support_k: f64,
    #[serde(default = "default_rq")]
    pub rq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loading: Option<Loading>,
    #[serde(default = "default_far_field")]
    pub sigma_inf: f64,
    #[serde(default = "default_far_field")]
    pub tau_inf: f64,
    /// Recorded in the manifest; the pipeline itself draws no random numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Divisions per direction of the generated initial mesh.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_divisions: Option<usize>,
    /// Initial mesh in the plain-text mesh format instead of the generated one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_file: Option<PathBuf>,
    /// With `steps`, adaptive steps aim at this fraction of the current estimate.
    #[serde(default = "default_refine_fraction")]
    pub refine_fraction: f64,
}

fn default_max_steps() -> usize {
    20
}
fn default_k() -> f64 {
    2.0
}
fn default_rq() -> f64 {
    0.9
}
fn default_far_field() -> f64 {
    100.0
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_refine_fraction() -> f64 {
    0.5
}

impl RunConfig {
    /// A configuration with defaults for everything but the case itself.
    pub fn new(problem: ProblemId, element_type: ElementType, refinement: Refinement, steps: usize) -> Self {
        Self {
            problem,
            element_type,
            refinement,
            steps: Some(steps),
            target_error: None,
            max_steps: default_max_steps(),
            variant: Variant::default(),
            support_k: default_k(),
            rq: default_rq(),
            loading: None,
            sigma_inf: default_far_field(),
            tau_inf: default_far_field(),
            seed: 0,
            output_dir: default_output_dir(),
            initial_divisions: None,
            mesh_file: None,
            refine_fraction: default_refine_fraction(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file; a relative `mesh_file` is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut c = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(m), Some(dir)) = (&c.mesh_file, path.parent()) {
            if m.is_relative() {
                c.mesh_file = Some(dir.join(m));
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match (self.steps, self.target_error) {
            (Some(0), _) => return bad("steps must be at least 1".into()),
            (Some(_), Some(_)) | (None, None) => {
                return bad("exactly one of `steps` and `target_error` must be given".into())
            }
            (None, Some(t)) if !(t > 0.0 && t.is_finite()) => return bad(format!("target_error {t} must be positive")),
            _ => {}
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        if !(self.support_k > 0.0 && self.support_k.is_finite()) {
            return bad(format!("support_k {} must be positive", self.support_k));
        }
        if !(self.rq > 0.0 && self.rq.is_finite()) {
            return bad(format!("rq {} must be positive", self.rq));
        }
        if !(self.refine_fraction > 0.0 && self.refine_fraction < 1.0) {
            return bad(format!("refine_fraction {} must lie in (0, 1)", self.refine_fraction));
        }
        if self.loading.is_some() && self.problem != ProblemId::Westergaard {
            return bad("`loading` applies to the westergaard problem only".into());
        }
        if !(self.sigma_inf.is_finite() && self.tau_inf.is_finite()) {
            return bad("far-field stresses must be finite".into());
        }
        match self.initial_divisions {
            Some(0) => return bad("initial_divisions must be at least 1".into()),
            Some(n) if self.problem == ProblemId::Westergaard && n % 2 == 1 => {
                return bad("initial_divisions must be even for the crack mesh".into())
            }
            _ => {}
        }
        Ok(())
    }

    pub fn problem(&self) -> Problem {
        match self.problem {
            ProblemId::Square => Problem::square(),
            ProblemId::Cylinder => Problem::cylinder(),
            ProblemId::Westergaard => match self.loading.unwrap_or(Loading::Mode1) {
                Loading::Mode1 => Problem::westergaard(self.sigma_inf, 0.0),
                Loading::Mode2 => Problem::westergaard(0.0, self.tau_inf),
                Loading::Mixed => Problem::westergaard(self.sigma_inf, self.tau_inf),
            },
        }
    }

    pub fn divisions(&self) -> usize {
        self.initial_divisions.unwrap_or(match self.problem {
            ProblemId::Square => 4,
            ProblemId::Cylinder => 2,
            ProblemId::Westergaard => 8,
        })
    }

    pub fn initial_mesh(&self) -> Result<Mesh> {
        let m = match &self.mesh_file {
            Some(path) => mesh::io::read(path)?,
            None => self.problem().initial_mesh(self.element_type, self.divisions())?,
        };
        if m.element_type() != self.element_type {
            return Err(Error::Config(format!(
                "mesh file holds {} elements, config asks for {}",
                m.element_type(),
                self.element_type
            )));
        }
        Ok(m)
    }

    pub fn recovery_options(&self) -> RecoveryOptions {
        RecoveryOptions { variant: self.variant, k: self.support_k, ..Default::default() }
    }

    /// SHA-256 of the resolved configuration, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.initial_divisions = Some(self.divisions());
        if c.problem == ProblemId::Westergaard {
            c.loading = Some(self.loading.unwrap_or(Loading::Mode1));
        }
        let text = toml::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Per-step summary kept in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub elements: usize,
    pub dof: usize,
    pub exact_err: f64,
    pub est_err: f64,
    pub theta: f64,
    pub mean_abs_d: f64,
    pub sigma_d: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Elements with zero exact error, left out of the `D` statistics.
    pub excluded: usize,
    pub ki_star: Option<f64>,
    pub kii_star: Option<f64>,
    pub recovery: RecoveryStats,
}

impl StepRecord {
    fn new(mesh: &Mesh, a: &StepAnalysis) -> Self {
        let r = &a.report;
        let d = r.local.iter().flatten();
        Self {
            step: r.step,
            elements: mesh.num_elements(),
            dof: r.dof,
            exact_err: r.exact_global,
            est_err: r.estimated_global,
            theta: r.theta,
            mean_abs_d: r.mean_abs_d,
            sigma_d: r.sigma_d,
            d_min: d.clone().copied().fold(f64::INFINITY, f64::min),
            d_max: d.copied().fold(f64::NEG_INFINITY, f64::max),
            excluded: r.excluded,
            ki_star: a.sif.map(|s| s.k1),
            kii_star: a.sif.map(|s| s.k2),
            recovery: a.stats,
        }
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            self.dof,
            self.exact_err,
            self.est_err,
            self.theta,
            self.mean_abs_d,
            self.sigma_d,
            opt(self.ki_star),
            opt(self.kii_star)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    /// The estimated error reached `target_error`.
    Converged { step: usize },
    /// All requested steps ran.
    Completed,
    /// `max_steps` ran without reaching `target_error`.
    MaxSteps,
    Failed { step: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub library: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub config: RunConfig,
    pub termination: Termination,
    /// True when the run stopped because the target error was met.
    pub converged: bool,
    pub steps: Vec<StepRecord>,
}

/// Runs the step loop, writing outputs into `config.output_dir`. A failing step ends
/// the run with a `#` diagnostic line in the CSV; only configuration and I/O problems
/// are returned as errors.
pub fn run_case(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join("results.csv"))?);
    writeln!(csv, "{CSV_HEADER}")?;
    csv.flush()?;

    let problem = config.problem();
    let options = config.recovery_options();
    let last = config.steps.unwrap_or(config.max_steps);
    let mut outcome = Outcome {
        library: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config.hash(),
        config: config.clone(),
        termination: Termination::Completed,
        converged: false,
        steps: Vec::new(),
    };
    let fail = |csv: &mut BufWriter<File>, step: usize, e: Error| -> Result<Termination> {
        let message = e.to_string();
        writeln!(csv, "# step {step} failed: {}", message.replace('\n', " "))?;
        csv.flush()?;
        Ok(Termination::Failed { step, message })
    };

    let mut mesh = match config.initial_mesh() {
        Ok(m) => Some(m),
        Err(e @ (Error::Config(_) | Error::Io(_))) => return Err(e),
        Err(e) => {
            outcome.termination = fail(&mut csv, 0, e)?;
            None
        }
    };
    let mut step = 0;
    while let Some(m) = mesh.take() {
        let a = match analyze(&m, &problem, options, config.rq, step) {
            Ok(a) => a,
            Err(e) => {
                outcome.termination = fail(&mut csv, step, e)?;
                break;
            }
        };
        let record = StepRecord::new(&m, &a);
        writeln!(csv, "{}", record.csv_row())?;
        csv.flush()?;
        std::fs::write(dir.join(format!("mesh_{step}.vtk")), step_grid(&m, &a).to_vtk())?;
        outcome.steps.push(record);

        let est = a.report.estimated_global;
        if config.target_error.is_some_and(|t| est <= t) {
            outcome.termination = Termination::Converged { step };
            outcome.converged = true;
            break;
        }
        if step + 1 >= last {
            if config.target_error.is_some() {
                outcome.termination = Termination::MaxSteps;
            }
            break;
        }
        let target = config.target_error.unwrap_or(config.refine_fraction * est);
        match refine_step(&m, &a.report, config.refinement, target) {
            Ok(next) => mesh = Some(next),
            Err(e) => {
                outcome.termination = fail(&mut csv, step + 1, e)?;
                break;
            }
        }
        step += 1;
    }
    let json = serde_json::to_string_pretty(&outcome).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(outcome)
}

/// Area average of values given at the error-integration points of element `e`.
fn element_average(mesh: &Mesh, e: usize, values: &[Stress]) -> Stress {
    let r = rule(mesh.element(e).kind, Purpose::ErrorIntegration);
    let (mut sum, mut area) = (Stress::zeros(), 0.0);
    for ((xi, w), v) in r.iter().zip(values) {
        let dv = w * mesh.geometry(e, xi).det_j;
        sum += v * dv;
        area += dv;
    }
    sum / area
}

/// Fields of one step as a VTK grid: element-averaged σ^h, σ* and exact σ, the local
/// effectivity `D` (0 where undefined, flagged by `D_defined`), element errors and
/// nodal displacements.
pub fn step_grid(mesh: &Mesh, a: &StepAnalysis) -> vtk::Grid {
    let mut g = vtk::Grid::from_mesh(mesh, &format!("mlscx step {}", a.report.step));
    let ne = mesh.num_elements();
    let stress = |field: &[Vec<Stress>]| vtk::Array {
        components: 3,
        values: (0..ne).flat_map(|e| element_average(mesh, e, &field[e]).iter().copied().collect::<Vec<_>>()).collect(),
    };
    let scalar = |values: Vec<f64>| vtk::Array { components: 1, values };
    g.cell_data.insert("sigma_h".into(), stress(&a.fe));
    g.cell_data.insert("sigma_star".into(), stress(&a.recovered));
    g.cell_data.insert("sigma_exact".into(), stress(&a.exact));
    g.cell_data.insert("D".into(), scalar(a.report.local.iter().map(|d| d.unwrap_or(0.0)).collect()));
    g.cell_data.insert("D_defined".into(), scalar(a.report.local.iter().map(|d| f64::from(u8::from(d.is_some()))).collect()));
    g.cell_data.insert("est_err".into(), scalar(a.report.estimated.clone()));
    g.cell_data.insert("exact_err".into(), scalar(a.report.exact.clone()));
    let u = &a.displacements;
    g.point_data.insert(
        "displacement".into(),
        vtk::Array { components: 3, values: u.chunks(2).flat_map(|c| [c[0], c[1], 0.0]).collect() },
    );
    g
}

/// Sizes the global thread pool from [`THREADS_ENV`]; unset or invalid leaves the default.
pub fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[derive(Debug, Parser)]
#[command(name = "mlscx", version, about = "Stress recovery and error estimation benchmarks")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one benchmark configuration.
    Run {
        /// TOML run configuration.
        config: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
        /// Support size factor.
        #[arg(long)]
        k: Option<f64>,
        /// Number of steps; replaces `target_error`.
        #[arg(long)]
        steps: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn main() -> ExitCode {
    let args = Args::parse();
    configure_threads();
    match args.command {
        Command::Run { config, variant, k, steps, out } => {
            let result = RunConfig::load(&config).and_then(|mut c| {
                if let Some(v) = variant {
                    c.variant = v;
                }
                if let Some(k) = k {
                    c.support_k = k;
                }
                if let Some(s) = steps {
                    c.steps = Some(s);
                    c.target_error = None;
                }
                if let Some(o) = out {
                    c.output_dir = o;
                }
                run_case(&c)
            });
            match result {
                Ok(o) => {
                    for s in &o.steps {
                        println!(
                            "step {:>2}  dof {:>7}  est {:.4e}  exact {:.4e}  theta {:.4}  m(|D|) {:.4}  sigma(D) {:.4}",
                            s.step, s.dof, s.est_err, s.exact_err, s.theta, s.mean_abs_d, s.sigma_d
                        );
                    }
                    match &o.termination {
                        Termination::Failed { step, message } => {
                            eprintln!("error: step {step} failed: {message}");
                            ExitCode::FAILURE
                        }
                        t => {
                            println!("{t:?}; outputs in {}", o.config.output_dir.display());
                            ExitCode::SUCCESS
                        }
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
