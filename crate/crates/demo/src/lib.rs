//! Browser bindings: weight functions, σ* transects and the local effectivity map.
//!
//! Results are flat `Float64Array`s so the page can draw them without a serializer.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use mlscx::estimate::analyze;
use mlscx::fem::{self, ElementType};
use mlscx::problems::Problem;
use mlscx::recovery::{boundary_weight, weight, Recovery, RecoveryOptions, Variant};
use mlscx::Point;
use wasm_bindgen::prelude::*;

fn msg(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn problem(name: &str) -> Result<Problem, String> {
    match name {
        "square" => Ok(Problem::square()),
        "cylinder" => Ok(Problem::cylinder()),
        "westergaard" => Ok(Problem::westergaard(100.0, 0.0)),
        _ => Err(format!("unknown problem `{name}`")),
    }
}

fn options(variant: &str, k: f64) -> Result<RecoveryOptions, String> {
    if !(k > 0.0) {
        return Err(format!("support factor {k} must be positive"));
    }
    Ok(RecoveryOptions { variant: variant.parse::<Variant>().map_err(msg)?, k, ..Default::default() })
}

/// `[s, W(s), W̃(s)]` triples for `n + 1` points on `(0, 1]`; `W̃` is cut at 50.
#[wasm_bindgen]
pub fn weight_curves(n: usize) -> Vec<f64> {
    let n = n.max(1);
    (1..=n + 1)
        .flat_map(|i| {
            let s = (i as f64 - 0.5) / n as f64;
            let s = s.min(1.0);
            [s, weight(s).0, boundary_weight(s).0.min(50.0)]
        })
        .collect()
}

/// Stresses along the segment `(x0, y0) → (x1, y1)` on the square benchmark with `n × n`
/// elements. Each of the `samples + 1` points gives `[t, σ*xx, σ*yy, σ*xy, σxx, σyy, σxy,
/// σʰxx, σʰyy, σʰxy]` with exact and FE stresses after the recovered ones.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn transect(
    element: &str,
    n: usize,
    variant: &str,
    k: f64,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    samples: usize,
) -> Result<Vec<f64>, JsError> {
    transect_values(element, n, variant, k, [x0, y0, x1, y1], samples).map_err(|e| JsError::new(&e))
}

fn transect_values(element: &str, n: usize, variant: &str, k: f64, ends: [f64; 4], samples: usize) -> Result<Vec<f64>, String> {
    let kind: ElementType = element.parse().map_err(msg)?;
    let p = Problem::square();
    let mesh = p.initial_mesh(kind, n.clamp(2, 32)).map_err(msg)?;
    let sol = fem::solve(&mesh, &p.material(), &p).map_err(msg)?;
    let rec = Recovery::from_solution(&sol, &p, options(variant, k)?, None);
    let (a, b) = (Point::new(ends[0], ends[1]), Point::new(ends[2], ends[3]));
    let samples = samples.clamp(2, 2000);
    let mut out = Vec::with_capacity(10 * (samples + 1));
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        let x = a + (b - a) * t;
        let star = rec.at_point(&x).map_err(msg)?.stress;
        let exact = p.exact_stress(&x).map_err(msg)?;
        let fe = sol.fe_stress(&x).map_err(msg)?;
        out.push(t);
        out.extend(star.iter().chain(exact.iter()).chain(fe.iter()));
    }
    Ok(out)
}

/// Local effectivity map of one step. Layout: `[θ, m(|D|), σ(D), number of elements]`,
/// then per element `[vertex count, x1, y1, .., D]` with `D = NaN` where the exact error
/// vanishes.
#[wasm_bindgen]
pub fn effectivity_map(problem_name: &str, element: &str, n: usize, variant: &str, k: f64) -> Result<Vec<f64>, JsError> {
    map_values(problem_name, element, n, variant, k).map_err(|e| JsError::new(&e))
}

fn map_values(problem_name: &str, element: &str, n: usize, variant: &str, k: f64) -> Result<Vec<f64>, String> {
    let kind: ElementType = element.parse().map_err(msg)?;
    let p = problem(problem_name)?;
    let n = n.clamp(2, 32);
    let n = if n % 2 == 1 { n + 1 } else { n };
    let mesh = p.initial_mesh(kind, n).map_err(msg)?;
    let a = analyze(&mesh, &p, options(variant, k)?, 0.9, 0).map_err(msg)?;
    let r = &a.report;
    let mut out = vec![r.theta, r.mean_abs_d, r.sigma_d, mesh.num_elements() as f64];
    for (e, d) in r.local.iter().enumerate() {
        let verts = mesh.element(e).vertices();
        out.push(verts.len() as f64);
        for &v in verts {
            let x = mesh.node(v);
            out.extend([x.x, x.y]);
        }
        out.push(d.unwrap_or(f64::NAN));
    }
    Ok(out)
}
